#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kra/bench.hpp"
#include "kra/error.hpp"
#include "kra/matx_io.hpp"
#include "kra/spectrum.hpp"

using namespace kra;
namespace fs = std::filesystem;

namespace {

BenchConfig small_config(std::size_t parallelism = 1) {
  BenchConfig c;
  c.rows = 24;
  c.cols = 16;
  for (const auto& name : default_target_names()) c.targets.push_back(target_preset(name, 24, 16));
  c.seeds = {0};
  c.hyper.iterations = 8;
  c.parallelism = parallelism;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "kra_bench_tests" / name;
  fs::remove_all(dir);
  return dir;
}

TrainReport report(AdapterKind kind, const std::string& target, std::uint64_t seed, double sq) {
  TrainReport r;
  r.adapter = kind;
  r.target = target;
  r.seed = seed;
  r.nuc_err_sq = sq;
  return r;
}

const std::vector<TrainReport>& small_grid() {
  static const auto reports = run_grid(small_config());
  return reports;
}

}  // namespace

TEST(RunGrid, CellCountAndOrdering) {
  const auto& reports = small_grid();
  ASSERT_EQ(reports.size(), 30u);
  const auto targets = default_target_names();
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t a = 0; a < 5; ++a) {
      const auto& r = reports[t * 5 + a];
      EXPECT_EQ(r.target, targets[t]);
      EXPECT_EQ(r.adapter, kAllAdapterKinds[a]);
      EXPECT_TRUE(r.ok()) << r.error;
      EXPECT_EQ(r.trace.loss.size(), 9u);
      EXPECT_FALSE(r.seconds.has_value());
    }
}

TEST(RunGrid, LoRAIsTheHundredPercentBaseline) {
  for (const auto& r : small_grid()) {
    ASSERT_TRUE(r.rel_sq_pct.has_value());
    if (r.adapter == AdapterKind::kLoRA) {
      EXPECT_EQ(*r.rel_sq_pct, 100.0);
    }
  }
}

TEST(RunGrid, MetricsMatchIndependentRecomputation) {
  for (const auto& r : small_grid()) {
    EXPECT_DOUBLE_EQ(r.nuc_err_abs, spectra_error(r.solution_spectrum, r.target_spectrum, SpectraErrorMode::kAbs));
    EXPECT_DOUBLE_EQ(r.nuc_err_sq,
                     spectra_error(r.solution_spectrum, r.target_spectrum, SpectraErrorMode::kSquared));
    EXPECT_DOUBLE_EQ(r.nuc_norm, nuclear_norm(r.solution_spectrum));
    EXPECT_EQ(r.final_mse, r.trace.loss.back());
    EXPECT_EQ(r.params, num_params(r.config));
  }
}

TEST(RunGrid, BudgetFollowsReferenceAdapter) {
  const auto c = small_config();
  const std::size_t budget = num_params(default_config(AdapterKind::kKRAdapter, 24, 16));
  EXPECT_EQ(budget, 160u);
  for (AdapterKind kind : kAllAdapterKinds) {
    const auto a = resolve_adapter(c, kind, 24, 16);
    EXPECT_GE(num_params(a), budget) << to_string(kind);
  }
  EXPECT_EQ(resolve_adapter(c, AdapterKind::kLoRA, 24, 16).rank, 4u);
}

TEST(RunGrid, ParallelismDoesNotChangeResults) {
  auto c = small_config(3);
  c.targets.resize(3);
  c.seeds = {0, 1};
  const auto parallel = run_grid(c);
  c.parallelism = 1;
  const auto serial = run_grid(c);
  EXPECT_EQ(results_csv(parallel), results_csv(serial));
  for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(serial[i].trace.loss, parallel[i].trace.loss);
}

TEST(RunGrid, SeedsAreSortedAndTargetsShared) {
  auto c = small_config();
  c.targets.resize(1);
  c.seeds = {2, 0, 2};
  c.adapters = {AdapterKind::kKRAdapter};
  const auto reports = run_grid(c);
  ASSERT_EQ(reports.size(), 4u);  // LoRA joins for the relative metric
  EXPECT_EQ(reports[0].adapter, AdapterKind::kKRAdapter);
  EXPECT_EQ(reports[0].seed, 0u);
  EXPECT_EQ(reports[1].seed, 2u);
  EXPECT_EQ(reports[2].adapter, AdapterKind::kLoRA);
  EXPECT_EQ(reports[0].target_spectrum, reports[2].target_spectrum);
  EXPECT_NE(reports[0].target_spectrum, reports[1].target_spectrum);
}

TEST(RunGrid, FailedCellDoesNotStopTheGrid) {
  auto c = small_config();
  c.targets.resize(1);
  c.targets.push_back(target_preset("file:/nonexistent/kra.matx", 24, 16));
  const auto reports = run_grid(c);
  ASSERT_EQ(reports.size(), 10u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_TRUE(reports[i].ok());
  for (std::size_t i = 5; i < 10; ++i) EXPECT_FALSE(reports[i].ok());
  const auto csv = results_csv(reports);
  EXPECT_NE(csv.find("kradapter,file:/nonexistent/kra.matx,0,"), std::string::npos);
}

TEST(RunGrid, InvalidConfigs) {
  auto c = small_config();
  c.seeds.clear();
  EXPECT_THROW(validate(c), Error);
  c = small_config();
  c.parallelism = 0;
  EXPECT_THROW(validate(c), Error);
  c = small_config();
  c.targets.clear();
  EXPECT_THROW(validate(c), Error);
}

TEST(RelativeToLora, HalfTheBaseline) {
  std::vector<TrainReport> r = {report(AdapterKind::kKRAdapter, "normal", 0, 1.0),
                                report(AdapterKind::kLoRA, "normal", 0, 2.0),
                                report(AdapterKind::kKRAdapter, "normal", 1, 3.0),
                                report(AdapterKind::kLoRA, "normal", 1, 1.5)};
  relative_to_lora(r);
  EXPECT_DOUBLE_EQ(*r[0].rel_sq_pct, 50.0);
  EXPECT_EQ(*r[1].rel_sq_pct, 100.0);
  EXPECT_DOUBLE_EQ(*r[2].rel_sq_pct, 200.0);
}

TEST(RelativeToLora, Errors) {
  std::vector<TrainReport> missing = {report(AdapterKind::kKRAdapter, "normal", 0, 1.0),
                                      report(AdapterKind::kLoRA, "normal", 1, 2.0)};
  try {
    relative_to_lora(missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingBaseline);
  }
  std::vector<TrainReport> zero = {report(AdapterKind::kKRAdapter, "normal", 0, 1.0),
                                   report(AdapterKind::kLoRA, "normal", 0, 0.0)};
  try {
    relative_to_lora(zero);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateBaseline);
  }
}

TEST(Results, CsvHeaderAndEmptyTable) {
  EXPECT_EQ(results_csv({}),
            "adapter,target,seed,params,final_mse,nuc_err_abs,nuc_err_sq,rel_sq_pct,eff_rank,nuc_norm,"
            "fro_norm,seconds\n");
  const auto csv = results_csv(small_grid());
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);
}

TEST(Results, FormatDoubleRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.0, -2.5}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(100.0), "100");
}

TEST(Results, JsonRoundTrip) {
  const auto& reports = small_grid();
  const auto rows = parse_results_json(results_json(reports));
  ASSERT_EQ(rows.size(), reports.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i], to_row(reports[i]));
  EXPECT_THROW(parse_results_json("{not json"), Error);
}

TEST(Results, EmittedFilesSupportAnAudit) {
  const auto dir = fresh_dir("emit");
  const auto& reports = small_grid();
  emit(reports, dir.string(), ResultFormat::kCsv);
  emit(reports, dir.string(), ResultFormat::kJson);
  emit_manifest(small_config(), reports, dir.string());
  EXPECT_EQ(slurp(dir / "results.csv"), results_csv(reports));
  EXPECT_TRUE(fs::exists(dir / "results.json"));
  EXPECT_TRUE(fs::exists(dir / "traces.csv"));
  const auto manifest = slurp(dir / "manifest.txt");
  EXPECT_NE(manifest.find("run.prng"), std::string::npos);
  EXPECT_NE(manifest.find("run.failed_cells = 0"), std::string::npos);
  for (const auto& r : reports) {
    const auto sol = load_matrix((dir / r.spectrum_file).string());
    const auto tgt = load_matrix((dir / ("spectra/" + r.target + "_target_s" + std::to_string(r.seed) + ".matx")).string());
    ASSERT_EQ(sol.rows(), 1u);
    const Spectrum a({sol.data().begin(), sol.data().end()}, 24, 16);
    const Spectrum b({tgt.data().begin(), tgt.data().end()}, 24, 16);
    EXPECT_EQ(spectra_error(a, b, SpectraErrorMode::kAbs), r.nuc_err_abs);
  }
}
