#include "kra/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "kra/config.hpp"
#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/random.hpp"
#include "kra/matx_io.hpp"

namespace kra {

namespace fs = std::filesystem;

namespace {

// Runs task(i) for i in [0, count) on up to `workers` threads.
template <class Task>
void parallel_for(std::size_t count, std::size_t workers, Task task) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string cell_file(const std::string& target, std::string_view who, std::uint64_t seed) {
  std::string name;
  for (char c : target) name += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return "spectra/" + name + "_" + std::string(who) + "_s" + std::to_string(seed) + ".matx";
}

DenseMatrix spectrum_row(const Spectrum& s) {
  DenseMatrix m(1, std::max<std::size_t>(1, s.size()));
  std::copy(s.values().begin(), s.values().end(), m.data().begin());
  return m;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path.string());
}

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> json_opt(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void validate(const BenchConfig& c) {
  auto bad = [](const std::string& why) { fail(ErrorCode::kInvalidConfig, "bench: " + why); };
  if (c.rows == 0 || c.cols == 0) bad("size must be positive");
  if (c.adapters.empty()) bad("adapter list is empty");
  if (c.targets.empty()) bad("target list is empty");
  if (c.seeds.empty()) bad("seed list is empty");
  if (c.parallelism == 0) bad("parallelism must be >= 1");
  if (c.rand_rank == 0) bad("randlora rank must be >= 1");
  const bool ref_listed = c.budget_reference == AdapterKind::kKRAdapter ||
                          std::find(c.adapters.begin(), c.adapters.end(), c.budget_reference) !=
                              c.adapters.end();
  if (!ref_listed) bad("budget reference must be kradapter or one of the adapters");
  validate(c.hyper);
  for (const auto& t : c.targets) validate(t);
}

AdapterConfig resolve_adapter(const BenchConfig& config, AdapterKind kind, std::size_t rows,
                              std::size_t cols) {
  const std::size_t budget = num_params(default_config(config.budget_reference, rows, cols));
  AdapterConfig c;
  if (kind == AdapterKind::kRandLoRA) {
    c = default_config(kind, rows, cols);
    c.rank = config.rand_rank;
    c.bases = std::max<std::size_t>(1, (budget + c.rank + cols - 1) / (c.rank + cols));
  } else {
    c = match_budget(kind, rows, cols, budget);
  }
  if (kind == AdapterKind::kSinLoRA) c.omega = config.sin_omega;
  c.alpha = kApproxAlpha;
  validate(c);
  return c;
}

std::vector<TrainReport> run_grid(const BenchConfig& input) {
  validate(input);
  BenchConfig config = input;
  if (config.relative &&
      std::find(config.adapters.begin(), config.adapters.end(), AdapterKind::kLoRA) ==
          config.adapters.end()) {
    config.adapters.push_back(AdapterKind::kLoRA);
  }
  std::sort(config.adapters.begin(), config.adapters.end());
  config.adapters.erase(std::unique(config.adapters.begin(), config.adapters.end()),
                        config.adapters.end());
  std::sort(config.seeds.begin(), config.seeds.end());
  config.seeds.erase(std::unique(config.seeds.begin(), config.seeds.end()), config.seeds.end());

  const std::size_t n_targets = config.targets.size();
  const std::size_t n_adapters = config.adapters.size();
  const std::size_t n_seeds = config.seeds.size();

  // One target matrix per (target, seed), shared by every adapter.
  std::vector<std::optional<TargetMatrix>> targets(n_targets * n_seeds);
  std::vector<std::string> target_errors(targets.size());
  parallel_for(targets.size(), config.parallelism, [&](std::size_t i) {
    TargetSpec spec = config.targets[i / n_seeds];
    if (spec.kind != TargetKind::kFile) {
      spec.rows = config.rows;
      spec.cols = config.cols;
    }
    spec.seed = config.seeds[i % n_seeds];
    try {
      targets[i] = make_target(spec);
    } catch (const std::exception& e) {
      target_errors[i] = e.what();
    }
  });

  std::vector<TrainReport> reports(n_targets * n_adapters * n_seeds);
  parallel_for(reports.size(), config.parallelism, [&](std::size_t i) {
    const std::size_t t = i / (n_adapters * n_seeds);
    const std::size_t a = (i / n_seeds) % n_adapters;
    const std::size_t s = i % n_seeds;
    TrainReport& r = reports[i];
    r.adapter = config.adapters[a];
    r.target = config.targets[t].name;
    r.seed = config.seeds[s];
    r.spectrum_file = cell_file(r.target, to_string(r.adapter), r.seed);
    const auto& target = targets[t * n_seeds + s];
    if (!target) {
      r.error = "target generation failed: " + target_errors[t * n_seeds + s];
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    try {
      r.config = resolve_adapter(config, r.adapter, target->matrix.rows(), target->matrix.cols());
      r.params = num_params(r.config);
      TrainResult run = train_approx(r.config, target->matrix, config.hyper, r.seed);
      const DenseMatrix solution = delta(run.state);
      r.final_mse = run.trace.loss.back();
      r.trace = std::move(run.trace);
      r.solution_spectrum = singular_values(solution);
      r.target_spectrum = target->spectrum;
      r.nuc_err_abs = spectra_error(r.solution_spectrum, target->spectrum, SpectraErrorMode::kAbs);
      r.nuc_err_sq = spectra_error(r.solution_spectrum, target->spectrum, SpectraErrorMode::kSquared);
      r.nuc_norm = nuclear_norm(r.solution_spectrum);
      r.fro_norm = frobenius_norm(solution);
      r.eff_rank = r.nuc_norm > 0.0 ? effective_rank(r.solution_spectrum) : 0.0;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    if (config.timing) {
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  });

  if (config.relative) {
    // Groups whose baseline failed keep a null relative metric.
    std::map<std::pair<std::string, std::uint64_t>, std::vector<TrainReport*>> groups;
    for (auto& r : reports) groups[{r.target, r.seed}].push_back(&r);
    for (auto& [key, members] : groups) {
      std::vector<TrainReport> copy;
      for (auto* m : members) copy.push_back(*m);
      try {
        relative_to_lora(copy);
        for (std::size_t k = 0; k < members.size(); ++k) members[k]->rel_sq_pct = copy[k].rel_sq_pct;
      } catch (const Error&) {
      }
    }
  }
  return reports;
}

void relative_to_lora(std::vector<TrainReport>& reports) {
  std::map<std::pair<std::string, std::uint64_t>, double> baseline;
  for (const auto& r : reports) {
    if (r.adapter == AdapterKind::kLoRA && r.ok()) baseline[{r.target, r.seed}] = r.nuc_err_sq;
  }
  for (auto& r : reports) {
    if (!r.ok()) continue;
    const auto it = baseline.find({r.target, r.seed});
    if (it == baseline.end()) {
      fail(ErrorCode::kMissingBaseline,
           "no LoRA result for target " + r.target + " seed " + std::to_string(r.seed));
    }
    if (!(it->second > 0.0)) {
      fail(ErrorCode::kDegenerateBaseline,
           "LoRA squared nuclear error is zero for target " + r.target + " seed " + std::to_string(r.seed));
    }
    r.rel_sq_pct = r.adapter == AdapterKind::kLoRA ? 100.0 : 100.0 * r.nuc_err_sq / it->second;
  }
}

ResultRow to_row(const TrainReport& r) {
  ResultRow row;
  row.adapter = std::string(to_string(r.adapter));
  row.target = r.target;
  row.seed = r.seed;
  row.params = r.params;
  row.seconds = r.seconds;
  if (!r.ok()) return row;
  row.final_mse = r.final_mse;
  row.nuc_err_abs = r.nuc_err_abs;
  row.nuc_err_sq = r.nuc_err_sq;
  row.rel_sq_pct = r.rel_sq_pct;
  row.eff_rank = r.eff_rank;
  row.nuc_norm = r.nuc_norm;
  row.fro_norm = r.fro_norm;
  return row;
}

std::string results_csv(const std::vector<TrainReport>& reports) {
  std::string out = join({std::begin(kResultColumns), std::end(kResultColumns)}) + "\n";
  for (const auto& r : reports) {
    const ResultRow row = to_row(r);
    out += join({row.adapter, row.target, std::to_string(row.seed), std::to_string(row.params),
                 opt_text(row.final_mse), opt_text(row.nuc_err_abs), opt_text(row.nuc_err_sq),
                 opt_text(row.rel_sq_pct), opt_text(row.eff_rank), opt_text(row.nuc_norm),
                 opt_text(row.fro_norm), opt_text(row.seconds)});
    out += "\n";
  }
  return out;
}

std::string results_json(const std::vector<TrainReport>& reports) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : reports) {
    const ResultRow row = to_row(r);
    nlohmann::json j;
    j["adapter"] = row.adapter;
    j["target"] = row.target;
    j["seed"] = row.seed;
    j["params"] = row.params;
    j["final_mse"] = opt_json(row.final_mse);
    j["nuc_err_abs"] = opt_json(row.nuc_err_abs);
    j["nuc_err_sq"] = opt_json(row.nuc_err_sq);
    j["rel_sq_pct"] = opt_json(row.rel_sq_pct);
    j["eff_rank"] = opt_json(row.eff_rank);
    j["nuc_norm"] = opt_json(row.nuc_norm);
    j["fro_norm"] = opt_json(row.fro_norm);
    j["seconds"] = opt_json(row.seconds);
    if (!r.ok()) j["error"] = r.error;
    rows.push_back(std::move(j));
  }
  return rows.dump(2) + "\n";
}

std::vector<ResultRow> parse_results_json(const std::string& text) {
  std::vector<ResultRow> out;
  try {
    const auto rows = nlohmann::json::parse(text);
    for (const auto& j : rows) {
      ResultRow row;
      row.adapter = j.at("adapter").get<std::string>();
      row.target = j.at("target").get<std::string>();
      row.seed = j.at("seed").get<std::uint64_t>();
      row.params = j.at("params").get<std::size_t>();
      row.final_mse = json_opt(j, "final_mse");
      row.nuc_err_abs = json_opt(j, "nuc_err_abs");
      row.nuc_err_sq = json_opt(j, "nuc_err_sq");
      row.rel_sq_pct = json_opt(j, "rel_sq_pct");
      row.eff_rank = json_opt(j, "eff_rank");
      row.nuc_norm = json_opt(j, "nuc_norm");
      row.fro_norm = json_opt(j, "fro_norm");
      row.seconds = json_opt(j, "seconds");
      out.push_back(std::move(row));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, std::string("results json: ") + e.what());
  }
  return out;
}

void emit(const std::vector<TrainReport>& reports, const std::string& output_dir,
          ResultFormat format) {
  const fs::path dir(output_dir);
  std::error_code ec;
  fs::create_directories(dir / "spectra", ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + (dir / "spectra").string() + ": " + ec.message());

  if (format == ResultFormat::kCsv) {
    write_text(dir / "results.csv", results_csv(reports));
  } else {
    write_text(dir / "results.json", results_json(reports));
  }

  std::string traces = "target,adapter,seed,iteration,loss\n";
  std::map<std::pair<std::string, std::uint64_t>, const TrainReport*> target_spectra;
  for (const auto& r : reports) {
    if (!r.ok()) continue;
    save_matrix((dir / r.spectrum_file).string(), spectrum_row(r.solution_spectrum));
    target_spectra.emplace(std::make_pair(r.target, r.seed), &r);
    for (std::size_t it = 0; it < r.trace.loss.size(); ++it) {
      traces += r.target + "," + std::string(to_string(r.adapter)) + "," + std::to_string(r.seed) +
                "," + std::to_string(it) + "," + format_double(r.trace.loss[it]) + "\n";
    }
  }
  for (const auto& [key, r] : target_spectra) {
    save_matrix((dir / cell_file(key.first, "target", key.second)).string(),
                spectrum_row(r->target_spectrum));
  }
  write_text(dir / "traces.csv", traces);
}

void emit_manifest(const BenchConfig& config, const std::vector<TrainReport>& reports,
                   const std::string& output_dir) {
  KeyValues kv = bench_config_entries(config);
  kv.emplace_back("run.prng", std::string(kPrngName));
  kv.emplace_back("run.cells", std::to_string(reports.size()));
  std::size_t failed = 0;
  std::map<std::string, std::string> resolved;
  for (const auto& r : reports) {
    if (!r.ok()) {
      ++failed;
      kv.emplace_back("run.failed." + r.target + "." + std::string(to_string(r.adapter)) + ".s" +
                          std::to_string(r.seed),
                      r.error);
      continue;
    }
    resolved.emplace(r.target + "." + std::string(to_string(r.adapter)), describe(r.config));
  }
  kv.emplace_back("run.failed_cells", std::to_string(failed));
  for (const auto& [key, value] : resolved) kv.emplace_back("resolved." + key, value);
  const fs::path dir(output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "manifest.txt", format_key_values(kv));
}

}  // namespace kra
