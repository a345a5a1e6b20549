#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kra/adapters.hpp"
#include "kra/optim.hpp"
#include "kra/spectrum.hpp"
#include "kra/targets.hpp"

namespace kra {

struct BenchConfig {
  std::size_t rows = 1024;
  std::size_t cols = 768;
  std::vector<AdapterKind> adapters{kAllAdapterKinds.begin(), kAllAdapterKinds.end()};
  std::vector<TargetSpec> targets;
  std::vector<std::uint64_t> seeds{0};
  OptimHyper hyper;
  AdapterKind budget_reference = AdapterKind::kKRAdapter;
  std::string output_dir = "results";
  std::size_t parallelism = 1;
  // Relative-to-LoRA metrics; adds LoRA to the grid when missing.
  bool relative = true;
  // Record per-cell wallclock. Off by default so that results tables are
  // byte-identical across reruns.
  bool timing = false;
  double sin_omega = kDefaultSinOmega;
  std::size_t rand_rank = kDefaultRandRank;
};

// Throws InvalidConfig.
void validate(const BenchConfig& config);

struct TrainReport {
  AdapterKind adapter = AdapterKind::kKRAdapter;
  AdapterConfig config;
  std::string target;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  double final_mse = 0.0;
  double nuc_err_abs = 0.0;
  double nuc_err_sq = 0.0;
  std::optional<double> rel_sq_pct;
  double eff_rank = 0.0;
  double nuc_norm = 0.0;
  double fro_norm = 0.0;
  std::optional<double> seconds;
  std::string spectrum_file;
  // Empty when the cell completed.
  std::string error;
  TrainTrace trace;
  Spectrum solution_spectrum;
  Spectrum target_spectrum;

  bool ok() const noexcept { return error.empty(); }
};

// Adapter configuration used for one grid cell.
AdapterConfig resolve_adapter(const BenchConfig& config, AdapterKind kind, std::size_t rows,
                              std::size_t cols);

// Trains every (target, adapter, seed) cell. Reports are ordered by target
// position in the config, adapter kind, then seed; failed cells carry an
// error message and the rest of the grid continues.
std::vector<TrainReport> run_grid(const BenchConfig& config);

// Fills rel_sq_pct = 100 * nuc_err_sq / nuc_err_sq(LoRA, same target and
// seed). Throws MissingBaseline or DegenerateBaseline.
void relative_to_lora(std::vector<TrainReport>& reports);

// The flat table row shared by the CSV and JSON outputs.
struct ResultRow {
  std::string adapter;
  std::string target;
  std::uint64_t seed = 0;
  std::size_t params = 0;
  std::optional<double> final_mse;
  std::optional<double> nuc_err_abs;
  std::optional<double> nuc_err_sq;
  std::optional<double> rel_sq_pct;
  std::optional<double> eff_rank;
  std::optional<double> nuc_norm;
  std::optional<double> fro_norm;
  std::optional<double> seconds;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline constexpr const char* kResultColumns[] = {
    "adapter", "target", "seed", "params", "final_mse", "nuc_err_abs", "nuc_err_sq",
    "rel_sq_pct", "eff_rank", "nuc_norm", "fro_norm", "seconds"};

ResultRow to_row(const TrainReport& report);

std::string results_csv(const std::vector<TrainReport>& reports);
std::string results_json(const std::vector<TrainReport>& reports);
// Throws FormatError.
std::vector<ResultRow> parse_results_json(const std::string& text);

enum class ResultFormat { kCsv, kJson };

// Writes results.{csv,json}, traces.csv and spectra/*.matx under output_dir.
// Throws IoError.
void emit(const std::vector<TrainReport>& reports, const std::string& output_dir,
          ResultFormat format);

// Writes manifest.txt: the configuration as loadable `key = value` lines plus
// resolved adapter configurations under `resolved.` and run facts under `run.`.
void emit_manifest(const BenchConfig& config, const std::vector<TrainReport>& reports,
                   const std::string& output_dir);

// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

}  // namespace kra
