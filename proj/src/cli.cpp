#include "kra/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <thread>

#include <json.hpp>

#include "kra/bench.hpp"
#include "kra/config.hpp"
#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/matx_io.hpp"
#include "kra/spectrum.hpp"
#include "kra/targets.hpp"
#include "kra/verify.hpp"

namespace kra {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  // shared
  std::string size = "1024x768";
  std::string out;
  std::string lr = "0.01", beta1 = "0.9", beta2 = "0.999", weight_decay = "0.01", epsilon = "1e-8",
              iters = "100";
  std::string omega = "200";
  std::string rand_rank = std::to_string(kDefaultRandRank);
  std::string zero_fraction = "0.9", keep_fraction = "0.25", superpose = "1";
  std::string crop;
  // bench
  std::string adapters = "kradapter,lora,sinlora,krona,randlora";
  std::string targets = "normal,sparse90,whitened,lowrank,highfreq,lowfreq";
  std::string seeds = "0";
  std::string budget_reference = "kradapter";
  std::string parallelism;
  std::string format = "both";
  bool timing = false;
  bool relative = true;
  // approx
  std::string adapter;
  std::string target = "normal";
  std::string seed = "0";
  std::string rank, terms, bases, sine_scale, alpha;
  // verify
  std::string check = "all";
  std::string k = "32", din = "768", dout = "1024", trials, m = "64", n = "48", r = "12";
  std::string h = "1e-6", tol = "1e-5";
  bool json = false;
  // spectrum
  std::string input;
};

// Config keys accepted per subcommand and the flag each one maps to.
const std::map<std::string, std::map<std::string, std::string>>& config_keys() {
  static const std::map<std::string, std::map<std::string, std::string>> keys = [] {
    const std::map<std::string, std::string> hyper = {
        {"hyper.lr", "--lr"},
        {"hyper.beta1", "--beta1"},
        {"hyper.beta2", "--beta2"},
        {"hyper.weight_decay", "--weight-decay"},
        {"hyper.epsilon", "--epsilon"},
        {"hyper.iterations", "--iters"},
        {"sinlora.omega", "--omega"},
        {"randlora.rank", "--rand-rank"},
        {"target.zero_fraction", "--zero-fraction"},
        {"target.keep_fraction", "--keep-fraction"},
        {"target.superpose", "--superpose"},
        {"target.crop", "--crop"},
        {"size", "--size"},
        {"out", "--out"},
    };
    auto bench = hyper;
    bench.insert({{"adapters", "--adapters"},
                  {"targets", "--targets"},
                  {"seeds", "--seeds"},
                  {"budget_reference", "--budget-reference"},
                  {"parallelism", "--parallelism"},
                  {"relative", "--relative"},
                  {"timing", "--timing"},
                  {"format", "--format"}});
    auto approx = hyper;
    approx.insert({{"adapter", "--adapter"},
                   {"target", "--target"},
                   {"seed", "--seed"},
                   {"rank", "--rank"},
                   {"terms", "--terms"},
                   {"bases", "--bases"},
                   {"sinlora.scale", "--sine-scale"},
                   {"alpha", "--alpha"}});
    const std::map<std::string, std::string> verify = {
        {"check", "--check"}, {"k", "--k"},         {"din", "--din"}, {"dout", "--dout"},
        {"trials", "--trials"}, {"seed", "--seed"}, {"m", "--m"},     {"n", "--n"},
        {"r", "--r"},         {"fd_step", "--fd-step"},         {"tol", "--tol"}, {"json", "--json"}};
    const std::map<std::string, std::string> spectrum = {
        {"input", "--input"}, {"crop", "--crop"}, {"out", "--out"}, {"json", "--json"}};
    return std::map<std::string, std::map<std::string, std::string>>{
        {"bench", bench}, {"approx", approx}, {"verify", verify}, {"spectrum", spectrum}};
  }();
  return keys;
}

bool is_flag_key(const std::string& key) {
  return key == "timing" || key == "relative" || key == "json";
}

double to_double(const std::string& text, const std::string& what) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    fail(ErrorCode::kInvalidConfig, what + ": expected a number, got '" + text + "'");
  }
  return value;
}

std::uint64_t to_u64(const std::string& text, const std::string& what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::kInvalidConfig, what + ": expected a nonnegative integer, got '" + text + "'");
  }
  return value;
}

OptimHyper hyper_from(const Options& o) {
  OptimHyper hp;
  hp.lr = to_double(o.lr, "--lr");
  hp.beta1 = to_double(o.beta1, "--beta1");
  hp.beta2 = to_double(o.beta2, "--beta2");
  hp.weight_decay = to_double(o.weight_decay, "--weight-decay");
  hp.epsilon = to_double(o.epsilon, "--epsilon");
  hp.iterations = to_u64(o.iters, "--iters");
  validate(hp);
  return hp;
}

std::string default_output(const Options& o, const std::string& fallback) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return fallback;
}

TargetSpec target_from(const Options& o, const std::string& name, std::size_t rows, std::size_t cols) {
  TargetSpec t = target_preset(name, rows, cols);
  t.zero_fraction = to_double(o.zero_fraction, "--zero-fraction");
  t.keep_fraction = to_double(o.keep_fraction, "--keep-fraction");
  t.superpose = to_u64(o.superpose, "--superpose");
  if (!o.crop.empty()) t.crop = parse_crop(o.crop, "--crop");
  validate(t);
  return t;
}

void add_hyper_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--size", o.size, "Matrix shape ROWSxCOLS");
  cmd->add_option("--lr", o.lr, "AdamW learning rate");
  cmd->add_option("--beta1", o.beta1, "AdamW beta1");
  cmd->add_option("--beta2", o.beta2, "AdamW beta2");
  cmd->add_option("--weight-decay", o.weight_decay, "Decoupled weight decay");
  cmd->add_option("--epsilon", o.epsilon, "AdamW epsilon");
  cmd->add_option("--iters", o.iters, "Training iterations");
  cmd->add_option("--omega", o.omega, "SinLoRA frequency");
  cmd->add_option("--rand-rank", o.rand_rank, "RandLoRA basis rank");
  cmd->add_option("--zero-fraction", o.zero_fraction, "Zero fraction of the sparse target");
  cmd->add_option("--keep-fraction", o.keep_fraction, "Kept spectrum fraction of the low-rank target");
  cmd->add_option("--superpose", o.superpose, "Superposed sinusoids per row (1-5)");
  cmd->add_option("--crop", o.crop, "Crop window ROW0,COL0,ROWS,COLS for file targets");
  cmd->add_option("--out", o.out, "Output directory");
}

void build_app(CLI::App& app, Options& o) {
  app.option_defaults()->take_last();
  app.require_subcommand(1);
  app.set_config();  // disable CLI11's own config handling; --config is ours

  auto* bench = app.add_subcommand("bench", "Train the adapter x target grid and emit results");
  bench->add_option("--config", o.config, "key = value configuration file");
  add_hyper_flags(bench, o);
  bench->add_option("--adapters", o.adapters, "Comma-separated adapter kinds");
  bench->add_option("--targets", o.targets, "Comma-separated target presets or file:<path>");
  bench->add_option("--seeds", o.seeds, "Seed list, e.g. 0,1,2 or 0..2");
  bench->add_option("--budget-reference", o.budget_reference, "Adapter whose count sets the budget");
  bench->add_option("--parallelism", o.parallelism, "Worker threads (default: logical cores)");
  bench->add_option("--format", o.format, "csv, json or both");
  bench->add_flag("--timing", o.timing, "Record per-cell wallclock seconds");
  bench->add_flag("--relative,!--no-relative", o.relative, "Relative-to-LoRA metrics");

  auto* approx = app.add_subcommand("approx", "Train one adapter on one target");
  approx->add_option("--config", o.config, "key = value configuration file");
  add_hyper_flags(approx, o);
  approx->add_option("--adapter", o.adapter, "Adapter kind")->required();
  approx->add_option("--target", o.target, "Target preset or file:<path>");
  approx->add_option("--seed", o.seed, "Seed");
  approx->add_option("--rank", o.rank, "LoRA/SinLoRA rank or RandLoRA basis rank");
  approx->add_option("--terms", o.terms, "KronA term count");
  approx->add_option("--bases", o.bases, "RandLoRA basis count");
  approx->add_option("--sine-scale", o.sine_scale, "SinLoRA post-sine scale (default: rank)");
  approx->add_option("--alpha", o.alpha, "Delta scaling");

  auto* verify = app.add_subcommand("verify", "Numerical checks of the structural claims");
  verify->add_option("--config", o.config, "key = value configuration file");
  verify->add_option("--check", o.check,
                     "all, full-rank, control, kr-decomp, param-min, effrank or gradcheck");
  verify->add_option("--k", o.k, "Factor height for full-rank checks");
  verify->add_option("--din", o.din, "Column count / input dimension");
  verify->add_option("--dout", o.dout, "Output dimension");
  verify->add_option("--trials", o.trials, "Trial count");
  verify->add_option("--seed", o.seed, "Seed");
  verify->add_option("--m", o.m, "Rows for kr-decomp");
  verify->add_option("--n", o.n, "Columns for kr-decomp");
  verify->add_option("--r", o.r, "Rank for kr-decomp");
  verify->add_option("--fd-step", o.h, "Finite-difference step");
  verify->add_option("--tol", o.tol, "Gradient check tolerance");
  verify->add_flag("--json", o.json, "Print JSON instead of text");

  auto* spectrum = app.add_subcommand("spectrum", "Spectrum and norms of a matrix file");
  spectrum->add_option("--config", o.config, "key = value configuration file");
  spectrum->add_option("input,--input", o.input, "MATX or CSV matrix file");
  spectrum->add_option("--crop", o.crop, "Crop window ROW0,COL0,ROWS,COLS");
  spectrum->add_option("--out", o.out, "Write the spectrum as a 1 x n MATX file");
  spectrum->add_flag("--json", o.json, "Print JSON instead of text");
}

// Config-file entries turned into flag tokens placed before the user's own
// arguments, so that explicit flags win under the take-last policy.
std::vector<std::string> config_tokens(const std::string& sub, const std::string& path) {
  const auto& keys = config_keys().at(sub);
  std::vector<std::string> tokens;
  for (const auto& [key, value] : read_config_file(path)) {
    if (key.rfind("resolved.", 0) == 0 || key.rfind("run.", 0) == 0) continue;
    const auto it = keys.find(key);
    if (it == keys.end()) fail(ErrorCode::kInvalidConfig, path + ": unknown key '" + key + "' for " + sub);
    if (is_flag_key(key)) {
      if (value != "true" && value != "false") {
        fail(ErrorCode::kInvalidConfig, path + ": " + key + " must be true or false");
      }
      tokens.push_back(it->second + "=" + value);
    } else {
      tokens.push_back(it->second);
      tokens.push_back(value);
    }
  }
  return tokens;
}

void print_bench_summary(const std::vector<TrainReport>& reports, std::ostream& out) {
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> abs_err;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : reports) {
    const auto key = std::make_pair(r.target, std::string(to_string(r.adapter)));
    if (!abs_err.count(key)) order.push_back(key);
    auto& slot = abs_err[key];
    if (r.ok()) {
      slot.first += r.nuc_err_abs;
      slot.second += 1;
    }
  }
  out << std::left << std::setw(12) << "target" << std::setw(11) << "adapter" << "mean nuc_err_abs\n";
  for (const auto& key : order) {
    const auto& [sum, count] = abs_err[key];
    out << std::left << std::setw(12) << key.first << std::setw(11) << key.second;
    if (count) {
      out << sum / count << "\n";
    } else {
      out << "failed\n";
    }
  }
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  BenchConfig c;
  std::tie(c.rows, c.cols) = parse_size(o.size, "--size");
  c.adapters = parse_adapter_list(o.adapters, "--adapters");
  c.targets.clear();
  for (const auto& name : split_list(o.targets)) c.targets.push_back(target_from(o, name, c.rows, c.cols));
  c.seeds = parse_seeds(o.seeds, "--seeds");
  c.hyper = hyper_from(o);
  c.budget_reference = parse_adapter_kind(o.budget_reference);
  c.output_dir = default_output(o, "results");
  c.parallelism = o.parallelism.empty()
                      ? std::max(1u, std::thread::hardware_concurrency())
                      : to_u64(o.parallelism, "--parallelism");
  c.relative = o.relative;
  c.timing = o.timing;
  c.sin_omega = to_double(o.omega, "--omega");
  c.rand_rank = to_u64(o.rand_rank, "--rand-rank");
  if (o.format != "csv" && o.format != "json" && o.format != "both") {
    fail(ErrorCode::kInvalidConfig, "--format: expected csv, json or both");
  }
  validate(c);

  const auto reports = run_grid(c);
  if (o.format != "json") emit(reports, c.output_dir, ResultFormat::kCsv);
  if (o.format != "csv") emit(reports, c.output_dir, ResultFormat::kJson);
  emit_manifest(c, reports, c.output_dir);
  print_bench_summary(reports, out);
  std::size_t failed = 0;
  for (const auto& r : reports) {
    if (!r.ok()) {
      ++failed;
      err << "cell " << r.target << "/" << to_string(r.adapter) << "/seed " << r.seed
          << " failed: " << r.error << "\n";
    }
  }
  out << reports.size() << " cells, " << failed << " failed; results in " << c.output_dir << "\n";
  return failed ? kExitFailure : kExitOk;
}

int cmd_approx(const Options& o, std::ostream& out, std::ostream& err) {
  auto [rows, cols] = parse_size(o.size, "--size");
  const AdapterKind kind = parse_adapter_kind(o.adapter);
  const std::uint64_t seed = to_u64(o.seed, "--seed");
  TargetSpec spec = target_from(o, o.target, rows, cols);
  spec.seed = seed;
  const TargetMatrix target = make_target(spec);
  rows = target.matrix.rows();
  cols = target.matrix.cols();

  BenchConfig bc;
  bc.sin_omega = to_double(o.omega, "--omega");
  bc.rand_rank = to_u64(o.rand_rank, "--rand-rank");
  AdapterConfig c = resolve_adapter(bc, kind, rows, cols);
  if (!o.rank.empty()) c.rank = to_u64(o.rank, "--rank");
  if (!o.terms.empty()) c.terms = to_u64(o.terms, "--terms");
  if (!o.bases.empty()) c.bases = to_u64(o.bases, "--bases");
  if (!o.sine_scale.empty()) c.sine_scale = to_double(o.sine_scale, "--sine-scale");
  if (!o.alpha.empty()) c.alpha = to_double(o.alpha, "--alpha");
  validate(c);
  const OptimHyper hp = hyper_from(o);
  const std::string dir = default_output(o, "approx");

  TrainResult run;
  try {
    run = train_approx(c, target.matrix, hp, seed);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonFiniteGradient) throw;
    err << "training aborted: " << e.what() << "\n";
    return kExitFailure;
  }
  const DenseMatrix solution = delta(run.state);
  const Spectrum s = singular_values(solution);

  fs::create_directories(dir);
  save_matrix((fs::path(dir) / "solution.matx").string(), solution);
  DenseMatrix srow(1, s.size());
  std::copy(s.values().begin(), s.values().end(), srow.data().begin());
  save_matrix((fs::path(dir) / "spectrum.matx").string(), srow);
  DenseMatrix trow(1, target.spectrum.size());
  std::copy(target.spectrum.values().begin(), target.spectrum.values().end(), trow.data().begin());
  save_matrix((fs::path(dir) / "target_spectrum.matx").string(), trow);
  {
    std::ofstream trace(fs::path(dir) / "trace.csv");
    trace << "iteration,loss\n";
    for (std::size_t i = 0; i < run.trace.loss.size(); ++i) {
      trace << i << "," << format_double(run.trace.loss[i]) << "\n";
    }
    if (!trace) fail(ErrorCode::kIoError, "cannot write trace.csv in " + dir);
  }
  nlohmann::json report = {
      {"adapter", std::string(to_string(kind))},
      {"config", describe(c)},
      {"target", spec.name},
      {"seed", seed},
      {"params", num_params(c)},
      {"initial_mse", run.trace.loss.front()},
      {"final_mse", run.trace.loss.back()},
      {"nuc_err_abs", spectra_error(s, target.spectrum, SpectraErrorMode::kAbs)},
      {"nuc_err_sq", spectra_error(s, target.spectrum, SpectraErrorMode::kSquared)},
      {"eff_rank", nuclear_norm(s) > 0.0 ? effective_rank(s) : 0.0},
      {"numerical_rank", numerical_rank(s)},
      {"nuc_norm", nuclear_norm(s)},
      {"fro_norm", frobenius_norm(solution)},
  };
  {
    std::ofstream f(fs::path(dir) / "report.json");
    f << report.dump(2) << "\n";
    if (!f) fail(ErrorCode::kIoError, "cannot write report.json in " + dir);
  }
  out << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_verify(const Options& o, std::ostream& out) {
  const std::uint64_t seed = to_u64(o.seed, "--seed");
  const auto k = to_u64(o.k, "--k");
  const auto din = to_u64(o.din, "--din");
  const auto dout = to_u64(o.dout, "--dout");
  auto trials = [&](std::size_t fallback) {
    return o.trials.empty() ? fallback : to_u64(o.trials, "--trials");
  };
  const bool all = o.check == "all";
  static const std::vector<std::string> known = {"all", "full-rank", "control", "kr-decomp",
                                                 "param-min", "effrank", "gradcheck"};
  if (std::find(known.begin(), known.end(), o.check) == known.end()) {
    fail(ErrorCode::kInvalidConfig, "--check: unknown check '" + o.check + "'");
  }
  std::vector<VerifyOutcome> outcomes;
  if (all || o.check == "full-rank") outcomes.push_back(verify_full_rank(k, din, trials(100), seed));
  if (all || o.check == "control") outcomes.push_back(verify_full_rank_control(k, din, seed));
  if (all || o.check == "kr-decomp") {
    outcomes.push_back(verify_kr_decomposition(to_u64(o.m, "--m"), to_u64(o.n, "--n"),
                                               to_u64(o.r, "--r"), seed));
  }
  if (all || o.check == "param-min") outcomes.push_back(verify_param_minimum(dout, din));
  if (all || o.check == "effrank") outcomes.push_back(compare_effrank_kr_vs_kron(dout, din, trials(20), seed));
  if (all || o.check == "gradcheck") {
    outcomes.push_back(gradcheck_all(12, 8, to_double(o.h, "--fd-step"), to_double(o.tol, "--tol"), seed));
  }
  bool ok = true;
  if (o.json) {
    out << outcomes_json(outcomes);
  }
  for (const auto& outcome : outcomes) {
    if (!o.json) out << format_outcome(outcome) << "\n";
    ok = ok && outcome.pass;
  }
  return ok ? kExitOk : kExitFailure;
}

int cmd_spectrum(const Options& o, std::ostream& out) {
  if (o.input.empty()) fail(ErrorCode::kInvalidConfig, "spectrum: an input file is required");
  std::optional<Crop> crop;
  if (!o.crop.empty()) crop = parse_crop(o.crop, "--crop");
  const DenseMatrix m = load_matrix(o.input, crop);
  const Spectrum s = singular_values(m);
  const double nuc = nuclear_norm(s);
  const double er = nuc > 0.0 ? effective_rank(s) : 0.0;
  if (!o.out.empty()) {
    DenseMatrix row(1, s.size());
    std::copy(s.values().begin(), s.values().end(), row.data().begin());
    save_matrix(o.out, row);
  }
  if (o.json) {
    nlohmann::json j = {{"rows", m.rows()},
                        {"cols", m.cols()},
                        {"effective_rank", er},
                        {"numerical_rank", numerical_rank(s)},
                        {"nuclear_norm", nuc},
                        {"frobenius_norm", frobenius_norm(m)},
                        {"values", s.values()}};
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  out << "shape " << m.rows() << "x" << m.cols() << "\n"
      << "effective_rank " << format_double(er) << "\n"
      << "numerical_rank " << numerical_rank(s) << "\n"
      << "nuclear_norm " << format_double(nuc) << "\n"
      << "frobenius_norm " << format_double(frobenius_norm(m)) << "\n"
      << "values";
  for (double v : s.values()) out << " " << format_double(v);
  out << "\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kHypothesisViolation:
    case ErrorCode::kUnreachable:
    case ErrorCode::kCropOutOfBounds:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  Options o;
  try {
    for (int pass = 0; pass < 2; ++pass) {
      o = Options{};
      CLI::App app{"Khatri-Rao adapter benchmark and verification tool", "kra"};
      build_app(app, o);
      std::vector<std::string> reversed(args.rbegin(), args.rend());
      try {
        app.parse(reversed);
      } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
      } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
      } catch (const CLI::ParseError& e) {
        err << "kra: " << e.what() << "\n";
        return kExitUsage;
      }
      const auto subs = app.get_subcommands();
      const std::string sub = subs.front()->get_name();
      if (pass == 0 && !o.config.empty()) {
        // Re-parse with the file's entries ahead of the explicit flags.
        auto tokens = config_tokens(sub, o.config);
        const auto pos = std::find(args.begin(), args.end(), sub);
        args.insert(pos + 1, tokens.begin(), tokens.end());
        continue;
      }
      if (sub == "bench") return cmd_bench(o, out, err);
      if (sub == "approx") return cmd_approx(o, out, err);
      if (sub == "verify") return cmd_verify(o, out);
      return cmd_spectrum(o, out);
    }
  } catch (const Error& e) {
    err << "kra: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "kra: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace kra
