#include "kra/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/optim.hpp"
#include "kra/random.hpp"
#include "kra/spectrum.hpp"
#include "kra/targets.hpp"

namespace kra {

namespace {

std::string shape_text(std::size_t a, std::size_t b) {
  return std::to_string(a) + "x" + std::to_string(b);
}

double sigma_ratio(const Spectrum& s) {
  return s.max() > 0.0 ? s.values().back() / s.max() : 0.0;
}

// Small randomised configuration of each kind for gradient checks; sizes are
// chosen so that every kind has more than one term or rank.
AdapterConfig gradcheck_config(AdapterKind kind, std::size_t d_out, std::size_t d_in) {
  AdapterConfig c = default_config(kind, d_out, d_in);
  const std::size_t small = std::min(d_out, d_in);
  switch (kind) {
    case AdapterKind::kLoRA:
    case AdapterKind::kSinLoRA: c.rank = std::min<std::size_t>(3, small); break;
    case AdapterKind::kKronA: c.terms = 2; break;
    case AdapterKind::kRandLoRA:
      c.rank = std::min<std::size_t>(3, small);
      c.bases = 2;
      break;
    case AdapterKind::kKRAdapter: break;
  }
  if (kind == AdapterKind::kSinLoRA) c.omega = 3.0;
  c.alpha = 0.7;
  return c;
}

}  // namespace

VerifyOutcome verify_full_rank(std::size_t k, std::size_t d_in, std::size_t trials,
                               std::uint64_t seed) {
  if (k == 0 || d_in < k || d_in > k * k) {
    fail(ErrorCode::kHypothesisViolation,
         "full rank needs k <= d_in <= k^2; got k=" + std::to_string(k) +
             ", d_in=" + std::to_string(d_in) + " (k^2 = " + std::to_string(k * k) + ")");
  }
  VerifyOutcome out;
  out.name = "full-rank k=" + std::to_string(k) + " d_in=" + std::to_string(d_in);
  out.statistic = "min sigma_min/sigma_max";
  out.trials = trials;
  out.worst = std::numeric_limits<double>::infinity();
  const RandomStream root(seed, "verify/full-rank");
  for (std::size_t t = 0; t < trials; ++t) {
    RandomStream stream = root.split("trial/" + std::to_string(t));
    const bool gaussian = t % 2 == 0;
    const DenseMatrix u = gaussian ? random_normal(k, d_in, stream) : random_uniform(k, d_in, -1, 1, stream);
    const DenseMatrix v = gaussian ? random_normal(k, d_in, stream) : random_uniform(k, d_in, -1, 1, stream);
    const Spectrum s = singular_values(khatri_rao(u, v));
    if (numerical_rank(s, kDefaultRankTolerance) == d_in) ++out.passes;
    out.worst = std::min(out.worst, sigma_ratio(s));
  }
  out.pass = out.passes == out.trials;
  out.detail = std::to_string(out.passes) + "/" + std::to_string(trials) + " trials at rank " +
               std::to_string(d_in);
  return out;
}

VerifyOutcome verify_full_rank_control(std::size_t k, std::size_t d_in, std::uint64_t seed) {
  if (k == 0 || d_in < 2) fail(ErrorCode::kInvalidArgument, "control needs k >= 1 and d_in >= 2");
  RandomStream stream(seed, "verify/full-rank-control");
  DenseMatrix u = random_normal(k, d_in, stream);
  DenseMatrix v = random_normal(k, d_in, stream);
  for (std::size_t i = 0; i < k; ++i) {
    u(i, 0) = u(i, 1);
    v(i, 0) = v(i, 1);
  }
  const Spectrum s = singular_values(khatri_rao(u, v));
  const std::size_t rank = numerical_rank(s, kDefaultRankTolerance);
  VerifyOutcome out;
  out.name = "full-rank negative control k=" + std::to_string(k) + " d_in=" + std::to_string(d_in);
  out.statistic = "sigma_min/sigma_max";
  out.trials = 1;
  out.worst = sigma_ratio(s);
  out.passes = rank < d_in ? 1 : 0;
  out.pass = out.passes == 1;
  out.detail = "rank " + std::to_string(rank) + " of " + std::to_string(d_in) +
               (out.pass ? " (deficiency detected)" : " (deficiency missed)");
  return out;
}

KRDecomposition kr_decompose(const DenseMatrix& w) {
  const SvdResult f = svd(w);
  const std::size_t r = numerical_rank(f.spectrum, kDefaultRankTolerance);
  if (r == 0) fail(ErrorCode::kZeroMatrix, "kr_decompose: zero matrix");
  KRDecomposition d;
  d.u_bar = DenseMatrix(w.rows(), r);
  d.v_bar = DenseMatrix(w.cols(), r);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t k = 0; k < r; ++k) d.u_bar(i, k) = f.left(i, k);
  }
  for (std::size_t j = 0; j < w.cols(); ++j) {
    for (std::size_t k = 0; k < r; ++k) d.v_bar(j, k) = f.right(j, k);
  }
  d.sigma.assign(f.spectrum.values().begin(), f.spectrum.values().begin() + static_cast<long>(r));
  return d;
}

VerifyOutcome verify_kr_decomposition(std::size_t m, std::size_t n, std::size_t r,
                                      std::uint64_t seed, double scale) {
  if (r == 0 || r > std::min(m, n)) {
    fail(ErrorCode::kInvalidArgument, "verify_kr_decomposition: need 1 <= r <= min(m, n)");
  }
  const double keep = static_cast<double>(r) / static_cast<double>(std::min(m, n));
  DenseMatrix w = gen_lowrank(m, n, keep, seed);
  scale_in_place(w, scale);
  const KRDecomposition d = kr_decompose(w);
  const DenseMatrix kr = khatri_rao(d.v_bar, d.u_bar);
  const std::vector<double> target = vec(w);
  double residual = 0.0;
  for (std::size_t row = 0; row < kr.rows(); ++row) {
    const auto line = kr.row(row);
    double acc = 0.0;
    for (std::size_t k = 0; k < d.sigma.size(); ++k) acc += line[k] * d.sigma[k];
    residual = std::max(residual, std::abs(target[row] - acc));
  }
  const double bound = 1e-9 * frobenius_norm(w);
  VerifyOutcome out;
  out.name = "kr-decomposition " + shape_text(m, n) + " r=" + std::to_string(r);
  out.statistic = "max residual / ||W||_F";
  out.trials = 1;
  out.worst = residual / frobenius_norm(w);
  out.passes = residual <= bound ? 1 : 0;
  out.pass = out.passes == 1;
  out.detail = "recovered rank " + std::to_string(d.sigma.size());
  return out;
}

VerifyOutcome verify_param_minimum(std::size_t d_out, std::size_t d_in) {
  if (d_out == 0 || d_in == 0) fail(ErrorCode::kInvalidArgument, "verify_param_minimum: dims must be positive");
  const std::size_t floor_k = kr_shape(d_out).first;
  auto cost = [&](std::size_t k1) { return d_in * (k1 + (d_out + k1 - 1) / k1); };
  std::size_t best = cost(1);
  for (std::size_t k1 = 2; k1 <= d_out; ++k1) best = std::min(best, cost(k1));
  // The minimiser set can hold several k1; report the one nearest the floor.
  std::size_t argmin = 0;
  for (std::size_t k1 = 1; k1 <= d_out; ++k1) {
    if (cost(k1) != best) continue;
    const auto dist = [&](std::size_t k) { return k > floor_k ? k - floor_k : floor_k - k; };
    if (argmin == 0 || dist(k1) < dist(argmin)) argmin = k1;
  }
  VerifyOutcome out;
  out.name = "param-minimum d_out=" + std::to_string(d_out) + " d_in=" + std::to_string(d_in);
  out.statistic = "minimum cost";
  out.trials = 1;
  out.worst = static_cast<double>(best);
  out.pass = cost(floor_k) == best;
  out.passes = out.pass ? 1 : 0;
  out.detail = "argmin k1=" + std::to_string(argmin) + " floor(sqrt)=" + std::to_string(floor_k) +
               " cost=" + std::to_string(best);
  return out;
}

VerifyOutcome compare_effrank_kr_vs_kron(std::size_t d_out, std::size_t d_in, std::size_t trials,
                                         std::uint64_t seed) {
  AdapterConfig kr = default_config(AdapterKind::kKRAdapter, d_out, d_in);
  const auto [k1, k2] = kr_shape(std::max(d_out, d_in));
  const std::size_t cols = std::min(d_out, d_in);
  const AdapterConfig kron = kron_pair_for_budget(d_out, d_in, num_params(kr));
  const KronShape& s = kron.kron;
  const double slope = std::sqrt(1.0 / static_cast<double>(k1));
  const RandomStream root(seed, "verify/effrank");
  double sum = 0.0;
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    RandomStream stream = root.split("trial/" + std::to_string(t));
    const double bu = kaiming_bound(slope, cols);
    const DenseMatrix u = random_uniform(k1, cols, -bu, bu, stream);
    const DenseMatrix v = random_uniform(k2, cols, -bu, bu, stream);
    const DenseMatrix m = leading_rows(khatri_rao(u, v), std::max(d_out, d_in));
    const double er_kr = effective_rank(singular_values(m));
    const double ba = kaiming_bound(slope, s.a2);
    const double bb = kaiming_bound(slope, s.b2);
    const DenseMatrix a = random_uniform(s.a1, s.a2, -ba, ba, stream);
    const DenseMatrix b = random_uniform(s.b1, s.b2, -bb, bb, stream);
    const double er_kron = effective_rank(kron_spectrum(singular_values(a), singular_values(b)));
    const double ratio = er_kr / er_kron;
    sum += ratio;
    lowest = std::min(lowest, ratio);
  }
  VerifyOutcome out;
  out.name = "effrank-kr-vs-kron " + shape_text(d_out, d_in);
  out.statistic = "mean ER_kr/ER_kron";
  out.trials = trials;
  out.worst = trials ? sum / static_cast<double>(trials) : 0.0;
  out.passes = out.worst > 1.05 ? trials : 0;
  out.pass = trials > 0 && out.worst > 1.05;
  std::ostringstream detail;
  detail << "kron " << s.a1 << "x" << s.a2 << " (x) " << s.b1 << "x" << s.b2 << " params "
         << num_params(kron) << " vs kr " << num_params(kr) << ", lowest trial ratio " << lowest;
  out.detail = detail.str();
  return out;
}

double gradcheck(AdapterKind kind, std::size_t d_out, std::size_t d_in, double h,
                 std::uint64_t seed) {
  AdapterState state = init(gradcheck_config(kind, d_out, d_in), seed);
  // Zero-initialised factors make half of the gradients vanish identically;
  // move every trainable to a random point first.
  RandomStream stream(seed, "verify/gradcheck/" + std::string(to_string(kind)));
  for (auto& [name, p] : state.trainable) p = scaled(random_normal(p.rows(), p.cols(), stream), 0.5);
  const DenseMatrix target = random_normal(d_out, d_in, stream);

  const ParamGrads analytic = backward_delta(state, mse_loss(delta(state), target).grad);
  double worst = 0.0;
  for (std::size_t t = 0; t < state.trainable.size(); ++t) {
    auto p = state.trainable[t].second.data();
    const auto g = analytic[t].second.data();
    double max_diff = 0.0, max_a = 0.0, max_n = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p[k];
      p[k] = saved + h;
      const double up = mse_loss(delta(state), target).loss;
      p[k] = saved - h;
      const double down = mse_loss(delta(state), target).loss;
      p[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      max_diff = std::max(max_diff, std::abs(numeric - g[k]));
      max_a = std::max(max_a, std::abs(g[k]));
      max_n = std::max(max_n, std::abs(numeric));
    }
    const double scale = std::max(max_a, max_n);
    if (scale > 0.0) worst = std::max(worst, max_diff / scale);
  }
  return worst;
}

VerifyOutcome gradcheck_all(std::size_t d_out, std::size_t d_in, double h, double tol,
                            std::uint64_t seed) {
  if (!(h > 0.0 && h < 1e-3)) fail(ErrorCode::kInvalidArgument, "gradcheck: h must lie in (0, 1e-3)");
  VerifyOutcome out;
  out.name = "gradcheck " + shape_text(d_out, d_in);
  out.statistic = "max relative error";
  std::ostringstream detail;
  for (AdapterKind kind : kAllAdapterKinds) {
    const double err = gradcheck(kind, d_out, d_in, h, seed);
    ++out.trials;
    if (err < tol) ++out.passes;
    out.worst = std::max(out.worst, err);
    detail << (out.trials > 1 ? " " : "") << to_string(kind) << "=" << err;
  }
  out.pass = out.passes == out.trials;
  out.detail = detail.str();
  return out;
}

std::string format_outcome(const VerifyOutcome& o) {
  std::ostringstream s;
  s << (o.pass ? "PASS " : "FAIL ") << o.name << ": " << o.passes << "/" << o.trials << ", "
    << o.statistic << " = " << o.worst;
  if (!o.detail.empty()) s << " (" << o.detail << ")";
  return s.str();
}

std::string outcomes_json(const std::vector<VerifyOutcome>& outcomes) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& o : outcomes) {
    out.push_back({{"check", o.name},
                   {"trials", o.trials},
                   {"passes", o.passes},
                   {"statistic", o.statistic},
                   {"worst", o.worst},
                   {"pass", o.pass},
                   {"detail", o.detail}});
  }
  return out.dump(2) + "\n";
}

}  // namespace kra
