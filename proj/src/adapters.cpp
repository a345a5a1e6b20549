#include "kra/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kra/error.hpp"
#include "kra/linalg.hpp"
#include "kra/random.hpp"

namespace kra {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::size_t largest_divisor_at_most_sqrt(std::size_t n) {
  std::size_t best = 1;
  for (std::size_t d = 1; d * d <= n; ++d) {
    if (n % d == 0) best = d;
  }
  return best;
}

double sine_divisor(const AdapterConfig& c) {
  return c.sine_scale > 0.0 ? c.sine_scale : static_cast<double>(c.rank);
}

// Resolved KRAdapter factor heights for the tall orientation.
std::pair<std::size_t, std::size_t> kr_factors(const AdapterConfig& c) {
  const std::size_t rows = std::max(c.d_out, c.d_in);
  if (c.k1 == 0 && c.k2 == 0) return kr_shape(rows);
  const std::size_t k1 = c.k1 != 0 ? c.k1 : ceil_div(rows, c.k2);
  const std::size_t k2 = c.k2 != 0 ? c.k2 : ceil_div(rows, k1);
  return {k1, k2};
}

RandomStream tensor_stream(const AdapterConfig& c, std::uint64_t seed, std::string_view tensor) {
  std::string name = "adapter/";
  name += to_string(c.kind);
  name += '/';
  name += tensor;
  return RandomStream(seed, name);
}

DenseMatrix kaiming_uniform(std::size_t rows, std::size_t cols, double slope, RandomStream& stream) {
  const double bound = kaiming_bound(slope, cols);
  return random_uniform(rows, cols, -bound, bound, stream);
}

void require_valid_grad(const AdapterConfig& c, const DenseMatrix& g) {
  if (g.rows() != c.d_out || g.cols() != c.d_in) {
    fail(ErrorCode::kShapeMismatch, "backward_delta: upstream gradient must be " +
                                        std::to_string(c.d_out) + "x" + std::to_string(c.d_in));
  }
}

// ---- KronA helpers: the Kronecker sum is a rank-`terms` product in the
// rearranged (a1*a2) x (b1*b2) space.

// A stacked (terms*a1 x a2) -> (a1*a2 x terms).
DenseMatrix kron_left_flat(const DenseMatrix& a_stack, const KronShape& s, std::size_t terms) {
  DenseMatrix out(s.a1 * s.a2, terms);
  for (std::size_t t = 0; t < terms; ++t) {
    for (std::size_t i = 0; i < s.a1; ++i) {
      for (std::size_t j = 0; j < s.a2; ++j) out(i * s.a2 + j, t) = a_stack(t * s.a1 + i, j);
    }
  }
  return out;
}

// B stacked (terms*b1 x b2) -> (terms x b1*b2); same memory order.
DenseMatrix kron_right_flat(const DenseMatrix& b_stack, const KronShape& s, std::size_t terms) {
  DenseMatrix out(terms, s.b1 * s.b2);
  std::copy(b_stack.data().begin(), b_stack.data().end(), out.data().begin());
  return out;
}

// Rearranged (a1*a2 x b1*b2) <-> full (a1*b1 x a2*b2).
DenseMatrix kron_unflatten(const DenseMatrix& flat, const KronShape& s, double factor) {
  DenseMatrix out(s.a1 * s.b1, s.a2 * s.b2);
  for (std::size_t i = 0; i < s.a1; ++i) {
    for (std::size_t j = 0; j < s.a2; ++j) {
      const double* src = flat.row(i * s.a2 + j).data();
      for (std::size_t p = 0; p < s.b1; ++p) {
        double* dst = out.row(i * s.b1 + p).data() + j * s.b2;
        const double* srow = src + p * s.b2;
        for (std::size_t q = 0; q < s.b2; ++q) dst[q] = factor * srow[q];
      }
    }
  }
  return out;
}

DenseMatrix kron_flatten(const DenseMatrix& full, const KronShape& s) {
  DenseMatrix out(s.a1 * s.a2, s.b1 * s.b2);
  for (std::size_t i = 0; i < s.a1; ++i) {
    for (std::size_t j = 0; j < s.a2; ++j) {
      double* dst = out.row(i * s.a2 + j).data();
      for (std::size_t p = 0; p < s.b1; ++p) {
        const double* src = full.row(i * s.b1 + p).data() + j * s.b2;
        std::copy(src, src + s.b2, dst + p * s.b2);
      }
    }
  }
  return out;
}

// ---- RandLoRA helper: C((n, k), j) = lambda(n, k) * A(k, j) * gamma(n, j).
DenseMatrix rand_mixing(const DenseMatrix& lambda, const DenseMatrix& a, const DenseMatrix& gamma) {
  const std::size_t bases = lambda.rows();
  const std::size_t rank = lambda.cols();
  const std::size_t cols = a.cols();
  DenseMatrix c(bases * rank, cols);
  for (std::size_t n = 0; n < bases; ++n) {
    const double* g = gamma.row(n).data();
    for (std::size_t k = 0; k < rank; ++k) {
      const double l = lambda(n, k);
      const double* arow = a.row(k).data();
      double* dst = c.row(n * rank + k).data();
#pragma omp simd
      for (std::size_t j = 0; j < cols; ++j) dst[j] = l * arow[j] * g[j];
    }
  }
  return c;
}

}  // namespace

std::string_view to_string(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::kKRAdapter: return "kradapter";
    case AdapterKind::kLoRA: return "lora";
    case AdapterKind::kSinLoRA: return "sinlora";
    case AdapterKind::kKronA: return "krona";
    case AdapterKind::kRandLoRA: return "randlora";
  }
  return "unknown";
}

AdapterKind parse_adapter_kind(std::string_view name) {
  for (AdapterKind kind : kAllAdapterKinds) {
    if (to_string(kind) == name) return kind;
  }
  fail(ErrorCode::kInvalidConfig, "unknown adapter '" + std::string(name) +
                                      "' (expected kradapter, lora, sinlora, krona or randlora)");
}

DenseMatrix& AdapterState::param(std::string_view name) {
  for (auto& [key, value] : trainable) {
    if (key == name) return value;
  }
  fail(ErrorCode::kInvalidArgument, "no trainable tensor named " + std::string(name));
}

const DenseMatrix& AdapterState::param(std::string_view name) const {
  return const_cast<AdapterState*>(this)->param(name);
}

const DenseMatrix& AdapterState::basis(std::string_view name) const {
  for (const auto& [key, value] : fixed_bases) {
    if (key == name) return value;
  }
  fail(ErrorCode::kInvalidArgument, "no fixed basis named " + std::string(name));
}

std::pair<std::size_t, std::size_t> kr_shape(std::size_t d_out) {
  if (d_out == 0) fail(ErrorCode::kInvalidConfig, "kr_shape: d_out must be positive");
  std::size_t k1 = static_cast<std::size_t>(std::sqrt(static_cast<double>(d_out)));
  while (k1 * k1 > d_out) --k1;
  while ((k1 + 1) * (k1 + 1) <= d_out) ++k1;
  return {k1, ceil_div(d_out, k1)};
}

double kaiming_bound(double slope, std::size_t fan) {
  return std::sqrt(6.0 / ((1.0 + slope * slope) * static_cast<double>(fan)));
}

bool kr_transposed(const AdapterConfig& config) noexcept {
  return config.kind == AdapterKind::kKRAdapter && config.d_out < config.d_in;
}

void validate(const AdapterConfig& c) {
  auto invalid = [&](const std::string& why) {
    fail(ErrorCode::kInvalidConfig, std::string(to_string(c.kind)) + ": " + why);
  };
  if (c.d_out == 0 || c.d_in == 0) invalid("d_out and d_in must be positive");
  if (!std::isfinite(c.alpha)) invalid("alpha must be finite");
  switch (c.kind) {
    case AdapterKind::kKRAdapter: {
      const auto [k1, k2] = kr_factors(c);
      if (k1 == 0 || k2 == 0) invalid("k1 and k2 must be positive");
      if (k1 * k2 < std::max(c.d_out, c.d_in)) invalid("k1 * k2 must cover the output dimension");
      break;
    }
    case AdapterKind::kSinLoRA:
      if (!std::isfinite(c.omega) || c.omega == 0.0) invalid("omega must be finite and nonzero");
      if (!std::isfinite(c.sine_scale) || c.sine_scale < 0.0) invalid("sine scale must be >= 0");
      [[fallthrough]];
    case AdapterKind::kLoRA:
      if (c.rank < 1 || c.rank > std::min(c.d_out, c.d_in)) {
        invalid("rank must lie in [1, min(d_out, d_in)]");
      }
      break;
    case AdapterKind::kKronA:
      if (c.kron.a1 == 0 || c.kron.a2 == 0 || c.kron.b1 == 0 || c.kron.b2 == 0) {
        invalid("factor shapes must be positive");
      }
      if (c.kron.a1 * c.kron.b1 != c.d_out || c.kron.a2 * c.kron.b2 != c.d_in) {
        invalid("a1*b1 must equal d_out and a2*b2 must equal d_in");
      }
      if (c.terms == 0) invalid("term count must be positive");
      break;
    case AdapterKind::kRandLoRA:
      if (c.rank == 0 || c.bases == 0) invalid("basis rank and basis count must be positive");
      break;
  }
}

std::string describe(const AdapterConfig& c) {
  std::ostringstream out;
  out << "kind=" << to_string(c.kind) << " d_out=" << c.d_out << " d_in=" << c.d_in
      << " alpha=" << c.alpha;
  switch (c.kind) {
    case AdapterKind::kKRAdapter: {
      const auto [k1, k2] = kr_factors(c);
      out << " k1=" << k1 << " k2=" << k2 << " transposed=" << (kr_transposed(c) ? 1 : 0);
      break;
    }
    case AdapterKind::kLoRA: out << " rank=" << c.rank; break;
    case AdapterKind::kSinLoRA:
      out << " rank=" << c.rank << " omega=" << c.omega << " scale=" << sine_divisor(c);
      break;
    case AdapterKind::kKronA:
      out << " a=" << c.kron.a1 << "x" << c.kron.a2 << " b=" << c.kron.b1 << "x" << c.kron.b2
          << " terms=" << c.terms;
      break;
    case AdapterKind::kRandLoRA: out << " rank=" << c.rank << " bases=" << c.bases; break;
  }
  out << " params=" << num_params(c);
  return out.str();
}

AdapterConfig default_config(AdapterKind kind, std::size_t d_out, std::size_t d_in) {
  AdapterConfig c;
  c.kind = kind;
  c.d_out = d_out;
  c.d_in = d_in;
  const std::size_t small = std::min(d_out, d_in);
  switch (kind) {
    case AdapterKind::kKRAdapter: break;
    case AdapterKind::kLoRA:
    case AdapterKind::kSinLoRA: c.rank = std::min<std::size_t>(16, small); break;
    case AdapterKind::kKronA: {
      const std::size_t a1 = largest_divisor_at_most_sqrt(d_out);
      const std::size_t a2 = largest_divisor_at_most_sqrt(d_in);
      c.kron = {a1, a2, d_out / a1, d_in / a2};
      c.terms = 1;
      break;
    }
    case AdapterKind::kRandLoRA:
      c.rank = std::min(kDefaultRandRank, small);
      c.bases = ceil_div(small, c.rank);
      break;
  }
  validate(c);
  return c;
}

std::size_t num_params(const AdapterConfig& c) {
  switch (c.kind) {
    case AdapterKind::kKRAdapter: {
      const auto [k1, k2] = kr_factors(c);
      return std::min(c.d_out, c.d_in) * (k1 + k2);
    }
    case AdapterKind::kLoRA:
    case AdapterKind::kSinLoRA: return c.rank * (c.d_in + c.d_out);
    case AdapterKind::kKronA: return c.terms * (c.kron.a1 * c.kron.a2 + c.kron.b1 * c.kron.b2);
    case AdapterKind::kRandLoRA: return c.bases * (c.rank + c.d_in);
  }
  return 0;
}

AdapterConfig match_budget(AdapterKind kind, std::size_t d_out, std::size_t d_in,
                           std::size_t budget) {
  AdapterConfig c = default_config(kind, d_out, d_in);
  auto unreachable = [&] {
    fail(ErrorCode::kUnreachable, std::string(to_string(kind)) + " cannot reach " +
                                      std::to_string(budget) + " parameters at " +
                                      std::to_string(d_out) + "x" + std::to_string(d_in));
  };
  switch (kind) {
    case AdapterKind::kKRAdapter:
      if (num_params(c) < budget) unreachable();
      break;
    case AdapterKind::kLoRA:
    case AdapterKind::kSinLoRA:
      c.rank = std::max<std::size_t>(1, ceil_div(budget, d_in + d_out));
      if (c.rank > std::min(d_out, d_in)) unreachable();
      break;
    case AdapterKind::kKronA: {
      const std::size_t per_term = c.kron.a1 * c.kron.a2 + c.kron.b1 * c.kron.b2;
      c.terms = std::max<std::size_t>(1, ceil_div(budget, per_term));
      if (c.terms > std::min(c.kron.a1 * c.kron.a2, c.kron.b1 * c.kron.b2)) unreachable();
      break;
    }
    case AdapterKind::kRandLoRA:
      c.bases = std::max<std::size_t>(1, ceil_div(budget, c.rank + d_in));
      break;
  }
  validate(c);
  return c;
}

AdapterConfig kron_pair_for_budget(std::size_t d_out, std::size_t d_in, std::size_t budget) {
  std::optional<AdapterConfig> best;
  std::size_t best_count = 0;
  std::size_t best_rank = 0;
  for (std::size_t a1 = d_out; a1 >= 1; --a1) {
    if (d_out % a1 != 0) continue;
    for (std::size_t a2 = 1; a2 <= d_in; ++a2) {
      if (d_in % a2 != 0) continue;
      const KronShape s{a1, a2, d_out / a1, d_in / a2};
      const std::size_t count = s.a1 * s.a2 + s.b1 * s.b2;
      if (count < budget) continue;
      const std::size_t rank = std::min(s.a1, s.a2) * std::min(s.b1, s.b2);
      if (!best || count < best_count || (count == best_count && rank > best_rank)) {
        AdapterConfig c;
        c.kind = AdapterKind::kKronA;
        c.d_out = d_out;
        c.d_in = d_in;
        c.kron = s;
        c.terms = 1;
        best = c;
        best_count = count;
        best_rank = rank;
      }
    }
  }
  if (!best) {
    fail(ErrorCode::kUnreachable, "no single Kronecker factorisation reaches " +
                                      std::to_string(budget) + " parameters");
  }
  return *best;
}

AdapterState init(const AdapterConfig& config, std::uint64_t seed) {
  validate(config);
  AdapterState state;
  state.config = config;
  state.seed = seed;
  const auto& c = config;
  switch (c.kind) {
    case AdapterKind::kKRAdapter: {
      const auto [k1, k2] = kr_factors(c);
      const std::size_t cols = std::min(c.d_out, c.d_in);
      auto stream = tensor_stream(c, seed, "V");
      const double slope = std::sqrt(1.0 / static_cast<double>(k1));
      state.trainable.emplace_back("U", DenseMatrix(k1, cols));
      state.trainable.emplace_back("V", kaiming_uniform(k2, cols, slope, stream));
      break;
    }
    case AdapterKind::kLoRA:
    case AdapterKind::kSinLoRA: {
      auto stream = tensor_stream(c, seed, "A");
      state.trainable.emplace_back("A", kaiming_uniform(c.rank, c.d_in, std::sqrt(5.0), stream));
      state.trainable.emplace_back("B", DenseMatrix(c.d_out, c.rank));
      break;
    }
    case AdapterKind::kKronA: {
      auto stream = tensor_stream(c, seed, "B");
      state.trainable.emplace_back("A", DenseMatrix(c.terms * c.kron.a1, c.kron.a2));
      state.trainable.emplace_back(
          "B", kaiming_uniform(c.terms * c.kron.b1, c.kron.b2, std::sqrt(5.0), stream));
      break;
    }
    case AdapterKind::kRandLoRA: {
      auto b_stream = tensor_stream(c, seed, "bases/B");
      auto a_stream = tensor_stream(c, seed, "bases/A");
      state.fixed_bases.emplace_back("B", random_normal(c.d_out, c.bases * c.rank, b_stream));
      state.fixed_bases.emplace_back("A", random_normal(c.rank, c.d_in, a_stream));
      state.trainable.emplace_back("lambda", DenseMatrix(c.bases, c.rank));
      state.trainable.emplace_back(
          "gamma", DenseMatrix(c.bases, c.d_in, 1.0 / static_cast<double>(c.bases)));
      break;
    }
  }
  return state;
}

DenseMatrix delta(const AdapterState& state) {
  const auto& c = state.config;
  switch (c.kind) {
    case AdapterKind::kKRAdapter: {
      const DenseMatrix& u = state.param("U");
      const DenseMatrix& v = state.param("V");
      const std::size_t rows = std::max(c.d_out, c.d_in);
      const std::size_t cols = u.cols();
      const std::size_t k2 = v.rows();
      DenseMatrix out(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* urow = u.row(r / k2).data();
        const double* vrow = v.row(r % k2).data();
        double* dst = out.row(r).data();
#pragma omp simd
        for (std::size_t j = 0; j < cols; ++j) dst[j] = c.alpha * (urow[j] * vrow[j]);
      }
      return kr_transposed(c) ? transpose(out) : out;
    }
    case AdapterKind::kLoRA: {
      DenseMatrix out = matmul(state.param("B"), state.param("A"));
      scale_in_place(out, c.alpha);
      return out;
    }
    case AdapterKind::kSinLoRA: {
      DenseMatrix out = matmul(state.param("B"), state.param("A"));
      const double factor = c.alpha / sine_divisor(c);
      for (double& x : out.data()) x = factor * std::sin(c.omega * x);
      return out;
    }
    case AdapterKind::kKronA: {
      const DenseMatrix left = kron_left_flat(state.param("A"), c.kron, c.terms);
      const DenseMatrix right = kron_right_flat(state.param("B"), c.kron, c.terms);
      return kron_unflatten(matmul(left, right), c.kron, c.alpha);
    }
    case AdapterKind::kRandLoRA: {
      const DenseMatrix mix =
          rand_mixing(state.param("lambda"), state.basis("A"), state.param("gamma"));
      DenseMatrix out = matmul(state.basis("B"), mix);
      scale_in_place(out, c.alpha);
      return out;
    }
  }
  return {};
}

ParamGrads backward_delta(const AdapterState& state, const DenseMatrix& grad_delta) {
  const auto& c = state.config;
  require_valid_grad(c, grad_delta);
  ParamGrads grads;
  switch (c.kind) {
    case AdapterKind::kKRAdapter: {
      const DenseMatrix& u = state.param("U");
      const DenseMatrix& v = state.param("V");
      const DenseMatrix g = kr_transposed(c) ? transpose(grad_delta) : grad_delta;
      const std::size_t rows = g.rows();
      const std::size_t cols = g.cols();
      const std::size_t k2 = v.rows();
      DenseMatrix gu(u.rows(), cols);
      DenseMatrix gv(v.rows(), cols);
      // Rows of U (.) V past `rows` were truncated and receive no gradient.
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = r / k2;
        const std::size_t b = r % k2;
        const double* grow = g.row(r).data();
        const double* urow = u.row(i).data();
        const double* vrow = v.row(b).data();
        double* gurow = gu.row(i).data();
        double* gvrow = gv.row(b).data();
#pragma omp simd
        for (std::size_t j = 0; j < cols; ++j) {
          gurow[j] += c.alpha * grow[j] * vrow[j];
          gvrow[j] += c.alpha * grow[j] * urow[j];
        }
      }
      grads.emplace_back("U", std::move(gu));
      grads.emplace_back("V", std::move(gv));
      break;
    }
    case AdapterKind::kLoRA:
    case AdapterKind::kSinLoRA: {
      const DenseMatrix& a = state.param("A");
      const DenseMatrix& b = state.param("B");
      DenseMatrix upstream;
      if (c.kind == AdapterKind::kSinLoRA) {
        upstream = matmul(b, a);
        const double factor = c.alpha / sine_divisor(c) * c.omega;
        auto gd = grad_delta.data();
        auto ud = upstream.data();
        for (std::size_t k = 0; k < ud.size(); ++k) ud[k] = gd[k] * factor * std::cos(c.omega * ud[k]);
      } else {
        upstream = scaled(grad_delta, c.alpha);
      }
      grads.emplace_back("A", matmul_tn(b, upstream));
      grads.emplace_back("B", matmul_nt(upstream, a));
      break;
    }
    case AdapterKind::kKronA: {
      const DenseMatrix left = kron_left_flat(state.param("A"), c.kron, c.terms);
      const DenseMatrix right = kron_right_flat(state.param("B"), c.kron, c.terms);
      DenseMatrix g = kron_flatten(grad_delta, c.kron);
      scale_in_place(g, c.alpha);
      const DenseMatrix g_left = matmul_nt(g, right);   // (a1*a2) x terms
      const DenseMatrix g_right = matmul_tn(left, g);   // terms x (b1*b2)
      DenseMatrix ga(c.terms * c.kron.a1, c.kron.a2);
      for (std::size_t t = 0; t < c.terms; ++t) {
        for (std::size_t i = 0; i < c.kron.a1; ++i) {
          for (std::size_t j = 0; j < c.kron.a2; ++j) ga(t * c.kron.a1 + i, j) = g_left(i * c.kron.a2 + j, t);
        }
      }
      DenseMatrix gb(c.terms * c.kron.b1, c.kron.b2);
      std::copy(g_right.data().begin(), g_right.data().end(), gb.data().begin());
      grads.emplace_back("A", std::move(ga));
      grads.emplace_back("B", std::move(gb));
      break;
    }
    case AdapterKind::kRandLoRA: {
      const DenseMatrix& lambda = state.param("lambda");
      const DenseMatrix& gamma = state.param("gamma");
      const DenseMatrix& a = state.basis("A");
      DenseMatrix h = matmul_tn(state.basis("B"), grad_delta);  // (bases*rank) x d_in
      scale_in_place(h, c.alpha);
      DenseMatrix g_lambda(c.bases, c.rank);
      DenseMatrix g_gamma(c.bases, c.d_in);
      const std::size_t cols = c.d_in;
      for (std::size_t n = 0; n < c.bases; ++n) {
        const double* gam = gamma.row(n).data();
        double* gg = g_gamma.row(n).data();
        for (std::size_t k = 0; k < c.rank; ++k) {
          const double* hrow = h.row(n * c.rank + k).data();
          const double* arow = a.row(k).data();
          const double lam = lambda(n, k);
          double acc = 0.0;
#pragma omp simd reduction(+ : acc)
          for (std::size_t j = 0; j < cols; ++j) {
            const double ha = hrow[j] * arow[j];
            acc += ha * gam[j];
            gg[j] += ha * lam;
          }
          g_lambda(n, k) = acc;
        }
      }
      grads.emplace_back("lambda", std::move(g_lambda));
      grads.emplace_back("gamma", std::move(g_gamma));
      break;
    }
  }
  return grads;
}

DenseMatrix forward(const AdapterState& state, const DenseMatrix& w0, const DenseMatrix& x) {
  const auto& c = state.config;
  if (w0.rows() != c.d_out || w0.cols() != c.d_in) {
    fail(ErrorCode::kShapeMismatch, "forward: W0 must be " + std::to_string(c.d_out) + "x" +
                                        std::to_string(c.d_in));
  }
  if (x.rows() != c.d_in) {
    fail(ErrorCode::kShapeMismatch, "forward: X must have " + std::to_string(c.d_in) + " rows");
  }
  return matmul(add(w0, delta(state)), x);
}

}  // namespace kra
