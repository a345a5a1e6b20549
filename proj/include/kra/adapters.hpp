#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kra/matrix.hpp"

namespace kra {

enum class AdapterKind { kKRAdapter, kLoRA, kSinLoRA, kKronA, kRandLoRA };

inline constexpr std::array<AdapterKind, 5> kAllAdapterKinds = {
    AdapterKind::kKRAdapter, AdapterKind::kLoRA, AdapterKind::kSinLoRA, AdapterKind::kKronA,
    AdapterKind::kRandLoRA};

std::string_view to_string(AdapterKind kind);
// Accepts the lowercase serialised names; throws InvalidConfig otherwise.
AdapterKind parse_adapter_kind(std::string_view name);

inline constexpr double kLayerAlpha = 0.1;
inline constexpr double kApproxAlpha = 1.0;
inline constexpr double kDefaultSinOmega = 200.0;
inline constexpr std::size_t kDefaultRandRank = 13;

// Factor shapes of one Kronecker term: A is a1 x a2, B is b1 x b2.
struct KronShape {
  std::size_t a1 = 0, a2 = 0, b1 = 0, b2 = 0;
  friend bool operator==(const KronShape&, const KronShape&) = default;
};

struct AdapterConfig {
  AdapterKind kind = AdapterKind::kKRAdapter;
  std::size_t d_out = 0;
  std::size_t d_in = 0;
  double alpha = kApproxAlpha;
  // lora / sinlora rank, randlora basis rank.
  std::size_t rank = 0;
  // sinlora frequency and post-sine scale (0 means "use rank").
  double omega = kDefaultSinOmega;
  double sine_scale = 0.0;
  // krona factor shapes and term count.
  KronShape kron{};
  std::size_t terms = 1;
  // randlora basis count.
  std::size_t bases = 0;
  // kradapter factor heights (0 means derived from the shape).
  std::size_t k1 = 0, k2 = 0;

  friend bool operator==(const AdapterConfig&, const AdapterConfig&) = default;
};

// Throws InvalidConfig when an invariant of the kind is violated.
void validate(const AdapterConfig& config);

// One-line `key=value` summary, used in manifests and reports.
std::string describe(const AdapterConfig& config);

using NamedMatrices = std::vector<std::pair<std::string, DenseMatrix>>;

struct AdapterState {
  AdapterConfig config;
  NamedMatrices trainable;
  NamedMatrices fixed_bases;
  std::uint64_t seed = 0;

  DenseMatrix& param(std::string_view name);
  const DenseMatrix& param(std::string_view name) const;
  const DenseMatrix& basis(std::string_view name) const;
};

using ParamGrads = NamedMatrices;

// KRAdapter factor heights for an output dimension: k1 = floor(sqrt(d)),
// k2 = ceil(d / k1).
std::pair<std::size_t, std::size_t> kr_shape(std::size_t d_out);

// Kaiming-uniform bound sqrt(6 / ((1 + a^2) * fan)).
double kaiming_bound(double slope, std::size_t fan);

// KRAdapter builds on the tall orientation: rows = max(d_out, d_in).
bool kr_transposed(const AdapterConfig& config) noexcept;

AdapterConfig default_config(AdapterKind kind, std::size_t d_out, std::size_t d_in);

AdapterState init(const AdapterConfig& config, std::uint64_t seed);

// The d_out x d_in weight update generated by the state.
DenseMatrix delta(const AdapterState& state);

// Gradients of the loss w.r.t. every trainable tensor given dL/d(delta).
ParamGrads backward_delta(const AdapterState& state, const DenseMatrix& grad_delta);

// (W0 + delta) * X.
DenseMatrix forward(const AdapterState& state, const DenseMatrix& w0, const DenseMatrix& x);

std::size_t num_params(const AdapterConfig& config);

// Smallest configuration of `kind` whose parameter count reaches `budget`.
AdapterConfig match_budget(AdapterKind kind, std::size_t d_out, std::size_t d_in,
                           std::size_t budget);

// Single Kronecker factorisation (terms = 1) with the smallest count >= budget;
// ties broken towards the largest attainable rank.
AdapterConfig kron_pair_for_budget(std::size_t d_out, std::size_t d_in, std::size_t budget);

}  // namespace kra
