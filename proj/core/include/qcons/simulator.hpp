#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcons/graph.hpp"
#include "qcons/rate_model.hpp"
#include "qcons/state_evolution.hpp"

namespace qcons {

enum class QuantizerKind { fixed_uniform, ecsq_uniform, dithered_uniform, gaussian_noise_proxy };

std::string_view to_string(QuantizerKind kind);
QuantizerKind quantizer_kind_from_string(std::string_view name);
/// Rate model family that describes a quantizer kind.
QuantizerFamily family_of(QuantizerKind kind);

/// Quantizer used by one node at one iteration.
struct SlotQuantizer {
  QuantizerKind kind = QuantizerKind::gaussian_noise_proxy;
  double distortion = 0.0;  // uniform kinds: step = sqrt(12 D); proxy: noise variance
  int rate_bits = 0;        // fixed_uniform: 2^R levels
  double range_multiplier = 12.0;
  double center = 0.0;      // model mean of the node state
  double sigma2 = 0.0;      // model variance of the node state
  bool zero_rate = false;   // transmit `center` (no bits)
  bool lossless = false;    // exact pass-through

  double step() const;
};

class QuantizerSchedule {
 public:
  QuantizerSchedule(std::size_t m, std::size_t horizon, std::vector<SlotQuantizer> slots);

  std::size_t nodes() const noexcept { return m_; }
  std::size_t horizon() const noexcept { return horizon_; }
  const SlotQuantizer& at(std::size_t i, std::size_t t) const { return slots_.at(t * m_ + i); }

 private:
  std::size_t m_;
  std::size_t horizon_;
  std::vector<SlotQuantizer> slots_;
};

/// Builds per-slot quantizers for distortions `d`, using the model moments
/// in `states` (from propagate with the same d) for centers and variances.
/// Slots whose model rate is exactly zero get zero-rate semantics;
/// fixed_uniform uses the smallest integer rate >= max(1, model rate).
QuantizerSchedule make_quantizer_schedule(QuantizerKind kind, const DistortionSchedule& d,
                                          const std::vector<MomentState>& states,
                                          const RdModel& model);

QuantizerSchedule lossless_schedule(std::size_t m, std::size_t horizon);

struct QuantizedBlock {
  std::vector<std::int64_t> indices;
  std::vector<double> values;
};

/// Midtread uniform quantization q = step * round((v + u) / step) - u.
/// `dither` is empty (u = 0) or one shared offset per value (subtractive
/// dither).
QuantizedBlock quantize_uniform(std::span<const double> values, double step,
                                std::span<const double> dither = {});

/// Fixed-rate uniform quantizer with 2^R midrise levels over
/// center +- range_multiplier * sigma / 2; out-of-range inputs saturate.
QuantizedBlock quantize_fixed(std::span<const double> values, int rate_bits, double center,
                              double sigma, double range_multiplier = 12.0);

/// Value transmitted by a zero-rate slot.
double zero_rate_value(const SlotQuantizer& slot);

using IndexHistogram = std::map<std::int64_t, std::uint64_t>;

/// Plug-in entropy in bits. Throws std::invalid_argument when empty.
double empirical_entropy_bits(const IndexHistogram& histogram);
double empirical_entropy_bits(std::span<const std::int64_t> indices);

/// Bits per symbol for one slot: empirical index entropy for entropy-coded
/// kinds, the nominal R for fixed_uniform, and the model rate at `variance`
/// for the Gaussian-noise proxy. Zero for zero-rate and lossless slots.
double empirical_rate(std::span<const std::int64_t> indices, const SlotQuantizer& slot,
                      double r_c, double variance);

struct SignalSpec {
  double sigma_x2 = 1.0;
  double sigma_n2 = 0.5;
  std::size_t length = 1000;  // L, coordinates per state vector
};

struct SimOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double r_c = 0.0;  // rate constant for the proxy's model rate
};

struct SimResult {
  std::vector<double> empirical_mse;  // t = 0..T
  Matrix empirical_rate;              // m x T, bits per symbol
  Matrix empirical_distortion;        // m x T, mean squared quantization error
  Matrix empirical_variance;          // m x T, pooled variance of z_i(t)
  double aggregate_rate_bits = 0.0;
  std::size_t trials = 0;
  std::size_t length = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::size_t, std::size_t>> zero_rate_slots;  // (i, t)
  /// max over trials, iterations and coordinates of
  /// |mean_i z_i(t) - mean_i z_i(0)| / max(1, |mean_i z_i(0)|)
  double max_mean_drift = 0.0;
};

/// Monte-Carlo run of z(t+1) = z(t) + (W - I) Q(z(t)) on vector states of
/// length L with z_i(0) = x + n_i. Results do not depend on `threads`.
SimResult run_consensus(const WeightMatrix& w, const SignalSpec& signal,
                        const QuantizerSchedule& schedule, const SimOptions& options);

nlohmann::json to_json(const SimResult& result);

}  // namespace qcons
