#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace qcons {

class GgpProblem;
class DistortionSchedule;

enum class QuantizerFamily { ecsq, dithered_uniform, fixed_uniform, vq_proxy };

std::string_view to_string(QuantizerFamily family);
QuantizerFamily quantizer_family_from_string(std::string_view name);

/// Operational rate-distortion model
///   R(sigma2, D) = 0.5 log2 max(sigma2 / D, 2^(-2 r_c)) + r_c
/// with distortions capped at d_max times the source variance.
struct RdModel {
  QuantizerFamily family = QuantizerFamily::ecsq;
  double r_c = 0.0;    // bits
  double d_max = 1.0;  // normalized to the source variance

  /// Fills unset fields with the family defaults (r_c from
  /// default_rate_constant, d_max from the 1% nonzero rule). Throws
  /// std::invalid_argument for r_c < 0, d_max <= 0, or a nonzero r_c on
  /// vq_proxy.
  static RdModel make(QuantizerFamily family, std::optional<double> r_c = std::nullopt,
                      std::optional<double> d_max = std::nullopt);

  bool operator==(const RdModel&) const = default;
};

/// 0.5 log2(pi e / 6): high-rate gap of entropy-coded uniform scalar
/// quantization to the Gaussian RD bound.
double ecsq_rate_constant();

/// 0.5 log2(k^2 / 12) for a fixed-rate uniform quantizer whose range spans
/// k standard deviations.
double fixed_uniform_rate_constant(double range_multiplier = 12.0);

double default_rate_constant(QuantizerFamily family);

/// Normalized D_max such that a midtread quantizer on a unit-variance
/// Gaussian emits a nonzero index with probability `p_nonzero`.
double d_max_from_nonzero_rule(double p_nonzero);

double rate_of(double r_c, double variance, double distortion);
double rate_of(const RdModel& model, double variance, double distortion);

/// Per-node, per-iteration rates R_i(t) in bits per symbol (m x T).
class RateSchedule {
 public:
  explicit RateSchedule(Eigen::MatrixXd rates);

  const Eigen::MatrixXd& rates() const noexcept { return rates_; }
  std::size_t nodes() const noexcept { return static_cast<std::size_t>(rates_.rows()); }
  std::size_t horizon() const noexcept { return static_cast<std::size_t>(rates_.cols()); }
  double operator()(std::size_t i, std::size_t t) const { return rates_(i, t); }

 private:
  Eigen::MatrixXd rates_;
};

double aggregate_rate(const RateSchedule& r);

/// R_i(t) = rate_of(model, sigma_i^2(d,t), D_i(t)) with variances taken from
/// the problem's affine forms. Requires strictly positive d.
RateSchedule schedule_from_distortions(const RdModel& model, const GgpProblem& problem,
                                       const DistortionSchedule& d);

}  // namespace qcons
