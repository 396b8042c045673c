#include "qcons/rate_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qcons/state_evolution.hpp"

namespace qcons {

std::string_view to_string(QuantizerFamily family) {
  switch (family) {
    case QuantizerFamily::ecsq: return "ecsq";
    case QuantizerFamily::dithered_uniform: return "dithered_uniform";
    case QuantizerFamily::fixed_uniform: return "fixed_uniform";
    case QuantizerFamily::vq_proxy: return "vq_proxy";
  }
  return "unknown";
}

QuantizerFamily quantizer_family_from_string(std::string_view name) {
  if (name == "ecsq") return QuantizerFamily::ecsq;
  if (name == "dithered_uniform") return QuantizerFamily::dithered_uniform;
  if (name == "fixed_uniform") return QuantizerFamily::fixed_uniform;
  if (name == "vq_proxy") return QuantizerFamily::vq_proxy;
  throw std::invalid_argument("unknown quantizer family '" + std::string(name) + "'");
}

RdModel RdModel::make(QuantizerFamily family, std::optional<double> r_c,
                      std::optional<double> d_max) {
  RdModel model;
  model.family = family;
  model.r_c = r_c.value_or(default_rate_constant(family));
  model.d_max = d_max.value_or(d_max_from_nonzero_rule(0.01));
  if (!(model.r_c >= 0.0)) throw std::invalid_argument("r_c must be nonnegative");
  if (!(model.d_max > 0.0)) throw std::invalid_argument("d_max must be positive");
  if (family == QuantizerFamily::vq_proxy && model.r_c != 0.0)
    throw std::invalid_argument("vq_proxy requires r_c = 0");
  return model;
}

double ecsq_rate_constant() {
  return 0.5 * std::log2(std::numbers::pi * std::numbers::e / 6.0);
}

double fixed_uniform_rate_constant(double range_multiplier) {
  if (!(range_multiplier > 0)) throw std::invalid_argument("range multiplier must be positive");
  return 0.5 * std::log2(range_multiplier * range_multiplier / 12.0);
}

double default_rate_constant(QuantizerFamily family) {
  switch (family) {
    case QuantizerFamily::ecsq:
    case QuantizerFamily::dithered_uniform: return ecsq_rate_constant();
    case QuantizerFamily::fixed_uniform: return fixed_uniform_rate_constant();
    case QuantizerFamily::vq_proxy: return 0.0;
  }
  return 0.0;
}

double d_max_from_nonzero_rule(double p_nonzero) {
  if (!(p_nonzero > 0.0 && p_nonzero < 1.0))
    throw std::invalid_argument("p_nonzero must lie in (0, 1)");
  // P(|v| > x) = erfc(x / sqrt 2) for v ~ N(0,1); decreasing in x.
  double lo = 0.0;
  double hi = 40.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::numbers::sqrt2) > p_nonzero)
      lo = mid;
    else
      hi = mid;
  }
  const double half_step = 0.5 * (lo + hi);
  const double step = 2.0 * half_step;
  return step * step / 12.0;
}

double rate_of(double r_c, double variance, double distortion) {
  if (!(variance > 0.0) || !(distortion > 0.0))
    throw std::invalid_argument("rate_of: variance and distortion must be positive");
  const double ratio = variance / distortion;
  const double floor = std::exp2(-2.0 * r_c);
  if (ratio <= floor) return 0.0;
  return 0.5 * std::log2(ratio) + r_c;
}

double rate_of(const RdModel& model, double variance, double distortion) {
  return rate_of(model.r_c, variance, distortion);
}

RateSchedule::RateSchedule(Eigen::MatrixXd rates) : rates_(std::move(rates)) {
  if (rates_.size() > 0 && !(rates_.minCoeff() >= 0.0))
    throw std::invalid_argument("rates must be nonnegative");
}

double aggregate_rate(const RateSchedule& r) { return r.rates().sum(); }

RateSchedule schedule_from_distortions(const RdModel& model, const GgpProblem& problem,
                                       const DistortionSchedule& d) {
  if (d.nodes() != problem.m || d.horizon() != problem.horizon || d.mode() != problem.mode)
    throw std::invalid_argument("distortion schedule does not match the problem");
  const Vector vars = d.variables();
  const Vector var = problem.variances(vars);
  Eigen::MatrixXd rates(static_cast<Eigen::Index>(problem.m),
                        static_cast<Eigen::Index>(problem.horizon));
  for (std::size_t t = 0; t < problem.horizon; ++t)
    for (std::size_t i = 0; i < problem.m; ++i)
      rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
          rate_of(model, var(static_cast<Eigen::Index>(problem.slot(i, t))), d.at(i, t));
  return RateSchedule(std::move(rates));
}

}  // namespace qcons
