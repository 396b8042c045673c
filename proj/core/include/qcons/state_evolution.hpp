#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcons/graph.hpp"
#include "qcons/rate_model.hpp"

namespace qcons {

/// Joint mean and covariance of the node states z(t) and the estimation
/// errors e(t) = (I - J) z(t).
struct MomentState {
  std::size_t t = 0;
  Vector mu_z;
  Matrix sigma_z;
  Vector mu_e;
  Matrix sigma_e;
};

/// Moments of z(0). The experiment family is a common signal plus
/// independent per-node noise.
struct InitialMoments {
  Vector mean;
  Matrix covariance;

  /// mu = 0, Sigma = sigma_x2 * 11^T + sigma_n2 * I.
  static InitialMoments signal_plus_noise(std::size_t m, double sigma_x2, double sigma_n2);
};

enum class DistortionMode { per_node, constant };

/// Distortions D_i(t) for t in 0..T-1. In constant mode all nodes share D(t).
///
/// The variable vector used by the optimizer is ordered t-major: index
/// t*m + i in per_node mode and t in constant mode.
class DistortionSchedule {
 public:
  static DistortionSchedule per_node(Matrix values);
  static DistortionSchedule constant(std::size_t m, Vector values);
  static DistortionSchedule zeros(std::size_t m, std::size_t horizon);
  static DistortionSchedule from_variables(DistortionMode mode, std::size_t m,
                                           std::size_t horizon, const Vector& vars);

  DistortionMode mode() const noexcept { return mode_; }
  std::size_t nodes() const noexcept { return m_; }
  std::size_t horizon() const noexcept { return horizon_; }

  double at(std::size_t i, std::size_t t) const;
  /// m x T matrix of D_i(t).
  Matrix expanded() const;
  Vector variables() const;

 private:
  DistortionSchedule(DistortionMode mode, std::size_t m, std::size_t horizon, Matrix values);

  DistortionMode mode_;
  std::size_t m_;
  std::size_t horizon_;
  Matrix values_;  // m x T or 1 x T
};

MomentState initial_state(const InitialMoments& initial);

/// Exact moment recursion under the additive quantization-noise model:
///   mu_z(t+1)    = W mu_z(t)
///   Sigma_z(t+1) = W Sigma_z(t) W + (W - I) diag(D(t)) (W - I)
///   mu_e(t+1)    = C W mu_e(t)
///   Sigma_e(t+1) = C (W Sigma_e(t) W + (W - I) diag(D(t)) (W - I)) C
/// with C = I - J. The error moments are propagated directly rather than
/// projected from Sigma_z, which would cancel catastrophically near consensus.
/// Returns states for t = 0..horizon. Throws std::invalid_argument on
/// dimension mismatch or negative distortions, NumericalError if a
/// covariance leaves the PSD cone by more than 1e-10 of its scale.
std::vector<MomentState> propagate(const WeightMatrix& w, const InitialMoments& initial,
                                   const DistortionSchedule& d, std::size_t horizon);

double marginal_variance(const MomentState& state, std::size_t i);
double node_mse(const MomentState& state, std::size_t i);
double network_mse(const MomentState& state);

/// Network MSE of undistorted consensus after t iterations.
double lossless_mse(const WeightMatrix& w, const InitialMoments& initial, std::size_t t);

/// 10 log10(mse / lossless); nullopt when lossless == 0 (EMSE undefined).
std::optional<double> emse_db(double mse, double lossless);

/// Smallest T with lossless_mse(T) < target. Throws InfeasibleError when no
/// T <= cap qualifies; cap defaults to 10 m.
std::size_t t_min(const WeightMatrix& w, const InitialMoments& initial, double mse_target,
                  std::optional<std::size_t> cap = std::nullopt);

/// Variances and MSEs as nonnegative-affine functions of the distortion
/// variables. Slot (i,t) is row t*m + i of var_coef; columns index the
/// optimizer variables (see DistortionSchedule).
class GgpProblem {
 public:
  DistortionMode mode = DistortionMode::per_node;
  std::size_t m = 0;
  std::size_t horizon = 0;
  RdModel model;

  Matrix var_const;       // m x T, lossless variance c0[i,t]
  Matrix var_coef;        // (m T) x n_vars
  double mse_const = 0;   // lossless network MSE at T
  Vector mse_coef;        // n_vars
  Vector node_mse_const;  // m
  Matrix node_mse_coef;   // m x n_vars

  std::size_t num_variables() const noexcept { return static_cast<std::size_t>(mse_coef.size()); }
  std::size_t num_slots() const noexcept { return m * horizon; }
  std::size_t variable_of(std::size_t i, std::size_t t) const noexcept {
    return mode == DistortionMode::per_node ? t * m + i : t;
  }
  std::size_t slot(std::size_t i, std::size_t t) const noexcept { return t * m + i; }

  /// sigma_i^2(d,t) for every slot, ordered like var_coef rows.
  Vector variances(const Vector& vars) const;
  double mse(const Vector& vars) const;
  Vector node_mses(const Vector& vars) const;

  /// Conservative distortion caps d_max * c0[i,t]; in constant mode the
  /// minimum over nodes.
  Vector upper_bounds() const;
};

GgpProblem extract_ggp(const WeightMatrix& w, const InitialMoments& initial, std::size_t horizon,
                       const RdModel& model, DistortionMode mode);

nlohmann::json to_json(const MomentState& state);
nlohmann::json to_json(const GgpProblem& problem);

}  // namespace qcons
