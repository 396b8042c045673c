#include "qcons/state_evolution.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/core.h>

#include "qcons/errors.hpp"

namespace qcons {

namespace {

Matrix centering(std::size_t m) {
  const auto n = static_cast<Eigen::Index>(m);
  return Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(m));
}

void symmetrize(Matrix& a) { a = 0.5 * (a + a.transpose()).eval(); }

void check_psd(const Matrix& sigma, double scale, const char* what, std::size_t t) {
  if (sigma.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  const double lowest = eig.eigenvalues().minCoeff();
  if (lowest < -1e-10 * scale)
    throw NumericalError(std::string(what) + " at t=" + std::to_string(t) +
                         " has eigenvalue " + std::to_string(lowest));
}

void fill_error_moments(MomentState& s, const Matrix& center) {
  s.mu_e = center * s.mu_z;
  s.sigma_e = center * s.sigma_z * center;
  symmetrize(s.sigma_e);
}

// Sigma_e is checked against the scale of Sigma_z: near consensus Sigma_e is
// pure roundoff and its own trace is no meaningful yardstick.
void check_state(const MomentState& s) {
  const double scale = std::max(s.sigma_z.trace(), 0.0);
  check_psd(s.sigma_z, scale, "Sigma_z", s.t);
  check_psd(s.sigma_e, scale, "Sigma_e", s.t);
}

void check_node(const MomentState& s, std::size_t i) {
  if (i >= static_cast<std::size_t>(s.mu_z.size()))
    throw std::out_of_range("node index " + std::to_string(i) + " out of range");
}

std::vector<double> vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::vector<double>> mat(const Matrix& a) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c) rows[static_cast<std::size_t>(r)].push_back(a(r, c));
  return rows;
}

}  // namespace

InitialMoments InitialMoments::signal_plus_noise(std::size_t m, double sigma_x2,
                                                 double sigma_n2) {
  if (m == 0) throw std::invalid_argument("signal_plus_noise: m must be positive");
  if (sigma_x2 < 0 || sigma_n2 < 0)
    throw std::invalid_argument("signal_plus_noise: variances must be nonnegative");
  const auto n = static_cast<Eigen::Index>(m);
  return {Vector::Zero(n),
          Matrix::Constant(n, n, sigma_x2) + sigma_n2 * Matrix::Identity(n, n)};
}

DistortionSchedule::DistortionSchedule(DistortionMode mode, std::size_t m, std::size_t horizon,
                                       Matrix values)
    : mode_(mode), m_(m), horizon_(horizon), values_(std::move(values)) {
  if (m_ == 0) throw std::invalid_argument("distortion schedule needs at least one node");
  if (values_.size() > 0 && values_.minCoeff() < 0.0)
    throw std::invalid_argument("distortions must be nonnegative");
  if (!values_.allFinite()) throw std::invalid_argument("distortions must be finite");
}

DistortionSchedule DistortionSchedule::per_node(Matrix values) {
  const auto m = static_cast<std::size_t>(values.rows());
  const auto horizon = static_cast<std::size_t>(values.cols());
  return DistortionSchedule(DistortionMode::per_node, m, horizon, std::move(values));
}

DistortionSchedule DistortionSchedule::constant(std::size_t m, Vector values) {
  const auto horizon = static_cast<std::size_t>(values.size());
  Matrix row = values.transpose();
  return DistortionSchedule(DistortionMode::constant, m, horizon, std::move(row));
}

DistortionSchedule DistortionSchedule::zeros(std::size_t m, std::size_t horizon) {
  return per_node(Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(horizon)));
}

DistortionSchedule DistortionSchedule::from_variables(DistortionMode mode, std::size_t m,
                                                      std::size_t horizon, const Vector& vars) {
  const auto n = static_cast<Eigen::Index>(m);
  const auto h = static_cast<Eigen::Index>(horizon);
  if (mode == DistortionMode::constant) {
    if (vars.size() != h) throw std::invalid_argument("expected T distortion variables");
    return constant(m, vars);
  }
  if (vars.size() != n * h) throw std::invalid_argument("expected m*T distortion variables");
  // t-major vector -> m x T matrix
  return per_node(Eigen::Map<const Matrix>(vars.data(), n, h));
}

double DistortionSchedule::at(std::size_t i, std::size_t t) const {
  if (i >= m_ || t >= horizon_) throw std::out_of_range("distortion index out of range");
  return mode_ == DistortionMode::constant ? values_(0, static_cast<Eigen::Index>(t))
                                           : values_(static_cast<Eigen::Index>(i),
                                                     static_cast<Eigen::Index>(t));
}

Matrix DistortionSchedule::expanded() const {
  if (mode_ == DistortionMode::per_node) return values_;
  return values_.replicate(static_cast<Eigen::Index>(m_), 1);
}

Vector DistortionSchedule::variables() const {
  if (mode_ == DistortionMode::constant) return values_.row(0).transpose();
  return Eigen::Map<const Vector>(values_.data(), values_.size());
}

MomentState initial_state(const InitialMoments& initial) {
  const auto m = initial.mean.size();
  if (m == 0 || initial.covariance.rows() != m || initial.covariance.cols() != m)
    throw std::invalid_argument("initial moments have inconsistent dimensions");
  MomentState s;
  s.t = 0;
  s.mu_z = initial.mean;
  s.sigma_z = initial.covariance;
  symmetrize(s.sigma_z);
  fill_error_moments(s, centering(static_cast<std::size_t>(m)));
  check_state(s);
  return s;
}

std::vector<MomentState> propagate(const WeightMatrix& w, const InitialMoments& initial,
                                   const DistortionSchedule& d, std::size_t horizon) {
  const std::size_t m = w.size();
  if (static_cast<std::size_t>(initial.mean.size()) != m)
    throw std::invalid_argument("initial moments do not match the weight matrix size");
  if (d.nodes() != m) throw std::invalid_argument("distortion schedule has wrong node count");
  if (d.horizon() < horizon)
    throw std::invalid_argument("distortion schedule shorter than the horizon");

  const Matrix& W = w.matrix();
  const auto n = static_cast<Eigen::Index>(m);
  const Matrix w_minus_i = W - Matrix::Identity(n, n);
  const Matrix center = centering(m);
  const Matrix dist = d.expanded();

  std::vector<MomentState> states;
  states.reserve(horizon + 1);
  states.push_back(initial_state(initial));
  for (std::size_t t = 0; t < horizon; ++t) {
    const MomentState& prev = states.back();
    MomentState next;
    next.t = t + 1;
    next.mu_z = W * prev.mu_z;
    next.sigma_z = W * prev.sigma_z * W +
                   w_minus_i * dist.col(static_cast<Eigen::Index>(t)).asDiagonal() * w_minus_i;
    symmetrize(next.sigma_z);
    // The error moments follow their own recursion (W commutes with J and
    // J (W - I) = 0). Deriving them from Sigma_z instead would cancel
    // catastrophically once the states have nearly reached consensus.
    next.mu_e = center * (W * prev.mu_e);
    const Matrix noise_e = W * prev.sigma_e * W +
                           w_minus_i * dist.col(static_cast<Eigen::Index>(t)).asDiagonal() * w_minus_i;
    next.sigma_e = center * noise_e * center;
    symmetrize(next.sigma_e);
    check_state(next);
    states.push_back(std::move(next));
  }
  return states;
}

double marginal_variance(const MomentState& state, std::size_t i) {
  check_node(state, i);
  const auto k = static_cast<Eigen::Index>(i);
  return state.sigma_z(k, k);
}

double node_mse(const MomentState& state, std::size_t i) {
  check_node(state, i);
  const auto k = static_cast<Eigen::Index>(i);
  return state.sigma_e(k, k) + state.mu_e(k) * state.mu_e(k);
}

double network_mse(const MomentState& state) {
  const auto m = static_cast<double>(state.mu_e.size());
  return (state.sigma_e.trace() + state.mu_e.squaredNorm()) / m;
}

double lossless_mse(const WeightMatrix& w, const InitialMoments& initial, std::size_t t) {
  const auto states = propagate(w, initial, DistortionSchedule::zeros(w.size(), t), t);
  return network_mse(states.back());
}

std::optional<double> emse_db(double mse, double lossless) {
  if (mse < 0 || lossless < 0) throw std::invalid_argument("emse_db: MSE values must be >= 0");
  if (lossless == 0.0) return std::nullopt;
  return 10.0 * std::log10(mse / lossless);
}

std::size_t t_min(const WeightMatrix& w, const InitialMoments& initial, double mse_target,
                  std::optional<std::size_t> cap) {
  if (!(mse_target > 0)) throw std::invalid_argument("t_min: target must be positive");
  const std::size_t limit = cap.value_or(10 * w.size());
  const auto states = propagate(w, initial, DistortionSchedule::zeros(w.size(), limit), limit);
  for (std::size_t t = 0; t <= limit; ++t)
    if (network_mse(states[t]) < mse_target) return t;
  throw InfeasibleError(fmt::format("lossless MSE does not fall below {:.6g} within {} iterations",
                                    mse_target, limit));
}

Vector GgpProblem::variances(const Vector& vars) const {
  if (static_cast<std::size_t>(vars.size()) != num_variables())
    throw std::invalid_argument("wrong number of distortion variables");
  Vector out = var_coef * vars;
  for (std::size_t t = 0; t < horizon; ++t)
    for (std::size_t i = 0; i < m; ++i)
      out(static_cast<Eigen::Index>(slot(i, t))) +=
          var_const(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
  return out;
}

double GgpProblem::mse(const Vector& vars) const {
  if (static_cast<std::size_t>(vars.size()) != num_variables())
    throw std::invalid_argument("wrong number of distortion variables");
  return mse_const + mse_coef.dot(vars);
}

Vector GgpProblem::node_mses(const Vector& vars) const {
  if (static_cast<std::size_t>(vars.size()) != num_variables())
    throw std::invalid_argument("wrong number of distortion variables");
  return node_mse_const + node_mse_coef * vars;
}

Vector GgpProblem::upper_bounds() const {
  const Vector c0 = Eigen::Map<const Vector>(var_const.data(), var_const.size());
  if (mode == DistortionMode::per_node) return model.d_max * c0;
  Vector ub(static_cast<Eigen::Index>(horizon));
  for (std::size_t t = 0; t < horizon; ++t)
    ub(static_cast<Eigen::Index>(t)) = model.d_max * var_const.col(static_cast<Eigen::Index>(t)).minCoeff();
  return ub;
}

GgpProblem extract_ggp(const WeightMatrix& w, const InitialMoments& initial, std::size_t horizon,
                       const RdModel& model, DistortionMode mode) {
  if (horizon < 1) throw std::invalid_argument("extract_ggp: horizon must be at least 1");
  const std::size_t m = w.size();
  if (static_cast<std::size_t>(initial.mean.size()) != m)
    throw std::invalid_argument("initial moments do not match the weight matrix size");

  const auto n = static_cast<Eigen::Index>(m);
  const Matrix& W = w.matrix();
  const Matrix center = centering(m);
  const Matrix w_minus_i = W - Matrix::Identity(n, n);

  GgpProblem p;
  p.mode = mode;
  p.m = m;
  p.horizon = horizon;
  p.model = model;
  const auto nvars = static_cast<Eigen::Index>(mode == DistortionMode::per_node ? m * horizon : horizon);
  const auto nslots = static_cast<Eigen::Index>(m * horizon);

  // Lossless trajectory: c0[i,t] = [W^t Sigma0 W^t]_ii.
  const auto lossless = propagate(w, initial, DistortionSchedule::zeros(m, horizon), horizon);
  p.var_const.resize(n, static_cast<Eigen::Index>(horizon));
  for (std::size_t t = 0; t < horizon; ++t)
    p.var_const.col(static_cast<Eigen::Index>(t)) = lossless[t].sigma_z.diagonal();
  p.mse_const = network_mse(lossless[horizon]);
  p.node_mse_const.resize(n);
  for (std::size_t i = 0; i < m; ++i)
    p.node_mse_const(static_cast<Eigen::Index>(i)) = node_mse(lossless[horizon], i);

  // Noise injected at s reaches time t through B_{t-1-s} = W^{t-1-s} (W - I).
  std::vector<Matrix> gain(horizon);
  Matrix power = Matrix::Identity(n, n);
  for (std::size_t lag = 0; lag < horizon; ++lag) {
    gain[lag] = power * w_minus_i;
    symmetrize(gain[lag]);
    power = (power * W).eval();
    symmetrize(power);
  }

  p.var_coef = Matrix::Zero(nslots, nvars);
  for (std::size_t t = 1; t < horizon; ++t)
    for (std::size_t s = 0; s < t; ++s) {
      const Matrix& b = gain[t - 1 - s];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k) {
          const double v = b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
          p.var_coef(static_cast<Eigen::Index>(p.slot(i, t)),
                     static_cast<Eigen::Index>(p.variable_of(k, s))) += v * v;
        }
    }

  p.mse_coef = Vector::Zero(nvars);
  p.node_mse_coef = Matrix::Zero(n, nvars);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t s = 0; s < horizon; ++s) {
    const Matrix e = center * gain[horizon - 1 - s];
    for (std::size_t k = 0; k < m; ++k) {
      const auto var = static_cast<Eigen::Index>(p.variable_of(k, s));
      for (std::size_t i = 0; i < m; ++i) {
        const double v = e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        p.node_mse_coef(static_cast<Eigen::Index>(i), var) += v * v;
        p.mse_coef(var) += inv_m * v * v;
      }
    }
  }
  return p;
}

nlohmann::json to_json(const MomentState& state) {
  return {{"t", state.t},
          {"mu_z", vec(state.mu_z)},
          {"sigma_z", mat(state.sigma_z)},
          {"mu_e", vec(state.mu_e)},
          {"sigma_e", mat(state.sigma_e)}};
}

nlohmann::json to_json(const GgpProblem& p) {
  return {{"mode", p.mode == DistortionMode::per_node ? "per_node" : "constant"},
          {"m", p.m},
          {"horizon", p.horizon},
          {"model", {{"family", to_string(p.model.family)}, {"r_c", p.model.r_c}, {"d_max", p.model.d_max}}},
          {"var_const", mat(p.var_const)},
          {"var_coef", mat(p.var_coef)},
          {"mse_const", p.mse_const},
          {"mse_coef", vec(p.mse_coef)},
          {"node_mse_const", vec(p.node_mse_const)},
          {"node_mse_coef", mat(p.node_mse_coef)}};
}

}  // namespace qcons
