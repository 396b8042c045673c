#include "qcons/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <fmt/core.h>

#include "qcons/errors.hpp"

namespace qcons {

namespace {

using Index = Eigen::Index;

constexpr double kLn2 = std::numbers::ln2;

/// ln(c0 + sum_v coef_v e^{y_v}) and the softmax weights p_v of the
/// exponential terms (not including c0).
struct LogSum {
  double value = 0.0;
  Vector weights;
};

LogSum log_sum(double c0, const Eigen::Ref<const Vector>& coef, const Vector& y) {
  double shift = c0 > 0.0 ? std::log(c0) : -std::numeric_limits<double>::infinity();
  for (Index v = 0; v < coef.size(); ++v)
    if (coef(v) > 0.0) shift = std::max(shift, std::log(coef(v)) + y(v));
  if (!std::isfinite(shift)) throw std::invalid_argument("posynomial with no positive terms");

  LogSum out;
  out.weights = Vector::Zero(coef.size());
  double total = c0 > 0.0 ? std::exp(std::log(c0) - shift) : 0.0;
  for (Index v = 0; v < coef.size(); ++v) {
    if (coef(v) > 0.0) {
      out.weights(v) = coef(v) * std::exp(y(v) - shift);
      total += out.weights(v);
    }
  }
  out.weights /= total;
  out.value = shift + std::log(total);
  return out;
}

double saturation_floor(const GgpProblem& p) { return -2.0 * p.model.r_c * kLn2; }

double c0_of(const GgpProblem& p, std::size_t slot) {
  return p.var_const(static_cast<Index>(slot % p.m), static_cast<Index>(slot / p.m));
}

std::size_t own_variable(const GgpProblem& p, std::size_t slot) {
  return p.variable_of(slot % p.m, slot / p.m);
}

/// Slot log-ratio ln(sigma^2 / D) and its softmax weights.
LogSum slot_term(const GgpProblem& p, std::size_t slot, const Vector& y) {
  LogSum ls = log_sum(c0_of(p, slot), p.var_coef.row(static_cast<Index>(slot)).transpose(), y);
  ls.value -= y(static_cast<Index>(own_variable(p, slot)));
  return ls;
}

void validate_problem(const GgpProblem& p) {
  if (p.m == 0 || p.horizon == 0) throw std::invalid_argument("empty GGP problem");
  if (p.var_const.size() == 0 || p.var_const.minCoeff() <= 0.0)
    throw std::invalid_argument("lossless variances must be positive");
  if (static_cast<std::size_t>(p.var_coef.rows()) != p.num_slots() ||
      p.var_coef.cols() != p.mse_coef.size())
    throw std::invalid_argument("GGP coefficient shapes are inconsistent");
}

// Interior-point state. x = [y (n); s (slots)], s is the epigraph variable
// of each slot's max term.
class BarrierSolver {
 public:
  BarrierSolver(const GgpProblem& p, const std::vector<PosynomialConstraint>& cons)
      : p_(p),
        cons_(cons),
        n_(static_cast<Index>(p.num_variables())),
        slots_(static_cast<Index>(p.num_slots())),
        floor_(saturation_floor(p)) {
    const Vector ub = p.upper_bounds();
    log_ub_ = ub.array().log().matrix();
  }

  Index num_constraints() const {
    return 2 * slots_ + static_cast<Index>(cons_.size()) + n_;
  }

  void initialize(Vector& y, Vector& s) const {
    y = log_ub_.array() + std::log(1e-3);
    for (int attempt = 0; attempt < 200; ++attempt) {
      bool ok = true;
      for (const auto& c : cons_) ok = ok && constraint_value(c, y) < -1e-6;
      if (ok) break;
      y.array() -= std::log(10.0);
    }
    for (const auto& c : cons_)
      if (!(constraint_value(c, y) < 0.0))
        throw ConvergenceError("could not find a strictly feasible starting point");
    s.resize(slots_);
    for (Index r = 0; r < slots_; ++r)
      s(r) = std::max(slot_term(p_, static_cast<std::size_t>(r), y).value, floor_) + 1.0;
  }

  /// Barrier objective; +inf outside the strict interior.
  double phi(double tau, const Vector& y, const Vector& s) const {
    double val = tau * s.sum();
    for (Index v = 0; v < n_; ++v) {
      const double slack = log_ub_(v) - y(v);
      if (!(slack > 0.0)) return kInf;
      val -= std::log(slack);
    }
    for (Index r = 0; r < slots_; ++r) {
      const double g = slot_term(p_, static_cast<std::size_t>(r), y).value;
      const double slack_epi = s(r) - g;
      const double slack_floor = s(r) - floor_;
      if (!(slack_epi > 0.0) || !(slack_floor > 0.0)) return kInf;
      val -= std::log(slack_epi) + std::log(slack_floor);
    }
    for (const auto& c : cons_) {
      const double h = constraint_value(c, y);
      if (!(h < 0.0)) return kInf;
      val -= std::log(-h);
    }
    return val;
  }

  /// Newton direction for the centering problem at barrier weight tau.
  /// Returns the gradient dot direction (negative squared decrement).
  double newton_direction(double tau, const Vector& y, const Vector& s, Vector& dy,
                          Vector& ds) const {
    Matrix hyy = Matrix::Zero(n_, n_);
    Vector gy = Vector::Zero(n_);
    Vector gs = Vector::Constant(slots_, tau);
    Vector hss = Vector::Zero(slots_);
    // Cross terms H_ys are one column per slot: -w1 * a_r.
    Matrix cross = Matrix::Zero(n_, slots_);

    for (Index v = 0; v < n_; ++v) {
      const double slack = log_ub_(v) - y(v);
      gy(v) += 1.0 / slack;
      hyy(v, v) += 1.0 / (slack * slack);
    }
    for (Index r = 0; r < slots_; ++r) {
      const auto slot = static_cast<std::size_t>(r);
      LogSum ls = slot_term(p_, slot, y);
      const double slack = s(r) - ls.value;  // -f for f = g - s
      const double w0 = 1.0 / slack;
      const double w1 = w0 * w0;
      Vector a = ls.weights;
      a(static_cast<Index>(own_variable(p_, slot))) -= 1.0;

      gy += w0 * a;
      gs(r) -= w0;
      hyy.diagonal() += w0 * ls.weights;
      hyy.noalias() -= w0 * ls.weights * ls.weights.transpose();
      hyy.noalias() += w1 * a * a.transpose();
      cross.col(r) = -w1 * a;
      hss(r) += w1;

      const double slack_floor = s(r) - floor_;
      gs(r) -= 1.0 / slack_floor;
      hss(r) += 1.0 / (slack_floor * slack_floor);
    }
    for (const auto& c : cons_) {
      LogSum ls = log_sum(0.0, c.coef, y);
      const double h = ls.value - std::log(c.budget);
      const double w0 = -1.0 / h;
      const double w1 = w0 * w0;
      gy += w0 * ls.weights;
      hyy.diagonal() += w0 * ls.weights;
      hyy.noalias() -= w0 * ls.weights * ls.weights.transpose();
      hyy.noalias() += w1 * ls.weights * ls.weights.transpose();
    }

    // Eliminate the diagonal s-block via its Schur complement.
    const Vector hss_inv = hss.cwiseInverse();
    Matrix schur = hyy;
    schur.noalias() -= cross * hss_inv.asDiagonal() * cross.transpose();
    const Vector rhs = -gy + cross * hss_inv.cwiseProduct(gs);
    Eigen::LDLT<Matrix> ldlt(schur);
    dy = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !dy.allFinite()) {
      schur.diagonal().array() += 1e-12 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
      dy = schur.llt().solve(rhs);
    }
    ds = hss_inv.cwiseProduct(-gs - cross.transpose() * dy);
    return gy.dot(dy) + gs.dot(ds);
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  const GgpProblem& p_;
  const std::vector<PosynomialConstraint>& cons_;
  Index n_;
  Index slots_;
  double floor_;
  Vector log_ub_;
};

}  // namespace

PosynomialConstraint network_constraint(const GgpProblem& problem, double mse_target) {
  if (!(mse_target > problem.mse_const * (1.0 + 1e-12)))
    throw InfeasibleError(fmt::format(
        "MSE target {:.6g} does not exceed the lossless MSE {:.6g} at T={}; "
        "increase T to at least t_min",
        mse_target, problem.mse_const, problem.horizon));
  return {problem.mse_coef, mse_target - problem.mse_const, "network"};
}

std::vector<PosynomialConstraint> node_constraints(const GgpProblem& problem,
                                                   const std::vector<double>& targets) {
  if (targets.size() != 1 && targets.size() != problem.m)
    throw std::invalid_argument("node targets must have 1 (max-node) or m entries");
  std::vector<PosynomialConstraint> out;
  for (std::size_t i = 0; i < problem.m; ++i) {
    const double target = targets.size() == 1 ? targets[0] : targets[i];
    const double floor = problem.node_mse_const(static_cast<Index>(i));
    if (!(target > floor * (1.0 + 1e-12)))
      throw InfeasibleError(fmt::format(
          "node {} MSE target {:.6g} does not exceed its lossless MSE {:.6g}", i, target, floor));
    Vector coef = problem.node_mse_coef.row(static_cast<Index>(i)).transpose();
    if (coef.maxCoeff() > 0.0)
      out.push_back({std::move(coef), target - floor, "node " + std::to_string(i)});
  }
  return out;
}

double objective_value(const GgpProblem& problem, const Vector& y) {
  const double floor = saturation_floor(problem);
  double total = 0.0;
  for (std::size_t r = 0; r < problem.num_slots(); ++r)
    total += std::max(slot_term(problem, r, y).value, floor);
  return total;
}

Vector objective_gradient(const GgpProblem& problem, const Vector& y) {
  const double floor = saturation_floor(problem);
  Vector grad = Vector::Zero(y.size());
  for (std::size_t r = 0; r < problem.num_slots(); ++r) {
    LogSum ls = slot_term(problem, r, y);
    if (ls.value > floor) {
      grad += ls.weights;
      grad(static_cast<Index>(own_variable(problem, r))) -= 1.0;
    }
  }
  return grad;
}

double objective_bits(const GgpProblem& problem, const Vector& y) {
  return objective_value(problem, y) / (2.0 * kLn2) +
         static_cast<double>(problem.num_slots()) * problem.model.r_c;
}

double constraint_value(const PosynomialConstraint& c, const Vector& y) {
  return log_sum(0.0, c.coef, y).value - std::log(c.budget);
}

Vector constraint_gradient(const PosynomialConstraint& c, const Vector& y) {
  return log_sum(0.0, c.coef, y).weights;
}

GgpSolution solve_ggp(const GgpProblem& problem,
                      const std::vector<PosynomialConstraint>& constraints,
                      const SolverOptions& options) {
  validate_problem(problem);
  for (const auto& c : constraints) {
    if (c.coef.size() != static_cast<Index>(problem.num_variables()))
      throw std::invalid_argument("constraint has the wrong number of coefficients");
    if (!(c.budget > 0.0)) throw InfeasibleError("constraint '" + c.label + "' has no budget");
  }

  BarrierSolver solver(problem, constraints);
  Vector y, s, dy, ds;
  solver.initialize(y, s);

  const auto num_cons = static_cast<double>(solver.num_constraints());
  SolverReport report;
  double tau = 1.0;
  double decrement = 0.0;
  for (;;) {
    ++report.barrier_stages;
    // Centering by damped Newton.
    for (;;) {
      if (report.newton_steps >= options.max_newton_steps)
        throw ConvergenceError("GGP solver exceeded " +
                               std::to_string(options.max_newton_steps) + " Newton steps");
      const double slope = solver.newton_direction(tau, y, s, dy, ds);
      decrement = std::sqrt(std::max(0.0, -slope));
      if (decrement * decrement / 2.0 <= 1e-10 || !(slope < 0.0)) break;
      const double current = solver.phi(tau, y, s);
      double step = 1.0;
      Vector y_new, s_new;
      for (int k = 0; k < 60; ++k, step *= 0.5) {
        y_new = y + step * dy;
        s_new = s + step * ds;
        if (solver.phi(tau, y_new, s_new) <= current + 0.25 * step * slope) break;
      }
      ++report.newton_steps;
      if (!(solver.phi(tau, y_new, s_new) < current)) break;  // no progress possible
      y = std::move(y_new);
      s = std::move(s_new);
    }
    const double gap = num_cons / tau;
    const double scale = std::max(1.0, std::abs(s.sum()));
    if (gap <= 1e-3 * options.tol * scale) {
      report.duality_gap = gap;
      break;
    }
    tau *= options.barrier_growth;
  }
  report.newton_decrement = decrement;

  const Vector d = y.array().exp().matrix();
  double residual = 0.0;
  for (const auto& c : constraints)
    residual = std::max(residual, c.coef.dot(d) / c.budget - 1.0);
  report.constraint_residual = std::max(0.0, residual);
  report.status = "optimal";

  auto d_star = DistortionSchedule::from_variables(problem.mode, problem.m, problem.horizon, d);
  auto r_star = schedule_from_distortions(problem.model, problem, d_star);
  report.saturated_slots =
      static_cast<std::size_t>((r_star.rates().array() == 0.0).count());
  const double bits = aggregate_rate(r_star);
  const double mse = problem.mse(d);
  return GgpSolution{std::move(d_star), std::move(r_star), bits, mse, std::move(report)};
}

GgpSolution solve_variable_distortion(const GgpProblem& problem, double mse_target,
                                      const SolverOptions& options) {
  if (problem.mode != DistortionMode::per_node)
    throw std::invalid_argument("solve_variable_distortion needs a per-node problem");
  std::vector<PosynomialConstraint> cons;
  auto c = network_constraint(problem, mse_target);
  if (c.coef.maxCoeff() > 0.0) cons.push_back(std::move(c));
  return solve_ggp(problem, cons, options);
}

GgpSolution solve_constant_distortion(const GgpProblem& problem, double mse_target,
                                      const SolverOptions& options) {
  if (problem.mode != DistortionMode::constant)
    throw std::invalid_argument("solve_constant_distortion needs a constant-mode problem");
  std::vector<PosynomialConstraint> cons;
  auto c = network_constraint(problem, mse_target);
  if (c.coef.maxCoeff() > 0.0) cons.push_back(std::move(c));
  return solve_ggp(problem, cons, options);
}

GgpSolution solve_with_node_constraints(const GgpProblem& problem,
                                        const std::vector<double>& targets,
                                        const SolverOptions& options) {
  return solve_ggp(problem, node_constraints(problem, targets), options);
}

nlohmann::json to_json(const SolverReport& report) {
  return {{"newton_steps", report.newton_steps},
          {"barrier_stages", report.barrier_stages},
          {"constraint_residual", report.constraint_residual},
          {"duality_gap", report.duality_gap},
          {"newton_decrement", report.newton_decrement},
          {"saturated_slots", report.saturated_slots},
          {"status", report.status}};
}

nlohmann::json to_json(const GgpSolution& solution) {
  const Matrix d = solution.d_star.expanded();
  const Matrix& r = solution.r_star.rates();
  nlohmann::json dist = nlohmann::json::array();
  nlohmann::json rates = nlohmann::json::array();
  for (Index i = 0; i < d.rows(); ++i) {
    std::vector<double> drow(static_cast<std::size_t>(d.cols()));
    std::vector<double> rrow(static_cast<std::size_t>(r.cols()));
    for (Index t = 0; t < d.cols(); ++t) {
      drow[static_cast<std::size_t>(t)] = d(i, t);
      rrow[static_cast<std::size_t>(t)] = r(i, t);
    }
    dist.push_back(std::move(drow));
    rates.push_back(std::move(rrow));
  }
  return {{"mode", solution.d_star.mode() == DistortionMode::per_node ? "variable" : "constant"},
          {"objective_bits", solution.objective_bits},
          {"achieved_mse", solution.achieved_mse},
          {"distortions", std::move(dist)},
          {"rates", std::move(rates)},
          {"report", to_json(solution.report)}};
}

}  // namespace qcons
