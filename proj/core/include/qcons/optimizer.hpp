#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcons/rate_model.hpp"
#include "qcons/state_evolution.hpp"

namespace qcons {

// The rate-allocation program is solved over log-distortions y = ln d.
// Each slot (i,t) contributes
//   max( ln(c0[i,t] + sum_v c[i,t][v] e^{y_v}) - y_{v(i,t)},  -2 r_c ln 2 )
// nats to the objective, which is convex in y (log-sum-exp minus linear,
// then a pointwise max). Posynomial MSE constraints become
//   ln(sum_v a_v e^{y_v}) <= ln(budget).

/// ln(sum_v coef_v e^{y_v}) <= ln(budget); budget = target - lossless part.
struct PosynomialConstraint {
  Vector coef;
  double budget = 0.0;
  std::string label;
};

PosynomialConstraint network_constraint(const GgpProblem& problem, double mse_target);

/// One constraint per node with a nonzero coefficient row. Throws
/// InfeasibleError if any target does not exceed that node's lossless MSE.
std::vector<PosynomialConstraint> node_constraints(const GgpProblem& problem,
                                                   const std::vector<double>& targets);

/// Sum over slots of the max terms above, in nats.
double objective_value(const GgpProblem& problem, const Vector& y);
/// Gradient of objective_value; at a kink the active branch is the log
/// term when it is strictly above the floor.
Vector objective_gradient(const GgpProblem& problem, const Vector& y);
/// Aggregate rate in bits at y: objective_value / (2 ln 2) + m T r_c.
double objective_bits(const GgpProblem& problem, const Vector& y);

double constraint_value(const PosynomialConstraint& c, const Vector& y);
Vector constraint_gradient(const PosynomialConstraint& c, const Vector& y);

struct SolverOptions {
  double tol = 1e-4;                 // relative objective tolerance
  std::size_t max_newton_steps = 20000;
  double barrier_growth = 10.0;
};

struct SolverReport {
  std::size_t newton_steps = 0;
  std::size_t barrier_stages = 0;
  double constraint_residual = 0.0;  // max relative violation, >= 0
  double duality_gap = 0.0;          // nats, bounds suboptimality
  double newton_decrement = 0.0;
  std::size_t saturated_slots = 0;   // slots whose optimal rate is zero
  std::string status;
};

struct GgpSolution {
  DistortionSchedule d_star;
  RateSchedule r_star;
  double objective_bits = 0.0;
  double achieved_mse = 0.0;
  SolverReport report;
};

/// Minimizes aggregate rate subject to the listed constraints and the caps
/// D <= d_max c0. Throws ConvergenceError if the Newton budget runs out.
GgpSolution solve_ggp(const GgpProblem& problem,
                      const std::vector<PosynomialConstraint>& constraints,
                      const SolverOptions& options = {});

/// Per-node distortions under a network MSE target. Throws InfeasibleError
/// when the target does not exceed the lossless MSE at T.
GgpSolution solve_variable_distortion(const GgpProblem& problem, double mse_target,
                                      const SolverOptions& options = {});

/// Shared distortion D(t) per iteration; requires a constant-mode problem.
GgpSolution solve_constant_distortion(const GgpProblem& problem, double mse_target,
                                      const SolverOptions& options = {});

/// Per-node (targets.size() == m) or max-node (targets.size() == 1) MSE
/// constraints in place of the network constraint.
GgpSolution solve_with_node_constraints(const GgpProblem& problem,
                                        const std::vector<double>& targets,
                                        const SolverOptions& options = {});

nlohmann::json to_json(const SolverReport& report);
nlohmann::json to_json(const GgpSolution& solution);

}  // namespace qcons
