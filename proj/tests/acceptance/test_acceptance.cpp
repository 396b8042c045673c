// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Usage: test_acceptance [output_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qcons/config.hpp"
#include "qcons/graph.hpp"
#include "qcons/harness.hpp"
#include "qcons/optimizer.hpp"
#include "qcons/simulator.hpp"
#include "qcons/state_evolution.hpp"

using namespace qcons;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt_g(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

oracle::Mat to_oracle(const Matrix& a) {
  oracle::Mat out(static_cast<std::size_t>(a.rows()), std::vector<double>(static_cast<std::size_t>(a.cols())));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = a(i, j);
  return out;
}

std::vector<std::vector<double>> by_iteration(const Matrix& d) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(d.cols()),
                                       std::vector<double>(static_cast<std::size_t>(d.rows())));
  for (Eigen::Index t = 0; t < d.cols(); ++t)
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      out[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = d(i, t);
  return out;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

Outcome c1_moment_closed_form() {
  const auto w = metropolis_weights(complete_graph(2));
  const InitialMoments init{Vector::Zero(2), Matrix::Identity(2, 2)};
  const Matrix wm = w.matrix();
  const Matrix eye = Matrix::Identity(2, 2);
  double worst = 0;
  for (double delta : {1e-3, 1e-1, 1.0}) {
    const auto s = propagate(w, init, DistortionSchedule::constant(2, Vector::Constant(1, delta)), 1);
    const Matrix expect = wm + delta * (eye - wm);
    worst = std::max(worst, (s[1].sigma_z - expect).cwiseAbs().maxCoeff() / expect.cwiseAbs().maxCoeff());
    worst = std::max(worst, rel(network_mse(s[1]), delta / 2));
  }
  return {worst <= 1e-12, "max rel err " + fmt_g(worst) + " (tol 1e-12)"};
}

Outcome c2_posynomial_extraction() {
  std::mt19937_64 rng(20240602);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const RdModel model = RdModel::make(QuantizerFamily::ecsq);
  double worst = 0;
  for (int g = 0; g < 20; ++g) {
    const std::size_t m = 2 + static_cast<std::size_t>(u(rng) * 9);   // 2..10
    const std::size_t horizon = 1 + static_cast<std::size_t>(u(rng) * 6);  // 1..6
    const auto w = metropolis_weights(Graph(m, oracle::random_connected_edges(m, 0.3, rng)));
    const auto init = InitialMoments::signal_plus_noise(m, 1.0, 0.5);
    const GgpProblem p = extract_ggp(w, init, horizon, model, DistortionMode::per_node);
    const GgpProblem pc = extract_ggp(w, init, horizon, model, DistortionMode::constant);
    for (int k = 0; k < 10; ++k) {
      const Matrix d = Matrix::NullaryExpr(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(horizon),
                                           [&] { return std::exp(-7.0 * u(rng)); });
      const auto ref = oracle::propagate(to_oracle(w.matrix()), to_oracle(init.covariance), by_iteration(d));
      const Vector vars = DistortionSchedule::per_node(d).variables();
      const Vector var = p.variances(vars);
      for (std::size_t t = 0; t < horizon; ++t)
        for (std::size_t i = 0; i < m; ++i)
          worst = std::max(worst, rel(var(static_cast<Eigen::Index>(p.slot(i, t))), ref.node_variance[t][i]));
      worst = std::max(worst, rel(p.mse(vars), ref.network_mse[horizon]));
      const Vector nodes = p.node_mses(vars);
      for (std::size_t i = 0; i < m; ++i)
        worst = std::max(worst, rel(nodes(static_cast<Eigen::Index>(i)), ref.node_mse[horizon][i]));
      const Vector shared = d.row(0).transpose();
      const auto cref = oracle::propagate(to_oracle(w.matrix()), to_oracle(init.covariance),
                                          by_iteration(DistortionSchedule::constant(m, shared).expanded()));
      worst = std::max(worst, rel(pc.mse(shared), cref.network_mse[horizon]));
    }
  }
  return {worst <= 1e-9, "20 graphs x 10 points, max rel err " + fmt_g(worst) + " (tol 1e-9)"};
}

oracle::GridProblem grid_view(const GgpProblem& p) {
  oracle::GridProblem g;
  g.m = p.m;
  g.horizon = p.horizon;
  g.num_vars = p.num_variables();
  g.r_c = p.model.r_c;
  g.var_of = [&p](std::size_t i, std::size_t t) { return p.variable_of(i, t); };
  g.variance = [&p](std::size_t i, std::size_t t, const std::vector<double>& d) {
    const auto row = p.var_coef.row(static_cast<Eigen::Index>(p.slot(i, t)));
    double v = p.var_const(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
    for (std::size_t j = 0; j < d.size(); ++j) v += row(static_cast<Eigen::Index>(j)) * d[j];
    return v;
  };
  g.mse_const = p.mse_const;
  g.mse_coef.assign(p.mse_coef.data(), p.mse_coef.data() + p.mse_coef.size());
  const Vector ub = p.upper_bounds();
  g.upper.assign(ub.data(), ub.data() + ub.size());
  return g;
}

Outcome c3_grid_oracle() {
  const auto w = metropolis_weights(path_graph(3));
  const auto init = InitialMoments::signal_plus_noise(3, 1.0, 0.5);
  const RdModel model = RdModel::make(QuantizerFamily::ecsq, 0.0);
  bool ok = true;
  double worst_excess = -1e300;
  int checks = 0;
  for (auto mode : {DistortionMode::per_node, DistortionMode::constant}) {
    const GgpProblem p = extract_ggp(w, init, 2, model, mode);
    const double saturated = p.mse(p.upper_bounds());
    for (double f : {0.05, 0.15, 0.3, 0.5, 0.8}) {
      const double target = p.mse_const + f * (saturated - p.mse_const);
      const GgpSolution s = mode == DistortionMode::per_node ? solve_variable_distortion(p, target)
                                                             : solve_constant_distortion(p, target);
      const auto grid = oracle::grid_search(grid_view(p), target, 60, 1e-6);
      const double propagated = network_mse(propagate(w, init, s.d_star, 2).back());
      const bool feasible = propagated <= target * (1 + 1e-6);
      const bool good = std::isfinite(grid.objective_bits) &&
                        s.objective_bits <= grid.objective_bits + 0.01 * std::abs(grid.objective_bits) + 1e-9;
      worst_excess = std::max(worst_excess, (s.objective_bits - grid.objective_bits) /
                                                std::max(std::abs(grid.objective_bits), 1e-12));
      ok = ok && feasible && good;
      ++checks;
    }
  }
  return {ok, std::to_string(checks) + " solves; max (solver-grid)/grid " + fmt_g(worst_excess) +
                  " (tol +0.01), all feasible: " + (ok ? "yes" : "see detail")};
}

Outcome c4_closed_form_optimum() {
  const auto w = metropolis_weights(complete_graph(2));
  const InitialMoments init{Vector::Zero(2), Matrix::Identity(2, 2)};
  const GgpProblem p = extract_ggp(w, init, 1, RdModel::make(QuantizerFamily::vq_proxy), DistortionMode::per_node);
  const GgpSolution s = solve_variable_distortion(p, 0.05);
  const double err_bits = std::abs(s.objective_bits - std::log2(10.0));
  const double err_d = std::max(rel(s.d_star.at(0, 0), 0.1), rel(s.d_star.at(1, 0), 0.1));
  return {err_bits <= 1e-3 && err_d <= 1e-3,
          "R_agg " + fmt_g(s.objective_bits) + " bits (|err| " + fmt_g(err_bits) + "), D rel err " + fmt_g(err_d)};
}

Outcome c5_gradients() {
  struct Fixture {
    GgpProblem problem;
    PosynomialConstraint constraint;
  };
  std::vector<Fixture> fixtures;
  const RdModel model = RdModel::make(QuantizerFamily::ecsq);
  {
    const auto w = metropolis_weights(path_graph(3));
    const auto init = InitialMoments::signal_plus_noise(3, 1.0, 0.5);
    auto p = extract_ggp(w, init, 2, model, DistortionMode::per_node);
    auto c = network_constraint(p, p.mse_const * 2);
    fixtures.push_back({std::move(p), std::move(c)});
  }
  {
    const auto w = metropolis_weights(generate_connected_rgg(6, 0.45, 8).graph);
    const auto init = InitialMoments::signal_plus_noise(6, 1.0, 0.5);
    auto p = extract_ggp(w, init, 3, model, DistortionMode::per_node);
    auto c = node_constraints(p, {p.node_mse_const.maxCoeff() * 2}).front();
    fixtures.push_back({std::move(p), std::move(c)});
    auto pc = extract_ggp(w, init, 3, model, DistortionMode::constant);
    auto cc = network_constraint(pc, pc.mse_const * 3);
    fixtures.push_back({std::move(pc), std::move(cc)});
  }
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(-6.0, 0.5);
  double worst = 0;
  int points = 0;
  while (points < 50) {
    const Fixture& f = fixtures[static_cast<std::size_t>(points) % fixtures.size()];
    const GgpProblem& p = f.problem;
    Vector y(static_cast<Eigen::Index>(p.num_variables()));
    for (auto& v : y) v = u(rng);
    const Vector var = p.variances(y.array().exp().matrix());
    bool near_kink = false;
    for (std::size_t t = 0; t < p.horizon; ++t)
      for (std::size_t i = 0; i < p.m; ++i) {
        const double gap = std::log(var(static_cast<Eigen::Index>(p.slot(i, t)))) -
                           y(static_cast<Eigen::Index>(p.variable_of(i, t))) + 2 * p.model.r_c * std::log(2.0);
        near_kink |= std::abs(gap) < 1e-3;
      }
    if (near_kink) continue;
    ++points;
    const std::vector<double> y0(y.data(), y.data() + y.size());
    auto as_vec = [](const std::vector<double>& x) {
      return Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())).eval();
    };
    const auto fd_obj = oracle::central_difference([&](const std::vector<double>& x) { return objective_value(p, as_vec(x)); }, y0, 1e-5);
    const auto fd_con = oracle::central_difference([&](const std::vector<double>& x) { return constraint_value(f.constraint, as_vec(x)); }, y0, 1e-5);
    const Vector go = objective_gradient(p, y);
    const Vector gc = constraint_gradient(f.constraint, y);
    double no = 0, nc = 0, eo = 0, ec = 0;
    for (std::size_t j = 0; j < y0.size(); ++j) {
      no = std::max(no, std::abs(fd_obj[j]));
      nc = std::max(nc, std::abs(fd_con[j]));
      eo = std::max(eo, std::abs(go(static_cast<Eigen::Index>(j)) - fd_obj[j]));
      ec = std::max(ec, std::abs(gc(static_cast<Eigen::Index>(j)) - fd_con[j]));
    }
    worst = std::max(worst, eo / std::max(no, 1e-12));
    worst = std::max(worst, ec / std::max(nc, 1e-12));
  }
  return {worst <= 1e-5, "50 points, max normwise rel err " + fmt_g(worst) + " (tol 1e-5)"};
}

Outcome c6_feasible_set_ordering() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const RdModel model = RdModel::make(QuantizerFamily::ecsq);
  double worst = -1e300;
  bool ok = true;
  for (int k = 0; k < 10; ++k) {
    const std::size_t m = 3 + static_cast<std::size_t>(u(rng) * 6);
    const std::size_t horizon = 2 + static_cast<std::size_t>(u(rng) * 3);
    const auto w = metropolis_weights(Graph(m, oracle::random_connected_edges(m, 0.3, rng)));
    const auto init = InitialMoments::signal_plus_noise(m, 1.0, 0.5);
    const GgpProblem pv = extract_ggp(w, init, horizon, model, DistortionMode::per_node);
    const GgpProblem pc = extract_ggp(w, init, horizon, model, DistortionMode::constant);
    const double target = pv.mse_const * (1.2 + 2.0 * u(rng)) + 1e-6;
    const double v = solve_variable_distortion(pv, target, {.tol = 1e-9}).objective_bits;
    const double c = solve_constant_distortion(pc, target, {.tol = 1e-9}).objective_bits;
    ok = ok && c >= v - 1e-6 * std::abs(v);
    worst = std::max(worst, (v - c) / std::max(std::abs(v), 1e-12));
  }
  return {ok, "10 fixtures, max (variable-constant)/variable " + fmt_g(worst) + " (tol 1e-6)"};
}

ExperimentConfig fig1_config(const fs::path& out) {
  ExperimentConfig c;
  c.graph.m = 20;
  c.graph.rho_c = 0.35;
  c.graph.seed = 1;
  c.signal.sigma_x2 = 1.0;
  c.signal.sigma_n2 = 0.5;
  c.horizon = 5;
  c.optimizer.mode = ModeChoice::variable;
  c.optimizer.emse_targets_db = {3.0};
  c.output = out.string();
  return c;
}

Outcome c7_rate_structure(const fs::path& out, unsigned threads) {
  const auto s = cmd_optimize(fig1_config(out), {out, threads, nullptr});
  if (s.outcomes.empty() || !s.outcomes[0].solution) return {false, "solve failed"};
  const auto& r = s.outcomes[0].solution->r_star;
  double worst_drop = 0;
  for (std::size_t i = 0; i < r.nodes(); ++i)
    for (std::size_t t = 1; t < r.horizon(); ++t) worst_drop = std::max(worst_drop, r(i, t - 1) - r(i, t));
  return {worst_drop <= 0.05, "m=20 T=5 variable mode at 3 dB EMSE, R_agg " + fmt_g(s.outcomes[0].solution->objective_bits) +
                                  ", largest decrease " + fmt_g(worst_drop) + " bits (tol 0.05)"};
}

// Target for the simulation criterion: EMSE in dB over lossless MSE(T).
constexpr double kSimEmseDb = 0.1;

struct SimCheck {
  Outcome agreement;
  double drift = 0;
};

SimCheck c8_simulation(const fs::path& out, unsigned threads) {
  double worst_mse = 0, worst_gap = 0, min_rate = 1e300, worst_any = 0;
  double drift = 0;
  std::size_t checked_slots = 0;
  bool ok = true;
  for (auto kind : {QuantizerKind::gaussian_noise_proxy, QuantizerKind::dithered_uniform}) {
    ExperimentConfig c;
    c.graph.m = 20;
    c.graph.rho_c = 0.35;
    c.graph.seed = 1;
    c.horizon = 7;
    c.signal.length = 1000;
    c.simulation.trials = 100;
    c.simulation.quantizer_kind = kind;
    c.simulation.seed = 8;
    c.model.family = family_of(kind);
    c.optimizer.emse_targets_db = {kSimEmseDb};
    const fs::path dir = out / std::string(to_string(kind));
    const auto results = cmd_simulate(c, {dir, threads, nullptr});
    if (results.size() != 1 || !results[0].sim) return {{false, "simulation did not run"}, 0};
    const auto& res = results[0];
    const SimResult& sim = *res.sim;
    for (std::size_t t = 0; t < res.predicted_mse.size(); ++t)
      worst_mse = std::max(worst_mse, rel(sim.empirical_mse[t], res.predicted_mse[t]));
    drift = std::max(drift, sim.max_mean_drift);
    if (kind == QuantizerKind::dithered_uniform) {
      const auto& model_rates = res.target.solution->r_star;
      const double rc = ecsq_rate_constant();
      for (std::size_t i = 0; i < model_rates.nodes(); ++i)
        for (std::size_t t = 0; t < model_rates.horizon(); ++t) {
          const double model_rate = model_rates(i, t);
          const double gap = std::abs(sim.empirical_rate(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) - model_rate);
          worst_any = std::max(worst_any, gap);
          if (model_rate <= 0.0) continue;  // saturated slot
          worst_gap = std::max(worst_gap, gap);
          min_rate = std::min(min_rate, model_rate);
          ++checked_slots;
        }
      (void)rc;
    }
  }
  ok = worst_mse <= 0.05 && worst_gap <= 0.15 && checked_slots > 0;
  return {{ok, "EMSE target " + fmt_g(kSimEmseDb) + " dB: max MSE rel err " + fmt_g(worst_mse) +
                   " (tol 0.05); dithered entropy gap " + fmt_g(worst_gap) + " bits over " +
                   std::to_string(checked_slots) + " unsaturated slots, min model rate " + fmt_g(min_rate) +
                   " (tol 0.15)"},
          drift};
}

Outcome c10_sweep(const fs::path& out, unsigned threads) {
  ExperimentConfig c;  // desk-scale defaults: 8 graphs, rho in {0.35, 0.45}, L=1000, 100 trials,
                       // EMSE targets 0.5, 1, 2 and 3 dB
  c.horizon = 7;
  c.simulation.quantizer_kind = QuantizerKind::gaussian_noise_proxy;
  c.model.family = QuantizerFamily::vq_proxy;
  const auto s = cmd_sweep(c, {out, threads, nullptr});

  const auto rows = read_lines(out / "sweep.csv");
  const auto summary = read_lines(out / "sweep_summary.csv");
  bool well_formed = rows.size() == 1 + 8 * 2 * 4 && summary.size() == 1 + 2 * 4;
  for (const auto& r : rows) well_formed = well_formed && split(r).size() == 14;
  for (std::size_t k = 1; k < rows.size() && well_formed; ++k) {
    const auto cells = split(rows[k]);
    for (std::size_t col : {1u, 5u, 6u, 7u, 8u, 9u, 10u}) {
      try {
        std::size_t used = 0;
        std::stod(cells[col], &used);
        well_formed = well_formed && used == cells[col].size();
      } catch (...) {
        well_formed = false;
      }
    }
    well_formed = well_formed && cells[12] == "ok";
  }
  double worst = 0;
  if (well_formed) {
    const auto header = split(summary[0]);
    const auto col = [&](const std::string& name) {
      return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    };
    for (std::size_t k = 1; k < summary.size(); ++k) {
      const auto cells = split(summary[k]);
      worst = std::max(worst, rel(std::stod(cells[col("empirical_Ragg")]), std::stod(cells[col("predicted_Ragg")])));
    }
  }
  const bool ok = well_formed && s.failed == 0 && worst <= 0.05;
  return {ok, std::to_string(s.rows.size()) + " rows, " + std::to_string(summary.size() - 1) +
                  " averaged settings, " + std::to_string(s.failed) + " failed, CSV " +
                  (well_formed ? "well-formed" : "MALFORMED") + ", max averaged R_agg rel gap " + fmt_g(worst) +
                  " (tol 0.05)"};
}

Outcome c11_determinism(const fs::path& first, const fs::path& second) {
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(first)) {
    if (!entry.is_regular_file()) continue;
    const fs::path relative = fs::relative(entry.path(), first);
    ++files;
    if (!fs::exists(second / relative) || slurp(entry.path()) != slurp(second / relative)) ++differing;
  }
  return {files > 0 && differing == 0,
          std::to_string(files) + " files compared (rerun with 2 threads), " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "qcons_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  int failures = 0;

  // budget_secs <= 0 means no runtime limit for the criterion.
  auto report = [&](int id, const std::string& name, double budget_secs, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget_secs > 0 && secs > budget_secs) {
      o.pass = false;
      o.detail += "; runtime over budget of " + fmt_g(budget_secs) + " s";
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %2d %-34s %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  const fs::path run1 = root / "run1";
  const fs::path run2 = root / "run2";
  report(1, "moment propagation closed form", 1, c1_moment_closed_form);
  report(2, "posynomial extraction", 30, c2_posynomial_extraction);
  report(3, "optimizer vs grid oracle", 300, c3_grid_oracle);
  report(4, "closed-form optimum", 1, c4_closed_form_optimum);
  report(5, "gradient check", 10, c5_gradients);
  report(6, "feasible-set ordering", 120, c6_feasible_set_ordering);
  report(7, "rate structure", 120, [&] { return c7_rate_structure(run1 / "c7", 1); });
  double drift = 0;
  report(8, "simulation agreement", 600, [&] {
    SimCheck s = c8_simulation(run1 / "c8", 1);
    drift = s.drift;
    return s.agreement;
  });
  report(9, "average preservation", 0, [&] {
    return Outcome{drift <= 1e-10, "max relative drift of the per-coordinate mean " + fmt_g(drift) + " (tol 1e-10)"};
  });
  report(10, "protocol-scale sweep", 1800, [&] { return c10_sweep(run1 / "c10", 1); });
  report(11, "determinism", 0, [&] {
    c7_rate_structure(run2 / "c7", 2);
    c8_simulation(run2 / "c8", 2);
    c10_sweep(run2 / "c10", 2);
    return c11_determinism(run1, run2);
  });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
