#include "qcons/harness.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include <fmt/core.h>

#include "parallel.hpp"
#include "qcons/errors.hpp"
#include "qcons/rng.hpp"

namespace qcons {

namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    add_line(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::logic_error("CSV row width mismatch");
    add_line(cells);
  }

  void save(const std::filesystem::path& path) const { write_text(path, text_); }

 private:
  void add_line(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) text_ += ',';
      text_ += cells[k];
    }
    text_ += '\n';
  }

  std::size_t columns_;
  std::string text_;
};

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }

std::string mode_name(DistortionMode mode) {
  return mode == DistortionMode::per_node ? "variable" : "constant";
}

void log_line(const RunOptions& options, const std::string& line) {
  if (options.log) *options.log << line << '\n';
}

std::vector<MomentState> predicted_states(const Instance& inst, const GgpSolution& sol,
                                          std::size_t horizon) {
  return propagate(inst.weights, inst.initial, sol.d_star, horizon);
}

json outcome_json(const TargetOutcome& o, const ExperimentConfig& config, DistortionMode mode,
                  double lossless) {
  json j{{"target_index", o.index},
         {"mse_target", o.mse_target},
         {"status", o.status},
         {"mode", mode_name(mode)},
         {"constraint", to_string(config.optimizer.constraint)},
         {"T", config.horizon},
         {"lossless_mse", lossless}};
  if (!o.message.empty()) j["message"] = o.message;
  if (o.solution) j["solution"] = to_json(*o.solution);
  return j;
}

struct SweepPoint {
  std::size_t rho_index;
  std::size_t horizon;
  std::size_t graph_index;
};

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  return fmt::format("{:.9g}", value);
}

Instance build_instance(const ExperimentConfig& config, std::optional<double> rho_c,
                        std::optional<std::uint64_t> seed) {
  const auto& gc = config.graph;
  std::optional<Graph> graph;
  std::uint64_t used_seed = seed.value_or(gc.seed);
  int attempts = 1;
  if (gc.edges && !rho_c) {
    graph.emplace(gc.m, *gc.edges);
  } else if (gc.file && !rho_c) {
    std::ifstream in(*gc.file);
    if (!in) throw ConfigError("/graph/file", "cannot open " + *gc.file);
    graph.emplace(graph_from_json(json::parse(in)));
  } else {
    const double radius = rho_c ? *rho_c : gc.rho_c.value_or(0.0);
    if (!(radius > 0)) throw ConfigError("/graph/rho_c", "must be positive");
    auto rgg = generate_connected_rgg(gc.m, radius, used_seed, gc.retries);
    used_seed = rgg.seed;
    attempts = rgg.attempts;
    graph.emplace(std::move(rgg.graph));
  }
  const double sigma_n2 = config.signal.noise_variance();
  auto weights = metropolis_weights(*graph);
  auto initial = InitialMoments::signal_plus_noise(graph->size(), config.signal.sigma_x2, sigma_n2);
  return Instance{std::move(*graph), used_seed, attempts, std::move(weights), std::move(initial)};
}

DistortionMode resolve_mode(const OptimizerConfig& optimizer, std::size_t m, std::size_t horizon) {
  switch (optimizer.mode) {
    case ModeChoice::variable: return DistortionMode::per_node;
    case ModeChoice::constant: return DistortionMode::constant;
    case ModeChoice::automatic:
      return m * horizon <= optimizer.variable_limit ? DistortionMode::per_node
                                                     : DistortionMode::constant;
  }
  return DistortionMode::constant;
}

std::vector<double> resolve_targets(const OptimizerConfig& optimizer, double lossless_at_horizon) {
  std::vector<double> targets = optimizer.mse_targets;
  for (double db : optimizer.emse_targets_db)
    targets.push_back(lossless_at_horizon * std::pow(10.0, db / 10.0));
  return targets;
}

TargetOutcome solve_target(const GgpProblem& problem, const OptimizerConfig& optimizer,
                           std::size_t index, double mse_target) {
  TargetOutcome out;
  out.index = index;
  out.mse_target = mse_target;
  SolverOptions opts;
  opts.tol = optimizer.tol;
  try {
    switch (optimizer.constraint) {
      case ConstraintKind::network:
        out.solution = problem.mode == DistortionMode::per_node
                           ? solve_variable_distortion(problem, mse_target, opts)
                           : solve_constant_distortion(problem, mse_target, opts);
        break;
      case ConstraintKind::max_node:
        out.solution = solve_with_node_constraints(problem, {mse_target}, opts);
        break;
      case ConstraintKind::per_node:
        out.solution = solve_with_node_constraints(
            problem, optimizer.node_targets.empty() ? std::vector<double>{mse_target}
                                                    : optimizer.node_targets,
            opts);
        break;
    }
    out.status = "ok";
  } catch (const InfeasibleError& e) {
    out.status = "infeasible";
    out.message = e.what();
  } catch (const std::exception& e) {
    out.status = "failed";
    out.message = e.what();
  }
  return out;
}

GenGraphSummary cmd_gen_graph(const ExperimentConfig& config, const RunOptions& options) {
  Instance inst = build_instance(config);
  GenGraphSummary s;
  s.m = inst.graph.size();
  s.edges = inst.graph.edges().size();
  s.lambda2 = second_largest_eigenvalue(inst.weights);
  s.seed = inst.graph_seed;
  s.attempts = inst.attempts;
  s.file = options.out / "graph.json";
  write_json(s.file, graph_to_json(inst.graph));
  log_line(options, fmt::format("m={} edges={} lambda2={:.9g} seed={} attempts={}", s.m, s.edges,
                                s.lambda2, s.seed, s.attempts));
  return s;
}

TminSummary cmd_tmin(const ExperimentConfig& config, double mse_target, const RunOptions& options) {
  Instance inst = build_instance(config);
  TminSummary s;
  s.t_min = t_min(inst.weights, inst.initial, mse_target);
  const auto states = propagate(inst.weights, inst.initial,
                                DistortionSchedule::zeros(inst.graph.size(), s.t_min), s.t_min);
  for (const auto& st : states) s.lossless_mse.push_back(network_mse(st));
  write_json(options.out / "tmin.json",
             {{"mse_target", mse_target}, {"t_min", s.t_min}, {"lossless_mse", s.lossless_mse}});
  log_line(options, fmt::format("t_min={}", s.t_min));
  for (std::size_t t = 0; t < s.lossless_mse.size(); ++t)
    log_line(options, fmt::format("  t={} lossless_mse={:.9g}", t, s.lossless_mse[t]));
  return s;
}

OptimizeSummary cmd_optimize(const ExperimentConfig& config, const RunOptions& options) {
  Instance inst = build_instance(config);
  const std::size_t m = inst.graph.size();
  const std::size_t horizon = config.horizon;
  OptimizeSummary summary;
  summary.mode = resolve_mode(config.optimizer, m, horizon);
  const GgpProblem problem =
      extract_ggp(inst.weights, inst.initial, horizon, config.model.resolve(), summary.mode);
  summary.lossless_mse = problem.mse_const;

  const auto targets = resolve_targets(config.optimizer, problem.mse_const);
  summary.outcomes.resize(targets.size());
  detail::parallel_for(targets.size(), options.threads, [&](std::size_t k, unsigned) {
    summary.outcomes[k] = solve_target(problem, config.optimizer, k, targets[k]);
  });

  for (const auto& o : summary.outcomes) {
    write_json(options.out / fmt::format("solution_{}.json", o.index),
               outcome_json(o, config, summary.mode, problem.mse_const));
    CsvWriter csv({"node", "t", "rate_bits", "distortion", "sigma2"});
    if (o.solution) {
      const Vector var = problem.variances(o.solution->d_star.variables());
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < horizon; ++t)
          csv.row({num(i), num(t), num(o.solution->r_star(i, t)), num(o.solution->d_star.at(i, t)),
                   num(var(static_cast<Eigen::Index>(problem.slot(i, t))))});
    }
    csv.save(options.out / fmt::format("rates_{}.csv", o.index));
    log_line(options,
             o.solution ? fmt::format("target[{}] mse={:.9g} status=ok R_agg={:.9g} bits", o.index,
                                      o.mse_target, o.solution->objective_bits)
                        : fmt::format("target[{}] mse={:.9g} status={} {}", o.index, o.mse_target,
                                      o.status, o.message));
  }
  return summary;
}

std::vector<SimulateOutcome> cmd_simulate(const ExperimentConfig& config,
                                          const RunOptions& options) {
  OptimizeSummary opt = cmd_optimize(config, options);
  Instance inst = build_instance(config);
  const std::size_t m = inst.graph.size();
  const std::size_t horizon = config.horizon;
  const RdModel model = config.model.resolve();
  const SignalSpec signal{config.signal.sigma_x2, config.signal.noise_variance(),
                          config.signal.length};

  std::vector<SimulateOutcome> results;
  for (const auto& o : opt.outcomes) {
    SimulateOutcome r;
    r.target = o;
    if (o.solution) {
      const auto states = predicted_states(inst, *o.solution, horizon);
      for (const auto& st : states) r.predicted_mse.push_back(network_mse(st));
      const auto schedule =
          make_quantizer_schedule(config.simulation.quantizer_kind, o.solution->d_star, states, model);
      SimOptions sim_opts;
      sim_opts.trials = config.simulation.trials;
      sim_opts.seed = mix_key({config.simulation.seed, o.index});
      sim_opts.threads = options.threads;
      sim_opts.r_c = model.r_c;
      r.sim = run_consensus(inst.weights, signal, schedule, sim_opts);

      json j = to_json(*r.sim);
      j["target_index"] = o.index;
      j["mse_target"] = o.mse_target;
      j["quantizer_kind"] = to_string(config.simulation.quantizer_kind);
      j["predicted_mse_per_iter"] = r.predicted_mse;
      j["predicted_Ragg"] = o.solution->objective_bits;
      write_json(options.out / fmt::format("sim_{}.json", o.index), j);

      CsvWriter mse_csv({"t", "predicted_mse", "empirical_mse"});
      for (std::size_t t = 0; t <= horizon; ++t)
        mse_csv.row({num(t), num(r.predicted_mse[t]), num(r.sim->empirical_mse[t])});
      mse_csv.save(options.out / fmt::format("sim_{}_mse.csv", o.index));

      CsvWriter rate_csv({"node", "t", "model_rate_bits", "empirical_rate_bits", "distortion",
                          "empirical_distortion", "sigma2", "empirical_variance", "zero_rate"});
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < horizon; ++t) {
          const auto a = static_cast<Eigen::Index>(i);
          const auto b = static_cast<Eigen::Index>(t);
          const auto& slot = schedule.at(i, t);
          rate_csv.row({num(i), num(t), num(o.solution->r_star(i, t)),
                        num(r.sim->empirical_rate(a, b)), num(slot.distortion),
                        num(r.sim->empirical_distortion(a, b)), num(slot.sigma2),
                        num(r.sim->empirical_variance(a, b)), slot.zero_rate ? "1" : "0"});
        }
      rate_csv.save(options.out / fmt::format("sim_{}_rates.csv", o.index));
      log_line(options, fmt::format("target[{}] predicted MSE(T)={:.9g} empirical={:.9g} "
                                    "R_agg predicted={:.9g} empirical={:.9g}",
                                    o.index, r.predicted_mse.back(), r.sim->empirical_mse.back(),
                                    o.solution->objective_bits, r.sim->aggregate_rate_bits));
    }
    results.push_back(std::move(r));
  }
  return results;
}

SweepSummary cmd_sweep(const ExperimentConfig& config, const RunOptions& options) {
  const std::vector<std::size_t> horizons =
      config.sweep.horizons.empty() ? std::vector<std::size_t>{config.horizon} : config.sweep.horizons;
  const RdModel model = config.model.resolve();
  const SignalSpec signal{config.signal.sigma_x2, config.signal.noise_variance(),
                          config.signal.length};
  const std::string kind{to_string(config.simulation.quantizer_kind)};

  std::vector<SweepPoint> points;
  for (std::size_t r = 0; r < config.sweep.rho_c.size(); ++r)
    for (std::size_t horizon : horizons)
      for (std::size_t g = 0; g < config.sweep.graphs; ++g) points.push_back({r, horizon, g});

  std::vector<std::vector<SweepRow>> per_point(points.size());
  detail::parallel_for(points.size(), options.threads, [&](std::size_t p, unsigned) {
    const SweepPoint& pt = points[p];
    const double rho = config.sweep.rho_c[pt.rho_index];
    auto& rows = per_point[p];
    SweepRow base;
    base.rho_c = rho;
    base.horizon = pt.horizon;
    base.quantizer_kind = kind;
    base.graph_seed = config.graph.seed + pt.graph_index;

    std::optional<Instance> inst;
    std::optional<GgpProblem> problem;
    std::vector<double> targets;
    std::string setup_error;
    try {
      inst.emplace(build_instance(config, rho, config.graph.seed + pt.graph_index));
      base.graph_seed = inst->graph_seed;
      const DistortionMode mode = resolve_mode(config.optimizer, inst->graph.size(), pt.horizon);
      base.mode = mode_name(mode);
      problem.emplace(extract_ggp(inst->weights, inst->initial, pt.horizon, model, mode));
      targets = resolve_targets(config.optimizer, problem->mse_const);
    } catch (const std::exception& e) {
      setup_error = e.what();
      targets = resolve_targets(config.optimizer, std::nan(""));
    }

    for (std::size_t k = 0; k < targets.size(); ++k) {
      SweepRow row = base;
      row.target_index = k;
      row.mse_target = targets[k];
      row.predicted_mse = row.empirical_mse = row.emse_db = std::nan("");
      row.predicted_ragg = row.empirical_ragg = std::nan("");
      if (!setup_error.empty()) {
        row.status = "failed";
        rows.push_back(row);
        continue;
      }
      try {
        row.tmin = static_cast<long long>(t_min(inst->weights, inst->initial, targets[k]));
      } catch (const InfeasibleError&) {
        row.tmin = -1;
      }
      TargetOutcome o = solve_target(*problem, config.optimizer, k, targets[k]);
      if (!o.solution) {
        row.status = o.status;
        rows.push_back(row);
        continue;
      }
      try {
        const auto states = predicted_states(*inst, *o.solution, pt.horizon);
        const auto schedule = make_quantizer_schedule(config.simulation.quantizer_kind,
                                                      o.solution->d_star, states, model);
        SimOptions sim_opts;
        sim_opts.trials = config.simulation.trials;
        sim_opts.seed = mix_key({config.simulation.seed, pt.rho_index, pt.horizon,
                                 pt.graph_index, k});
        sim_opts.threads = 1;
        sim_opts.r_c = model.r_c;
        const SimResult sim = run_consensus(inst->weights, signal, schedule, sim_opts);
        row.predicted_mse = network_mse(states.back());
        row.empirical_mse = sim.empirical_mse.back();
        row.emse_db = emse_db(row.empirical_mse, problem->mse_const).value_or(std::nan(""));
        row.predicted_ragg = o.solution->objective_bits;
        row.empirical_ragg = sim.aggregate_rate_bits;
        row.status = "ok";
      } catch (const std::exception&) {
        row.status = "failed";
      }
      rows.push_back(row);
    }
  });

  SweepSummary summary;
  CsvWriter csv({"graph_seed", "rho_c", "T", "mode", "quantizer_kind", "mse_target",
                 "predicted_mse", "empirical_mse", "emse_db", "predicted_Ragg", "empirical_Ragg",
                 "tmin", "status", "target_index"});
  // (rho, T, mode, target) -> accumulated sums over ok rows
  struct Group {
    std::size_t ok = 0, failed = 0;
    double target = 0, predicted = 0, empirical = 0, emse = 0, pr = 0, er = 0, tmin = 0;
  };
  std::map<std::tuple<std::size_t, std::size_t, std::string, std::size_t>, Group> groups;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (const SweepRow& row : per_point[p]) {
      csv.row({std::to_string(row.graph_seed), num(row.rho_c), num(row.horizon), row.mode,
               row.quantizer_kind, num(row.mse_target), num(row.predicted_mse),
               num(row.empirical_mse), num(row.emse_db), num(row.predicted_ragg),
               num(row.empirical_ragg), std::to_string(row.tmin), row.status,
               num(row.target_index)});
      auto& g = groups[{points[p].rho_index, row.horizon, row.mode, row.target_index}];
      if (row.status != "ok") {
        ++g.failed;
        ++summary.failed;
      } else {
        ++g.ok;
        g.target += row.mse_target;
        g.predicted += row.predicted_mse;
        g.empirical += row.empirical_mse;
        g.emse += row.emse_db;
        g.pr += row.predicted_ragg;
        g.er += row.empirical_ragg;
        g.tmin += static_cast<double>(row.tmin);
      }
      summary.rows.push_back(row);
    }
  }
  csv.save(options.out / "sweep.csv");

  CsvWriter avg({"rho_c", "T", "mode", "quantizer_kind", "target_index", "n_ok", "n_failed",
                 "mse_target", "predicted_mse", "empirical_mse", "emse_db", "predicted_Ragg",
                 "empirical_Ragg", "tmin"});
  for (const auto& [key, g] : groups) {
    const auto& [rho_index, horizon, mode, target_index] = key;
    const double n = g.ok ? static_cast<double>(g.ok) : std::nan("");
    avg.row({num(config.sweep.rho_c[rho_index]), num(horizon), mode, kind, num(target_index),
             num(g.ok), num(g.failed), num(g.target / n), num(g.predicted / n),
             num(g.empirical / n), num(g.emse / n), num(g.pr / n), num(g.er / n),
             num(g.tmin / n)});
  }
  avg.save(options.out / "sweep_summary.csv");
  log_line(options, fmt::format("sweep: {} rows, {} failed", summary.rows.size(), summary.failed));
  return summary;
}

}  // namespace qcons
