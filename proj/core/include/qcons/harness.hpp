#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qcons/config.hpp"
#include "qcons/graph.hpp"
#include "qcons/optimizer.hpp"
#include "qcons/simulator.hpp"
#include "qcons/state_evolution.hpp"

namespace qcons {

struct RunOptions {
  std::filesystem::path out = "out";
  unsigned threads = 1;
  std::ostream* log = nullptr;  // human-readable summary lines; null = silent
};

/// A concrete network plus initial moments.
struct Instance {
  Graph graph;
  std::uint64_t graph_seed = 0;
  int attempts = 1;
  WeightMatrix weights;
  InitialMoments initial;
};

/// Builds the configured graph (explicit edges, a graph file, or a connected
/// RGG with retries). `rho_c` and `seed` override the RGG parameters.
Instance build_instance(const ExperimentConfig& config, std::optional<double> rho_c = std::nullopt,
                        std::optional<std::uint64_t> seed = std::nullopt);

DistortionMode resolve_mode(const OptimizerConfig& optimizer, std::size_t m, std::size_t horizon);

/// Absolute MSE targets: the explicit list followed by the EMSE-derived ones
/// (lossless * 10^(dB/10)).
std::vector<double> resolve_targets(const OptimizerConfig& optimizer, double lossless_at_horizon);

/// Result of one target of an optimize run. `status` is "ok", "infeasible"
/// or "failed"; `message` explains non-ok outcomes.
struct TargetOutcome {
  std::size_t index = 0;
  double mse_target = 0.0;
  std::string status;
  std::string message;
  std::optional<GgpSolution> solution;
};

TargetOutcome solve_target(const GgpProblem& problem, const OptimizerConfig& optimizer,
                           std::size_t index, double mse_target);

/// Fixed-format number for CSV output: 9 significant digits.
std::string format_number(double value);

struct GenGraphSummary {
  std::size_t m = 0;
  std::size_t edges = 0;
  double lambda2 = 0.0;
  std::uint64_t seed = 0;
  int attempts = 0;
  std::filesystem::path file;
};

struct TminSummary {
  std::size_t t_min = 0;
  std::vector<double> lossless_mse;  // t = 0..t_min
};

struct OptimizeSummary {
  DistortionMode mode = DistortionMode::per_node;
  double lossless_mse = 0.0;
  std::vector<TargetOutcome> outcomes;
};

struct SimulateOutcome {
  TargetOutcome target;
  std::vector<double> predicted_mse;  // t = 0..T
  std::optional<SimResult> sim;
};

struct SweepRow {
  std::uint64_t graph_seed = 0;
  double rho_c = 0.0;
  std::size_t horizon = 0;
  std::string mode;
  std::string quantizer_kind;
  std::size_t target_index = 0;
  double mse_target = 0.0;
  double predicted_mse = 0.0;
  double empirical_mse = 0.0;
  double emse_db = 0.0;
  double predicted_ragg = 0.0;
  double empirical_ragg = 0.0;
  long long tmin = -1;
  std::string status;
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  std::size_t failed = 0;
};

/// Writes <out>/graph.json.
GenGraphSummary cmd_gen_graph(const ExperimentConfig& config, const RunOptions& options);

/// Writes <out>/tmin.json. Throws InfeasibleError beyond the 10 m cap.
TminSummary cmd_tmin(const ExperimentConfig& config, double mse_target, const RunOptions& options);

/// Writes <out>/solution_<k>.json and <out>/rates_<k>.csv per target.
OptimizeSummary cmd_optimize(const ExperimentConfig& config, const RunOptions& options);

/// Optimize, then simulate each feasible target. Writes sim_<k>.json,
/// sim_<k>_mse.csv and sim_<k>_rates.csv.
std::vector<SimulateOutcome> cmd_simulate(const ExperimentConfig& config,
                                          const RunOptions& options);

/// Graphs x radii x horizons x targets. Writes sweep.csv (one row per point)
/// and sweep_summary.csv (averages over graphs, failures excluded).
SweepSummary cmd_sweep(const ExperimentConfig& config, const RunOptions& options);

}  // namespace qcons
