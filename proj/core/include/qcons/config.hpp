#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qcons/graph.hpp"
#include "qcons/rate_model.hpp"
#include "qcons/simulator.hpp"

namespace qcons {

struct GraphConfig {
  std::size_t m = 20;
  std::optional<double> rho_c = 0.35;
  std::uint64_t seed = 1;
  int retries = 100;
  std::optional<std::vector<Edge>> edges;  // explicit topology instead of an RGG
  std::optional<std::string> file;         // graph JSON written by gen-graph

  bool operator==(const GraphConfig&) const = default;
};

struct SignalConfig {
  double sigma_x2 = 1.0;
  std::optional<double> sigma_n2 = 0.5;
  std::optional<double> snr_db;  // alternative to sigma_n2: 10 log10(sigma_x2 / sigma_n2)
  std::size_t length = 1000;

  double noise_variance() const;
  bool operator==(const SignalConfig&) const = default;
};

struct ModelConfig {
  QuantizerFamily family = QuantizerFamily::ecsq;
  std::optional<double> r_c;    // nullopt: family default
  std::optional<double> d_max;  // nullopt: nonzero-probability rule with p_nonzero
  double p_nonzero = 0.01;

  RdModel resolve() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class ModeChoice { variable, constant, automatic };
enum class ConstraintKind { network, max_node, per_node };

struct OptimizerConfig {
  ModeChoice mode = ModeChoice::automatic;
  ConstraintKind constraint = ConstraintKind::network;
  double tol = 1e-4;
  std::vector<double> mse_targets;
  // Converted via the lossless MSE at T. The default applies only when a
  // config names neither mse_targets nor from-emse.
  std::vector<double> emse_targets_db{0.5, 1.0, 2.0, 3.0};
  std::vector<double> node_targets;     // per_node constraint, one per node
  std::size_t variable_limit = 100;     // automatic mode: variable iff m*T <= limit

  bool operator==(const OptimizerConfig&) const = default;
};

struct SimulationConfig {
  std::size_t trials = 100;
  QuantizerKind quantizer_kind = QuantizerKind::gaussian_noise_proxy;
  std::uint64_t seed = 7;

  bool operator==(const SimulationConfig&) const = default;
};

struct SweepConfig {
  std::size_t graphs = 8;
  std::vector<double> rho_c{0.35, 0.45};
  std::vector<std::size_t> horizons;  // empty: use the top-level T

  bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
  GraphConfig graph;
  SignalConfig signal;
  std::size_t horizon = 7;
  ModelConfig model;
  OptimizerConfig optimizer;
  SimulationConfig simulation;
  SweepConfig sweep;
  std::string output = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError naming the JSON pointer of the first bad field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

std::string_view to_string(ModeChoice mode);
std::string_view to_string(ConstraintKind kind);

/// Full-scale protocol: 32 graphs, L = 10000, 1000 trials.
void apply_full_scale(ExperimentConfig& config);

}  // namespace qcons
