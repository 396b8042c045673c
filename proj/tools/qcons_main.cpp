// qcons: command line driver for quantized consensus rate allocation.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qcons/config.hpp"
#include "qcons/errors.hpp"
#include "qcons/harness.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct GlobalFlags {
  std::string config_path;
  std::string out;
  unsigned threads = 1;
  bool full_scale = false;
  std::string mode;
  std::string constraint;
  std::vector<double> mse_targets;
  std::optional<double> tol;
};

qcons::ExperimentConfig resolve_config(const GlobalFlags& flags) {
  qcons::ExperimentConfig config =
      flags.config_path.empty() ? qcons::ExperimentConfig{} : qcons::load_config(flags.config_path);
  if (flags.full_scale) qcons::apply_full_scale(config);
  if (!flags.mode.empty()) {
    if (flags.mode == "variable") config.optimizer.mode = qcons::ModeChoice::variable;
    else if (flags.mode == "constant") config.optimizer.mode = qcons::ModeChoice::constant;
    else if (flags.mode == "auto") config.optimizer.mode = qcons::ModeChoice::automatic;
    else throw qcons::ConfigError("--mode", "expected variable, constant or auto");
  }
  if (!flags.constraint.empty()) {
    if (flags.constraint == "network") config.optimizer.constraint = qcons::ConstraintKind::network;
    else if (flags.constraint == "max-node") config.optimizer.constraint = qcons::ConstraintKind::max_node;
    else if (flags.constraint == "per-node") config.optimizer.constraint = qcons::ConstraintKind::per_node;
    else throw qcons::ConfigError("--constraint", "expected network, max-node or per-node");
  }
  if (!flags.mse_targets.empty()) {
    for (double v : flags.mse_targets)
      if (!(v > 0)) throw qcons::ConfigError("--mse-target", "must be positive");
    config.optimizer.mse_targets = flags.mse_targets;
    config.optimizer.emse_targets_db.clear();
  }
  if (flags.tol) {
    if (!(*flags.tol > 0)) throw qcons::ConfigError("--tol", "must be positive");
    config.optimizer.tol = *flags.tol;
  }
  if (!flags.out.empty()) config.output = flags.out;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-optimal quantization schedules for finite-horizon average consensus"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "Experiment config (JSON)");
  app.add_option("--out", flags.out, "Output directory (overrides config)");
  app.add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--full-scale", flags.full_scale, "32 graphs, L=10000, 1000 trials");
  app.add_option("--mode", flags.mode, "variable | constant | auto");
  app.add_option("--constraint", flags.constraint, "network | max-node | per-node");
  app.add_option("--mse-target", flags.mse_targets, "Absolute MSE target (repeatable)");
  app.add_option("--tol", flags.tol, "Solver relative tolerance");

  auto* gen = app.add_subcommand("gen-graph", "Generate a connected RGG and write graph.json");
  auto* tmin = app.add_subcommand("tmin", "Minimum lossless horizon for --mse-target");
  auto* optimize = app.add_subcommand("optimize", "Solve the rate allocation program per target");
  auto* simulate = app.add_subcommand("simulate", "Optimize, then Monte-Carlo each schedule");
  auto* sweep = app.add_subcommand("sweep", "Graphs x radii x horizons x targets trade-off table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const qcons::ExperimentConfig config = resolve_config(flags);
    qcons::RunOptions options;
    options.out = config.output;
    options.threads = flags.threads;
    options.log = &std::cout;

    if (gen->parsed()) {
      qcons::cmd_gen_graph(config, options);
    } else if (tmin->parsed()) {
      if (flags.mse_targets.size() != 1)
        throw qcons::ConfigError("--mse-target", "tmin needs exactly one target");
      qcons::cmd_tmin(config, flags.mse_targets.front(), options);
    } else if (optimize->parsed()) {
      qcons::cmd_optimize(config, options);
    } else if (simulate->parsed()) {
      qcons::cmd_simulate(config, options);
    } else if (sweep->parsed()) {
      qcons::cmd_sweep(config, options);
    }
  } catch (const qcons::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
