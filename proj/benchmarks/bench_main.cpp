#include <benchmark/benchmark.h>

#include <qcons/graph.hpp>
#include <qcons/optimizer.hpp>
#include <qcons/simulator.hpp>
#include <qcons/state_evolution.hpp>

namespace {

using namespace qcons;

struct Instance {
  WeightMatrix w;
  InitialMoments init;
};

Instance make_instance(std::size_t m) {
  const auto rgg = generate_connected_rgg(m, 0.35, 7);
  return {metropolis_weights(rgg.graph), InitialMoments::signal_plus_noise(m, 1.0, 0.5)};
}

DistortionSchedule uniform_distortion(std::size_t m, std::size_t horizon, double value) {
  return DistortionSchedule::per_node(Matrix::Constant(static_cast<Eigen::Index>(m),
                                                       static_cast<Eigen::Index>(horizon), value));
}

// Network target 1 dB above the lossless MSE at the horizon.
double mid_target(const GgpProblem& p) { return p.mse_const * 1.2589254117941673; }

void BM_Propagate(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t horizon = 7;
  const Instance inst = make_instance(m);
  const auto d = uniform_distortion(m, horizon, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(propagate(inst.w, inst.init, d, horizon));
}
BENCHMARK(BM_Propagate)->Arg(10)->Arg(20)->Arg(50)->Unit(benchmark::kMicrosecond);

void BM_ExtractGgp(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Instance inst = make_instance(m);
  const RdModel model = RdModel::make(QuantizerFamily::ecsq);
  for (auto _ : state)
    benchmark::DoNotOptimize(extract_ggp(inst.w, inst.init, 7, model, DistortionMode::per_node));
}
BENCHMARK(BM_ExtractGgp)->Arg(10)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_SolveVariable(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto horizon = static_cast<std::size_t>(state.range(1));
  const Instance inst = make_instance(m);
  const GgpProblem p = extract_ggp(inst.w, inst.init, horizon, RdModel::make(QuantizerFamily::ecsq),
                                   DistortionMode::per_node);
  const double target = mid_target(p);
  for (auto _ : state) benchmark::DoNotOptimize(solve_variable_distortion(p, target));
}
BENCHMARK(BM_SolveVariable)->Args({10, 5})->Args({20, 5})->Args({20, 7})->Unit(benchmark::kMillisecond);

void BM_SolveConstant(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t horizon = 7;
  const Instance inst = make_instance(m);
  const GgpProblem p = extract_ggp(inst.w, inst.init, horizon, RdModel::make(QuantizerFamily::ecsq),
                                   DistortionMode::constant);
  const double target = mid_target(p);
  for (auto _ : state) benchmark::DoNotOptimize(solve_constant_distortion(p, target));
}
BENCHMARK(BM_SolveConstant)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  const auto kind = static_cast<QuantizerKind>(state.range(0));
  const std::size_t m = 20, horizon = 7;
  const Instance inst = make_instance(m);
  const RdModel model = RdModel::make(family_of(kind));
  const GgpProblem p = extract_ggp(inst.w, inst.init, horizon, model, DistortionMode::per_node);
  const GgpSolution s = solve_variable_distortion(p, mid_target(p));
  const auto states = propagate(inst.w, inst.init, s.d_star, horizon);
  const QuantizerSchedule schedule = make_quantizer_schedule(kind, s.d_star, states, model);
  SimOptions options;
  options.trials = 10;
  options.r_c = model.r_c;
  for (auto _ : state) benchmark::DoNotOptimize(run_consensus(inst.w, SignalSpec{}, schedule, options));
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_Simulate)
    ->Arg(static_cast<int>(QuantizerKind::gaussian_noise_proxy))
    ->Arg(static_cast<int>(QuantizerKind::dithered_uniform))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
