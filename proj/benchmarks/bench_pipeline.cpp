#include "cogload/gaze_features.hpp"
#include "cogload/model.hpp"
#include "cogload/physio_features.hpp"
#include "cogload/simulator.hpp"
#include "cogload/windowing.hpp"

#include <benchmark/benchmark.h>

using namespace cogload;

namespace {

const sim::GeneratedSignals& level() {
  static const sim::GeneratedSignals s = sim::generate_signals(sim::make_profile(0, 42), 0.0, 60.0, 42);
  return s;
}

void BM_GazeWindow(benchmark::State& state) {
  const auto& s = level();
  const std::span<const GazeSample> window(s.gaze.data(), s.gaze.size() / 4);
  for (auto _ : state) benchmark::DoNotOptimize(gaze::gaze_features_for_window(window, 15.0));
}
BENCHMARK(BM_GazeWindow)->Unit(benchmark::kMicrosecond);

void BM_PhysioWindow(benchmark::State& state) {
  const auto& s = level();
  const std::span<const PhysioSample> window(s.physio.data(), s.physio.size() / 4);
  for (auto _ : state) benchmark::DoNotOptimize(physio::physio_features_for_window(window));
}
BENCHMARK(BM_PhysioWindow)->Unit(benchmark::kMicrosecond);

void BM_FeatureSequence(benchmark::State& state) {
  const auto& s = level();
  for (auto _ : state) benchmark::DoNotOptimize(windowing::build_feature_sequence(s.gaze, s.physio, {0.0, 60.0}));
}
BENCHMARK(BM_FeatureSequence)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  model::ModelConfig cfg;
  cfg.hidden = static_cast<int>(state.range(0));
  cfg.head_hidden = cfg.hidden;
  const auto params = model::ModelParams::initialize(cfg, 1);
  const auto seq = windowing::build_feature_sequence(level().gaze, level().physio, {0.0, 60.0});
  for (auto _ : state) benchmark::DoNotOptimize(model::forward(params, seq, false));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
