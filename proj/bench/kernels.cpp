#include <benchmark/benchmark.h>

#include <numeric>

#include "fedsim/config.hpp"
#include "fedsim/energy.hpp"
#include "fedsim/simulator.hpp"
#include "fedsim/trainer.hpp"
#include "fedsim/variance.hpp"

using namespace fedsim;

namespace {

ExperimentConfig bench_config() {
  ExperimentConfig cfg;
  cfg.fleet = default_fleet_spec(30, 70, 100);
  cfg.params.participants = 20;
  return cfg;
}

const World& world() {
  static const World w = build_world(bench_config());
  return w;
}

Exec mode(const benchmark::State& s) { return s.range(0) ? Exec::Parallel : Exec::Serial; }

void conditions(benchmark::State& s) {
  const auto cfg = bench_config();
  std::uint64_t round = 0;
  for (auto _ : s)
    benchmark::DoNotOptimize(
        sample_round_conditions(cfg.variance, world().fleet.size(), round++, cfg.seeds.variance, mode(s)));
}

void local_training(benchmark::State& s) {
  const auto& w = world();
  const auto model = init_model(w.nn.trainable, 1);
  std::vector<std::size_t> devices(w.params.participants);
  std::iota(devices.begin(), devices.end(), 0);
  const LocalTrainParams lp{w.params.batch_size, w.params.local_epochs, w.params.local_lr};
  std::uint64_t round = 0;
  for (auto _ : s)
    benchmark::DoNotOptimize(
        train_participants(w.nn.trainable, model, w.train, w.shards, devices, lp, 1, round++, mode(s)));
}

void evaluation(benchmark::State& s) {
  const auto& w = world();
  const auto model = init_model(w.nn.trainable, 1);
  for (auto _ : s) benchmark::DoNotOptimize(evaluate(w.nn.trainable, model, w.test, mode(s)));
}

void round_energy(benchmark::State& s) {
  const auto& w = world();
  std::vector<EnergyTrace> traces(w.fleet.size(), EnergyTrace::idle(12.0));
  std::vector<bool> selected(w.fleet.size(), false);
  for (std::size_t d = 0; d < traces.size(); d += 4) {
    auto& t = traces[d];
    t.active = true;
    t.busy = {{0, 4.0}, {1, 3.0}};
    t.t_idle = 2.0;
    t.t_tx = 3.0;
    selected[d] = true;
  }
  for (auto _ : s) benchmark::DoNotOptimize(energy_rewards(traces, selected, w.fleet, mode(s)));
}

}  // namespace

BENCHMARK(conditions)->ArgName("parallel")->Arg(0)->Arg(1);
BENCHMARK(local_training)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(evaluation)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(round_energy)->ArgName("parallel")->Arg(0)->Arg(1);

BENCHMARK_MAIN();
