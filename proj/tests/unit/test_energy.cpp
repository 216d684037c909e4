#include <doctest.h>

#include "fedsim/energy.hpp"
#include "fedsim/errors.hpp"

using namespace fedsim;

namespace {

DeviceProfile phone(std::size_t id, int cores, double idle_w) {
  DeviceProfile p;
  p.id = id;
  p.tier = Tier::High;
  p.idle_power_w = idle_w;
  p.comm_power_w = {0.8, 1.4};
  ExecTargetSpec cpu;
  cpu.kind = TargetKind::Cpu;
  cpu.dvfs_steps = {{1.0e9, 2.0}, {2.8e9, 5.5}};
  cpu.cores = cores;
  cpu.base_throughput = 1e9;
  ExecTargetSpec gpu;
  gpu.kind = TargetKind::Gpu;
  gpu.dvfs_steps = {{0.7e9, 2.8}};
  gpu.base_throughput = 1e9;
  p.targets = {cpu, gpu};
  return p;
}

EnergyTrace busy_trace(std::vector<BusySegment> busy, double t_idle, double t_tx, SignalBand band,
                       TargetKind target = TargetKind::Cpu) {
  EnergyTrace t;
  t.active = true;
  t.target = target;
  t.busy = std::move(busy);
  t.t_idle = t_idle;
  t.t_tx = t_tx;
  t.t_round = t.busy_total() + t_idle + t_tx;
  t.signal_band = band;
  return t;
}

}  // namespace

TEST_CASE("comp_energy examples") {
  const auto p = phone(0, 1, 0.1);
  CHECK(comp_energy(busy_trace({{1, 2.0}}, 1.0, 0.0, SignalBand::Strong), p, TargetKind::Cpu) ==
        doctest::Approx(11.1));
  CHECK(comp_energy(busy_trace({}, 0.0, 0.0, SignalBand::Strong), p, TargetKind::Cpu) == 0.0);
  CHECK(comp_energy(busy_trace({{1, 1.0}, {0, 1.0}}, 0.0, 0.0, SignalBand::Strong), p,
                    TargetKind::Cpu) == doctest::Approx(7.5));
  // Per-core accounting sums back to the package power.
  const auto octa = phone(0, 8, 0.1);
  CHECK(comp_energy(busy_trace({{1, 2.0}}, 1.0, 0.0, SignalBand::Strong), octa, TargetKind::Cpu) ==
        doctest::Approx(11.1));
  CHECK(comp_energy(busy_trace({{0, 3.0}}, 0.5, 0.0, SignalBand::Strong, TargetKind::Gpu), p,
                    TargetKind::Gpu) == doctest::Approx(2.8 * 3 + 0.1 * 0.5));
}

TEST_CASE("comp_energy rejects bad traces") {
  const auto p = phone(0, 1, 0.1);
  CHECK_THROWS_AS(comp_energy(busy_trace({{1, -1.0}}, 0.0, 0.0, SignalBand::Strong), p, TargetKind::Cpu),
                  ContractViolation);
  CHECK_THROWS_AS(comp_energy(busy_trace({}, -0.5, 0.0, SignalBand::Strong), p, TargetKind::Cpu),
                  ContractViolation);
  CHECK_THROWS_AS(comp_energy(busy_trace({{5, 1.0}}, 0.0, 0.0, SignalBand::Strong), p, TargetKind::Cpu),
                  LookupError);
}

TEST_CASE("comm_energy examples") {
  const auto p = phone(0, 1, 0.1);
  CHECK(comm_energy(busy_trace({}, 0, 0.0, SignalBand::Strong), p) == 0.0);
  CHECK(comm_energy(busy_trace({}, 0, 5.0, SignalBand::Strong), p) == doctest::Approx(4.0));
  CHECK(comm_energy(busy_trace({}, 0, 5.0, SignalBand::Weak), p) >
        comm_energy(busy_trace({}, 0, 5.0, SignalBand::Strong), p));
  CHECK_THROWS_AS(comm_energy(busy_trace({}, 0, -1.0, SignalBand::Weak), p), ContractViolation);
}

TEST_CASE("idle_energy examples") {
  const auto p = phone(0, 1, 0.1);
  CHECK(idle_energy(p, 0.0) == 0.0);
  CHECK(idle_energy(p, 60.0) == doctest::Approx(6.0));
  const auto q = phone(1, 1, 0.3);
  CHECK(idle_energy(q, 60.0) / idle_energy(p, 60.0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(idle_energy(p, -1.0), ContractViolation);
}

TEST_CASE("energy_rewards") {
  const Fleet one({phone(0, 1, 0.1)}, {1, 0, 0});
  const std::vector<EnergyTrace> t1{busy_trace({{1, 2.0}}, 1.0, 5.0, SignalBand::Strong)};
  const auto r1 = energy_rewards(t1, {true}, one);
  CHECK(r1.r_energy_global == doctest::Approx(11.1 + 4.0));

  const Fleet two({phone(0, 1, 0.1), phone(1, 1, 0.1)}, {2, 0, 0});
  std::vector<EnergyTrace> t2{busy_trace({{1, 2.0}}, 1.0, 5.0, SignalBand::Strong),
                              EnergyTrace::idle(60.0)};
  const auto r2 = energy_rewards(t2, {true, false}, two);
  CHECK(r2.r_energy_local[0] == doctest::Approx(15.1));
  CHECK(r2.r_energy_local[1] == doctest::Approx(6.0));
  CHECK(r2.r_energy_global == doctest::Approx(21.1));
  CHECK(r2.total_comp() == doctest::Approx(11.1));
  CHECK(r2.total_comm() == doctest::Approx(4.0));
  CHECK(r2.total_idle() == doctest::Approx(6.0));

  const auto par = energy_rewards(t2, {true, false}, two, Exec::Parallel);
  CHECK(par.r_energy_global == r2.r_energy_global);
  CHECK(par.r_energy_local == r2.r_energy_local);

  CHECK_THROWS_AS(energy_rewards(t2, {false, true}, two), ContractViolation);
  CHECK_THROWS_AS(energy_rewards(t1, {true, false}, two), ContractViolation);
}
