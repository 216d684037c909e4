#include <doctest.h>

#include "fedsim/device_model.hpp"
#include "fedsim/errors.hpp"

using namespace fedsim;

namespace {

DeviceProfile two_step_cpu() {
  DeviceProfile p;
  p.id = 0;
  p.tier = Tier::Mid;
  p.idle_power_w = 0.1;
  p.comm_power_w = {0.8, 1.4};
  ExecTargetSpec cpu;
  cpu.kind = TargetKind::Cpu;
  cpu.dvfs_steps = {{1.0e9, 2.0}, {2.0e9, 5.5}};
  cpu.cores = 4;
  cpu.base_throughput = 100.0;
  ExecTargetSpec gpu;
  gpu.kind = TargetKind::Gpu;
  gpu.dvfs_steps = {{0.7e9, 2.8}};
  gpu.base_throughput = 60.0;
  p.targets = {cpu, gpu};
  return p;
}

}  // namespace

TEST_CASE("build_fleet sizes and tier-major ids") {
  const auto big = build_fleet(default_fleet_spec(30, 70, 100));
  CHECK(big.size() == 200);
  CHECK(big.tier_counts() == std::array<std::size_t, 3>{30, 70, 100});

  const auto one = build_fleet(default_fleet_spec(1, 0, 0));
  REQUIRE(one.size() == 1);
  CHECK(one[0].tier == Tier::High);

  const auto f = build_fleet(default_fleet_spec(3, 7, 10));
  REQUIRE(f.size() == 20);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(f[i].id == i);
    CHECK(f[i].tier == (i < 3 ? Tier::High : i < 10 ? Tier::Mid : Tier::Low));
  }
}

TEST_CASE("build_fleet rejects empty fleets and CPU-less templates") {
  CHECK_THROWS_AS(build_fleet(default_fleet_spec(0, 0, 0)), ConfigError);
  auto spec = default_fleet_spec(1, 1, 1);
  spec.templates[1].targets.erase(spec.templates[1].targets.begin());
  CHECK_THROWS_AS(build_fleet(spec), ConfigError);
}

TEST_CASE("effective_throughput") {
  const auto p = two_step_cpu();
  const InterferenceState none{};
  CHECK(effective_throughput(p, {TargetKind::Cpu, 1}, none) == doctest::Approx(100.0));
  CHECK(effective_throughput(p, {TargetKind::Cpu, 0}, none) == doctest::Approx(50.0));
  CHECK(effective_throughput(p, {TargetKind::Gpu, 0}, {0.75, 0.3}) == doctest::Approx(60.0));
  CHECK(effective_throughput(p, {TargetKind::Cpu, 1}, {0.5, 0.0}) == doctest::Approx(50.0));
  CHECK(effective_throughput(p, {TargetKind::Cpu, 1}, {1.0, 0.0}) ==
        doctest::Approx(100.0 * (1.0 - kMaxCpuContention)));
  CHECK_THROWS_AS(effective_throughput(p, {TargetKind::Cpu, 2}, none), LookupError);
  auto cpu_only = p;
  cpu_only.targets.pop_back();
  CHECK_THROWS_AS(effective_throughput(cpu_only, {TargetKind::Gpu, 0}, none), LookupError);
}

TEST_CASE("power_at matches the phone power table at the top step") {
  const auto f = build_fleet(default_fleet_spec(1, 1, 1));
  CHECK(power_at(f[0], top_cpu(f[0])).busy_w == doctest::Approx(5.5));
  const auto& low_gpu = f[2].target(TargetKind::Gpu);
  CHECK(power_at(f[2], {TargetKind::Gpu, low_gpu.dvfs_steps.size() - 1}).busy_w ==
        doctest::Approx(2.0));
  for (const auto& d : f) CHECK(power_at(d, top_cpu(d)).idle_w == d.idle_power_w);
  CHECK_THROWS_AS(power_at(f[0], {TargetKind::Cpu, 99}), LookupError);
}

TEST_CASE("DVFS table spans min fraction to peak with cubic power") {
  const auto t = make_dvfs_table(2.0e9, 8, 4.0, 0.3);
  REQUIRE(t.size() == 8);
  CHECK(t.front().frequency_hz == doctest::Approx(0.6e9));
  CHECK(t.back().frequency_hz == doctest::Approx(2.0e9));
  CHECK(t.back().busy_power_w == doctest::Approx(4.0));
  CHECK(t.front().busy_power_w == doctest::Approx(4.0 * (0.1 + 0.9 * 0.027)));
  for (std::size_t i = 1; i < t.size(); ++i) {
    CHECK(t[i].frequency_hz > t[i - 1].frequency_hz);
    CHECK(t[i].busy_power_w > t[i - 1].busy_power_w);
    CHECK(t[i].frequency_hz - t[i - 1].frequency_hz == doctest::Approx(0.2e9));
  }
  const auto single = make_dvfs_table(1.0e9, 1, 2.0);
  REQUIRE(single.size() == 1);
  CHECK(single[0].busy_power_w == doctest::Approx(2.0));
  CHECK_THROWS_AS(make_dvfs_table(1.0e9, 0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_dvfs_table(1.0e9, 3, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(make_dvfs_table(1.0e9, 3, 1.0, 0.0), ConfigError);
}

TEST_CASE("action space exposes evenly spaced levels") {
  const auto f = build_fleet(default_fleet_spec(1, 0, 0));
  const ActionSpace a({TargetKind::Cpu, TargetKind::Gpu}, 4);
  CHECK(a.size() == 8);
  CHECK(a.name(0) == "cpu:0");
  CHECK(a.name(7) == "gpu:3");
  CHECK(a.parse("gpu:2") == 6);
  CHECK(a.kind(5) == TargetKind::Gpu);
  CHECK(a.level(5) == 1);
  const auto lo = a.resolve(f[0], 0);
  const auto hi = a.resolve(f[0], 3);
  CHECK(lo == ExecTargetChoice{TargetKind::Cpu, 0});
  CHECK(hi == top_cpu(f[0]));
  CHECK(a.resolve(f[0], 7).step == f[0].target(TargetKind::Gpu).dvfs_steps.size() - 1);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.available(f[0], i));
  CHECK_THROWS(a.parse("npu:0"));
}

TEST_CASE("tier lookups") {
  CHECK(parse_tier("High") == Tier::High);
  CHECK(parse_target_kind("gpu") == TargetKind::Gpu);
  CHECK_THROWS_AS(parse_tier("Ultra"), LookupError);
  CHECK_THROWS_AS(parse_target_kind("dsp"), LookupError);
  const auto f = build_fleet(default_fleet_spec(0, 1, 0));
  CHECK(f[0].comm_power(SignalBand::Weak) > f[0].comm_power(SignalBand::Strong));
  CHECK_THROWS_AS(f.at(1), LookupError);
}
