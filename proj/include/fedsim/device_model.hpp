#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/conditions.hpp"

namespace fedsim {

enum class Tier { High = 0, Mid = 1, Low = 2 };
inline constexpr std::size_t kNumTiers = 3;

enum class TargetKind { Cpu = 0, Gpu = 1 };

std::string_view to_string(Tier t);
std::string_view to_string(TargetKind k);
Tier parse_tier(std::string_view s);
TargetKind parse_target_kind(std::string_view s);

struct DvfsStep {
  double frequency_hz;
  double busy_power_w;
};

struct ExecTargetSpec {
  TargetKind kind = TargetKind::Cpu;
  std::vector<DvfsStep> dvfs_steps;  // strictly increasing frequency
  int cores = 1;                     // CPU per-core accounting; 1 for GPU
  double base_throughput = 0.0;      // FLOP/s at the top step

  const DvfsStep& top() const { return dvfs_steps.back(); }
};

struct DeviceProfile {
  std::size_t id = 0;
  Tier tier = Tier::Low;
  std::vector<ExecTargetSpec> targets;
  double idle_power_w = 0.0;
  std::array<double, 2> comm_power_w{};  // indexed by SignalBand

  bool has_target(TargetKind k) const;
  const ExecTargetSpec& target(TargetKind k) const;  // throws LookupError
  double comm_power(SignalBand band) const;
  double peak_cpu_power() const { return target(TargetKind::Cpu).top().busy_power_w; }
};

// A concrete execution target: processor kind plus an index into its full DVFS table.
struct ExecTargetChoice {
  TargetKind kind = TargetKind::Cpu;
  std::size_t step = 0;

  bool operator==(const ExecTargetChoice&) const = default;
};

ExecTargetChoice top_cpu(const DeviceProfile& p);

// Template from which every device of a tier is instantiated.
struct TargetTemplate {
  TargetKind kind = TargetKind::Cpu;
  double peak_frequency_hz = 0.0;
  std::size_t dvfs_steps = 1;
  double peak_power_w = 0.0;
  int cores = 1;
  double peak_throughput = 0.0;  // FLOP/s
  double min_frequency_fraction = 0.3;  // lowest step as a fraction of the peak
};

struct TierTemplate {
  std::vector<TargetTemplate> targets;
  double idle_power_w = 0.1;
  double comm_strong_w = 0.8;
  double comm_weak_w = 1.4;
};

struct FleetSpec {
  std::array<std::size_t, kNumTiers> tier_counts{30, 70, 100};
  std::array<TierTemplate, kNumTiers> templates;
};

// Phone-class defaults: peak CPU/GPU power and step counts per tier, GFLOPS ratios per tier.
std::array<TierTemplate, kNumTiers> default_tier_templates();
FleetSpec default_fleet_spec(std::size_t high, std::size_t mid, std::size_t low);

// Frequencies evenly spaced from min_fraction * f_peak to f_peak;
// P(f) = P_peak * (0.1 + 0.9 * (f / f_peak)^3).
std::vector<DvfsStep> make_dvfs_table(double peak_frequency_hz, std::size_t steps, double peak_power_w,
                                      double min_frequency_fraction = 0.3);

DeviceProfile make_profile(const TierTemplate& tpl, std::size_t id, Tier tier);

class Fleet {
 public:
  Fleet() = default;
  Fleet(std::vector<DeviceProfile> devices, std::array<std::size_t, kNumTiers> tier_counts);

  std::size_t size() const { return devices_.size(); }
  const DeviceProfile& operator[](std::size_t i) const { return devices_[i]; }
  const DeviceProfile& at(std::size_t i) const;
  const std::vector<DeviceProfile>& devices() const { return devices_; }
  const std::array<std::size_t, kNumTiers>& tier_counts() const { return tier_counts_; }

  auto begin() const { return devices_.begin(); }
  auto end() const { return devices_.end(); }

 private:
  std::vector<DeviceProfile> devices_;
  std::array<std::size_t, kNumTiers> tier_counts_{};
};

// Tier-major ids: High devices first, then Mid, then Low.
Fleet build_fleet(const FleetSpec& spec);

// CPU contention never removes more than this fraction of CPU throughput.
inline constexpr double kMaxCpuContention = 0.95;

double effective_throughput(const DeviceProfile& profile, ExecTargetChoice target,
                            const InterferenceState& interference);

struct PowerDraw {
  double busy_w;
  double idle_w;
};

PowerDraw power_at(const DeviceProfile& profile, ExecTargetChoice target);

// The RL-visible action set: each target kind exposes `levels` evenly spaced DVFS steps.
// Action index = kind_position * levels + level.
class ActionSpace {
 public:
  ActionSpace() = default;
  ActionSpace(std::vector<TargetKind> kinds, std::size_t levels);

  std::size_t size() const { return kinds_.size() * levels_; }
  std::size_t levels() const { return levels_; }
  const std::vector<TargetKind>& kinds() const { return kinds_; }

  TargetKind kind(std::size_t action) const;
  std::size_t level(std::size_t action) const;
  std::string name(std::size_t action) const;  // e.g. "cpu:3"
  std::size_t parse(std::string_view name) const;

  bool available(const DeviceProfile& p, std::size_t action) const;
  ExecTargetChoice resolve(const DeviceProfile& p, std::size_t action) const;

 private:
  std::vector<TargetKind> kinds_;
  std::size_t levels_ = 0;
};

}  // namespace fedsim
