#include "fedsim/device_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fedsim/errors.hpp"

namespace fedsim {

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::High: return "High";
    case Tier::Mid: return "Mid";
    case Tier::Low: return "Low";
  }
  return "?";
}

std::string_view to_string(TargetKind k) { return k == TargetKind::Cpu ? "cpu" : "gpu"; }

Tier parse_tier(std::string_view s) {
  if (s == "High" || s == "high" || s == "H") return Tier::High;
  if (s == "Mid" || s == "mid" || s == "M") return Tier::Mid;
  if (s == "Low" || s == "low" || s == "L") return Tier::Low;
  throw LookupError("unknown tier '" + std::string(s) + "'");
}

TargetKind parse_target_kind(std::string_view s) {
  if (s == "cpu" || s == "Cpu" || s == "CPU") return TargetKind::Cpu;
  if (s == "gpu" || s == "Gpu" || s == "GPU") return TargetKind::Gpu;
  throw LookupError("unknown execution target '" + std::string(s) + "'");
}

bool DeviceProfile::has_target(TargetKind k) const {
  return std::any_of(targets.begin(), targets.end(), [k](const auto& t) { return t.kind == k; });
}

const ExecTargetSpec& DeviceProfile::target(TargetKind k) const {
  for (const auto& t : targets)
    if (t.kind == k) return t;
  throw LookupError("device " + std::to_string(id) + " has no " + std::string(to_string(k)) +
                    " target");
}

double DeviceProfile::comm_power(SignalBand band) const {
  const auto i = static_cast<std::size_t>(band);
  if (i >= comm_power_w.size()) throw LookupError("unknown signal band");
  return comm_power_w[i];
}

ExecTargetChoice top_cpu(const DeviceProfile& p) {
  return {TargetKind::Cpu, p.target(TargetKind::Cpu).dvfs_steps.size() - 1};
}

std::array<TierTemplate, kNumTiers> default_tier_templates() {
  constexpr double GHz = 1e9;
  constexpr double GFLOPS = 1e9;
  // GPU training throughput is taken as 60% of the tier's CPU peak.
  constexpr double gpu_ratio = 0.6;
  std::array<TierTemplate, kNumTiers> t;
  t[0] = {{{TargetKind::Cpu, 2.8 * GHz, 23, 5.5, 8, 153.6 * GFLOPS},
           {TargetKind::Gpu, 0.7 * GHz, 7, 2.8, 1, gpu_ratio * 153.6 * GFLOPS}},
          0.12, 0.8 * 1.2, 1.4 * 1.2};
  t[1] = {{{TargetKind::Cpu, 2.7 * GHz, 21, 5.6, 8, 80.0 * GFLOPS},
           {TargetKind::Gpu, 0.7 * GHz, 9, 2.4, 1, gpu_ratio * 80.0 * GFLOPS}},
          0.10, 0.8, 1.4};
  t[2] = {{{TargetKind::Cpu, 1.9 * GHz, 15, 3.6, 8, 52.8 * GFLOPS},
           {TargetKind::Gpu, 0.6 * GHz, 6, 2.0, 1, gpu_ratio * 52.8 * GFLOPS}},
          0.08, 0.8 * 0.8, 1.4 * 0.8};
  return t;
}

FleetSpec default_fleet_spec(std::size_t high, std::size_t mid, std::size_t low) {
  FleetSpec s;
  s.tier_counts = {high, mid, low};
  s.templates = default_tier_templates();
  return s;
}

std::vector<DvfsStep> make_dvfs_table(double peak_frequency_hz, std::size_t steps,
                                      double peak_power_w, double min_frequency_fraction) {
  if (steps == 0) throw ConfigError("DVFS table needs at least one step");
  if (!(peak_frequency_hz > 0.0) || !(peak_power_w > 0.0))
    throw ConfigError("DVFS peak frequency and power must be positive");
  if (!(min_frequency_fraction > 0.0 && min_frequency_fraction <= 1.0))
    throw ConfigError("DVFS minimum frequency fraction must lie in (0, 1]");
  if (steps > 1 && min_frequency_fraction == 1.0)
    throw ConfigError("several DVFS steps need a minimum frequency below the peak");
  std::vector<DvfsStep> table;
  table.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double r = steps == 1 ? 1.0
                                : min_frequency_fraction + (1.0 - min_frequency_fraction) *
                                                               static_cast<double>(i) /
                                                               static_cast<double>(steps - 1);
    table.push_back({peak_frequency_hz * r, peak_power_w * (0.1 + 0.9 * r * r * r)});
  }
  return table;
}

namespace {

void validate_profile(const DeviceProfile& p) {
  if (!p.has_target(TargetKind::Cpu))
    throw ConfigError("device template has no CPU target");
  if (!(p.idle_power_w > 0.0) || !std::isfinite(p.idle_power_w))
    throw ConfigError("idle power must be finite and positive");
  for (double w : p.comm_power_w)
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("comm power must be finite and positive");
  std::set<TargetKind> seen;
  for (const auto& t : p.targets) {
    if (!seen.insert(t.kind).second) throw ConfigError("duplicate execution target kind");
    if (t.dvfs_steps.empty()) throw ConfigError("execution target without DVFS steps");
    if (!(t.base_throughput > 0.0)) throw ConfigError("throughput must be positive");
    if (t.cores < 1) throw ConfigError("core count must be >= 1");
    for (std::size_t i = 0; i < t.dvfs_steps.size(); ++i) {
      const auto& s = t.dvfs_steps[i];
      if (!(s.frequency_hz > 0.0) || !(s.busy_power_w > 0.0) || !std::isfinite(s.busy_power_w))
        throw ConfigError("DVFS entries must be finite and positive");
      if (i > 0 && !(s.frequency_hz > t.dvfs_steps[i - 1].frequency_hz))
        throw ConfigError("DVFS frequencies must be strictly increasing");
      if (i > 0 && s.busy_power_w < t.dvfs_steps[i - 1].busy_power_w)
        throw ConfigError("DVFS busy power must be nondecreasing");
    }
  }
}

}  // namespace

DeviceProfile make_profile(const TierTemplate& tpl, std::size_t id, Tier tier) {
  DeviceProfile p;
  p.id = id;
  p.tier = tier;
  p.idle_power_w = tpl.idle_power_w;
  p.comm_power_w = {tpl.comm_strong_w, tpl.comm_weak_w};
  for (const auto& tt : tpl.targets) {
    ExecTargetSpec spec;
    spec.kind = tt.kind;
    spec.dvfs_steps = make_dvfs_table(tt.peak_frequency_hz, tt.dvfs_steps, tt.peak_power_w,
                                      tt.min_frequency_fraction);
    spec.cores = tt.kind == TargetKind::Cpu ? tt.cores : 1;
    spec.base_throughput = tt.peak_throughput;
    p.targets.push_back(std::move(spec));
  }
  validate_profile(p);
  return p;
}

Fleet::Fleet(std::vector<DeviceProfile> devices, std::array<std::size_t, kNumTiers> tier_counts)
    : devices_(std::move(devices)), tier_counts_(tier_counts) {
  std::size_t total = 0;
  for (auto c : tier_counts_) total += c;
  if (total != devices_.size()) throw ConfigError("tier counts do not sum to fleet size");
  std::set<std::size_t> ids;
  for (const auto& d : devices_)
    if (!ids.insert(d.id).second) throw ConfigError("duplicate device id " + std::to_string(d.id));
}

const DeviceProfile& Fleet::at(std::size_t i) const {
  if (i >= devices_.size()) throw LookupError("device " + std::to_string(i) + " not in fleet");
  return devices_[i];
}

Fleet build_fleet(const FleetSpec& spec) {
  std::size_t total = 0;
  for (auto c : spec.tier_counts) total += c;
  if (total == 0) throw ConfigError("fleet is empty");
  std::vector<DeviceProfile> devices;
  devices.reserve(total);
  std::size_t id = 0;
  for (std::size_t t = 0; t < kNumTiers; ++t) {
    if (spec.tier_counts[t] == 0) continue;
    // Validate the template even if instantiation below would catch it, so the
    // error names the tier.
    try {
      (void)make_profile(spec.templates[t], 0, static_cast<Tier>(t));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(to_string(static_cast<Tier>(t))) + " tier template: " + e.what());
    }
    for (std::size_t i = 0; i < spec.tier_counts[t]; ++i)
      devices.push_back(make_profile(spec.templates[t], id++, static_cast<Tier>(t)));
  }
  return Fleet(std::move(devices), spec.tier_counts);
}

double effective_throughput(const DeviceProfile& profile, ExecTargetChoice target,
                            const InterferenceState& interference) {
  const auto& spec = profile.target(target.kind);
  if (target.step >= spec.dvfs_steps.size())
    throw LookupError("DVFS step " + std::to_string(target.step) + " out of range");
  if (interference.cpu_util < 0.0 || interference.cpu_util > 1.0 || interference.mem_util < 0.0 ||
      interference.mem_util > 1.0)
    throw ContractViolation("interference fractions must lie in [0, 1]");
  const double freq_ratio = spec.dvfs_steps[target.step].frequency_hz / spec.top().frequency_hz;
  double tp = spec.base_throughput * freq_ratio;
  if (target.kind == TargetKind::Cpu)
    tp *= 1.0 - std::min(interference.cpu_util, kMaxCpuContention);
  return tp;
}

PowerDraw power_at(const DeviceProfile& profile, ExecTargetChoice target) {
  const auto& spec = profile.target(target.kind);
  if (target.step >= spec.dvfs_steps.size())
    throw LookupError("DVFS step " + std::to_string(target.step) + " out of range");
  return {spec.dvfs_steps[target.step].busy_power_w, profile.idle_power_w};
}

ActionSpace::ActionSpace(std::vector<TargetKind> kinds, std::size_t levels)
    : kinds_(std::move(kinds)), levels_(levels) {
  if (kinds_.empty() || levels_ == 0) throw ConfigError("action space must be non-empty");
}

TargetKind ActionSpace::kind(std::size_t action) const {
  if (action >= size()) throw LookupError("action index out of range");
  return kinds_[action / levels_];
}

std::size_t ActionSpace::level(std::size_t action) const {
  if (action >= size()) throw LookupError("action index out of range");
  return action % levels_;
}

std::string ActionSpace::name(std::size_t action) const {
  return std::string(to_string(kind(action))) + ":" + std::to_string(level(action));
}

std::size_t ActionSpace::parse(std::string_view name) const {
  for (std::size_t a = 0; a < size(); ++a)
    if (this->name(a) == name) return a;
  throw LookupError("unknown action '" + std::string(name) + "'");
}

bool ActionSpace::available(const DeviceProfile& p, std::size_t action) const {
  return p.has_target(kind(action));
}

ExecTargetChoice ActionSpace::resolve(const DeviceProfile& p, std::size_t action) const {
  const auto k = kind(action);
  const std::size_t n = p.target(k).dvfs_steps.size();
  const std::size_t j = level(action);
  std::size_t step = n - 1;
  if (levels_ > 1) {
    // Evenly spaced over the full table, rounding to nearest; level levels-1 is the top step.
    step = (j * (n - 1) * 2 + (levels_ - 1)) / (2 * (levels_ - 1));
  }
  return {k, step};
}

}  // namespace fedsim
