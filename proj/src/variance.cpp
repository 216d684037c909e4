#include "fedsim/variance.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

void VarianceSpec::validate() const {
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!unit(interference_prob)) throw ConfigError("interference_prob must lie in [0, 1]");
  if (!unit(cpu_util_min) || !unit(cpu_util_max) || cpu_util_min > cpu_util_max)
    throw ConfigError("co-runner cpu_util bounds must be ordered within [0, 1]");
  if (!unit(mem_util_min) || !unit(mem_util_max) || mem_util_min > mem_util_max)
    throw ConfigError("co-runner mem_util bounds must be ordered within [0, 1]");
  if (!(bw_floor_mbps > 0.0)) throw ConfigError("bandwidth floor must be > 0");
  if (!(bw_stddev_mbps >= 0.0) || !std::isfinite(bw_mean_mbps))
    throw ConfigError("bandwidth mean/stddev invalid");
}

VarianceSpec VarianceSpec::none(double bandwidth_mbps) {
  VarianceSpec s;
  s.interference_prob = 0.0;
  s.bw_mean_mbps = bandwidth_mbps;
  s.bw_stddev_mbps = 0.0;
  return s;
}

VarianceSpec VarianceSpec::weak_network() {
  VarianceSpec s;
  s.bw_mean_mbps = 25.0;
  return s;
}

DeviceConditions sample_device_conditions(const VarianceSpec& spec, std::size_t device,
                                          std::uint64_t round, std::uint64_t seed) {
  Rng rng{seed, round, static_cast<std::uint64_t>(device), 0x76617269ULL};
  DeviceConditions c;
  if (rng.uniform() < spec.interference_prob) {
    c.interference.cpu_util = rng.uniform(spec.cpu_util_min, spec.cpu_util_max);
    c.interference.mem_util = rng.uniform(spec.mem_util_min, spec.mem_util_max);
  }
  double bw = spec.bw_mean_mbps;
  if (spec.bw_stddev_mbps > 0.0) bw = rng.normal(spec.bw_mean_mbps, spec.bw_stddev_mbps);
  c.network = NetworkState::from_bandwidth(std::max(bw, spec.bw_floor_mbps));
  return c;
}

std::vector<DeviceConditions> sample_round_conditions(const VarianceSpec& spec,
                                                      std::size_t fleet_size, std::uint64_t round,
                                                      std::uint64_t seed, Exec exec) {
  std::vector<DeviceConditions> out(fleet_size);
  const auto n = static_cast<long long>(fleet_size);
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (long long d = 0; d < n; ++d)
      out[static_cast<std::size_t>(d)] =
          sample_device_conditions(spec, static_cast<std::size_t>(d), round, seed);
  } else {
    for (long long d = 0; d < n; ++d)
      out[static_cast<std::size_t>(d)] =
          sample_device_conditions(spec, static_cast<std::size_t>(d), round, seed);
  }
  return out;
}

}  // namespace fedsim
