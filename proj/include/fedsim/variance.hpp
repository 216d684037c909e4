#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedsim/conditions.hpp"
#include "fedsim/parallel.hpp"

namespace fedsim {

struct VarianceSpec {
  double interference_prob = 0.3;
  // Web-browsing-like co-runner.
  double cpu_util_min = 0.25;
  double cpu_util_max = 0.75;
  double mem_util_min = 0.10;
  double mem_util_max = 0.50;
  double bw_mean_mbps = 80.0;
  double bw_stddev_mbps = 25.0;
  double bw_floor_mbps = 1.0;

  void validate() const;  // throws ConfigError

  static VarianceSpec none(double bandwidth_mbps = 80.0);
  static VarianceSpec weak_network();
};

// Depends only on (seed, round, device).
DeviceConditions sample_device_conditions(const VarianceSpec& spec, std::size_t device,
                                          std::uint64_t round, std::uint64_t seed);

std::vector<DeviceConditions> sample_round_conditions(const VarianceSpec& spec,
                                                      std::size_t fleet_size, std::uint64_t round,
                                                      std::uint64_t seed, Exec exec = Exec::Serial);

}  // namespace fedsim
