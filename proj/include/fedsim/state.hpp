#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedsim/conditions.hpp"
#include "fedsim/workload.hpp"

namespace fedsim {

// Discretized RL state. Each field holds a bin index; bin names and edges
// follow the state-feature table:
//   conv   Small <10, Medium <20, Large <40, Larger >=40
//   fc     Small <10, Large >=10
//   rc     Small <5, Medium <10, Large >=10
//   b      Small <8, Medium <32, Large >=32
//   e      Small <5, Medium <10, Large >=10
//   k      Small <10, Medium <50, Large >=50
//   co_cpu / co_mem   None =0, Small <25%, Medium <75%, Large <=100%
//   network           Regular >40 Mbps, Bad <=40 Mbps
//   data              Small <25% of classes, Medium <100%, Large =100%
struct GlobalState {
  std::uint8_t conv = 0, fc = 0, rc = 0, b = 0, e = 0, k = 0;

  static constexpr std::size_t kCardinality = 4 * 2 * 3 * 3 * 3 * 3;  // 648
  std::size_t index() const;
  static GlobalState from_index(std::size_t i);
  bool operator==(const GlobalState&) const = default;
};

struct LocalState {
  std::uint8_t co_cpu = 0, co_mem = 0, network = 0, data = 0;

  static constexpr std::size_t kCardinality = 4 * 4 * 2 * 3;  // 96
  std::size_t index() const;
  static LocalState from_index(std::size_t i);
  bool operator==(const LocalState&) const = default;
};

std::uint8_t bin_conv(std::size_t layers);
std::uint8_t bin_fc(std::size_t layers);
std::uint8_t bin_rc(std::size_t layers);
std::uint8_t bin_batch(std::size_t b);
std::uint8_t bin_epochs(std::size_t e);
std::uint8_t bin_participants(std::size_t k);
std::uint8_t bin_utilization(double fraction);
std::uint8_t bin_network(double bandwidth_mbps);
std::uint8_t bin_data(std::size_t classes_present, std::size_t num_classes);

GlobalState featurize_global(const NnDescriptor& nn, const GlobalParams& params);
LocalState featurize_local(const DeviceConditions& c, std::size_t classes_present,
                           std::size_t num_classes);

struct Features {
  GlobalState global;
  std::vector<LocalState> local;  // per device
};

Features featurize(const NnDescriptor& nn, const GlobalParams& params,
                   std::span<const DeviceConditions> conditions, const ShardSet& shards);

// Field names and their bin labels, in the order GlobalState / LocalState store them.
struct StateField {
  std::string_view name;
  std::vector<std::string_view> bins;
};
const std::array<StateField, 6>& global_fields();
const std::array<StateField, 4>& local_fields();

std::string describe(const GlobalState& s);  // "conv=Small fc=Small ..."
std::string describe(const LocalState& s);

}  // namespace fedsim
