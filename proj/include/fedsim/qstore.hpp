#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string_view>
#include <vector>

#include "fedsim/device_model.hpp"
#include "fedsim/state.hpp"

namespace fedsim {

enum class QMode { PerDevice, SharedPerTier };
std::string_view to_string(QMode m);
QMode parse_qmode(std::string_view s);

// Lookup table Q(owner, S_global, S_local, A). The owner is the device id in
// PerDevice mode and the device's tier in SharedPerTier mode. Entries never
// written read back a fixed pseudo-random value in [0, init_scale) derived
// from (init_seed, owner, states, action).
class QStore {
 public:
  static constexpr double kDefaultInitScale = 0.01;

  QStore() = default;
  QStore(QMode mode, ActionSpace actions, const Fleet& fleet, std::uint64_t init_seed,
         double init_scale = kDefaultInitScale);

  QMode mode() const { return mode_; }
  const ActionSpace& actions() const { return actions_; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::size_t devices() const { return device_tiers_.size(); }
  std::size_t owner(std::size_t device) const;

  double get(std::size_t device, const GlobalState& g, const LocalState& l, std::size_t action) const;
  void set(std::size_t device, const GlobalState& g, const LocalState& l, std::size_t action,
           double value);
  double initial_value(std::size_t owner, const GlobalState& g, const LocalState& l,
                       std::size_t action) const;

  // Over the actions the device supports. Ties -> lowest action index.
  std::size_t argmax(const DeviceProfile& p, const GlobalState& g, const LocalState& l) const;
  double max_value(const DeviceProfile& p, const GlobalState& g, const LocalState& l) const;

  std::size_t written() const { return table_.size(); }

  // Text snapshot, one record per written entry:
  //   owner=<id|tier> conv=.. fc=.. rc=.. b=.. e=.. k=.. co_cpu=.. co_mem=.. network=.. data=.. action=cpu:0 value=<decimal>
  // preceded by a header line with mode, init seed, init scale and action names.
  void save(std::ostream& out) const;
  // Replaces written entries; mode and action set must match this store.
  void load(std::istream& in);

 private:
  std::uint64_t key(std::size_t owner, std::size_t g, std::size_t l, std::size_t a) const;

  QMode mode_ = QMode::PerDevice;
  ActionSpace actions_;
  std::vector<Tier> device_tiers_;
  std::uint64_t init_seed_ = 0;
  double init_scale_ = kDefaultInitScale;
  std::map<std::uint64_t, double> table_;  // ordered so snapshots are deterministic
};

}  // namespace fedsim
