#pragma once

#include <string_view>

namespace fedsim {

enum class SignalBand { Strong, Weak };

inline constexpr std::string_view to_string(SignalBand b) {
  return b == SignalBand::Strong ? "Strong" : "Weak";
}

// Co-running application load on a device for one round.
struct InterferenceState {
  double cpu_util = 0.0;  // [0, 1]
  double mem_util = 0.0;  // [0, 1]

  bool operator==(const InterferenceState&) const = default;
};

inline constexpr double kWeakBandwidthMbps = 40.0;

struct NetworkState {
  double bandwidth_mbps = 0.0;
  SignalBand signal_band = SignalBand::Strong;

  static NetworkState from_bandwidth(double mbps) {
    return {mbps, mbps <= kWeakBandwidthMbps ? SignalBand::Weak : SignalBand::Strong};
  }
  bool operator==(const NetworkState&) const = default;
};

struct DeviceConditions {
  InterferenceState interference;
  NetworkState network;

  bool operator==(const DeviceConditions&) const = default;
};

}  // namespace fedsim
