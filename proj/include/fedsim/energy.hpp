#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedsim/conditions.hpp"
#include "fedsim/device_model.hpp"
#include "fedsim/parallel.hpp"

namespace fedsim {

// Time spent at one DVFS step. Applies to every core of the target.
struct BusySegment {
  std::size_t step = 0;
  double seconds = 0.0;
};

// Per-device timing for one round. Non-participants only need t_round.
struct EnergyTrace {
  bool active = false;  // participant activity recorded
  TargetKind target = TargetKind::Cpu;
  std::vector<BusySegment> busy;
  double t_idle = 0.0;  // participant slack inside the round
  double t_tx = 0.0;
  double t_round = 0.0;
  SignalBand signal_band = SignalBand::Strong;

  double busy_total() const;

  static EnergyTrace idle(double t_round) {
    EnergyTrace t;
    t.t_round = t_round;
    return t;
  }
};

// CPU: sum over cores of sum_f (P_f / cores) * t_f + (P_idle / cores) * t_idle.
// GPU: sum_f P_f * t_f + P_idle * t_idle.
double comp_energy(const EnergyTrace& trace, const DeviceProfile& profile, TargetKind target);
double comm_energy(const EnergyTrace& trace, const DeviceProfile& profile);
double idle_energy(const DeviceProfile& profile, double t_round);

struct EnergyReport {
  std::vector<double> e_comp;  // per device; 0 for non-participants
  std::vector<double> e_comm;
  std::vector<double> e_idle;  // per device; 0 for participants
  std::vector<double> r_energy_local;
  double r_energy_global = 0.0;

  double total_comp() const;
  double total_comm() const;
  double total_idle() const;
};

// Local reward: comp + comm for selected devices, idle energy otherwise.
// Global reward: sum of local rewards in device-id order.
EnergyReport energy_rewards(std::span<const EnergyTrace> traces, const std::vector<bool>& selected,
                            const Fleet& fleet, Exec exec = Exec::Serial);

}  // namespace fedsim
