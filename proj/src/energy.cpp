#include "fedsim/energy.hpp"

#include <cmath>
#include <numeric>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

void check_time(double t, const char* what) {
  if (!(t >= 0.0) || !std::isfinite(t))
    throw ContractViolation(std::string("energy trace: ") + what + " must be finite and >= 0");
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

double EnergyTrace::busy_total() const {
  double t = 0.0;
  for (const auto& s : busy) t += s.seconds;
  return t;
}

double comp_energy(const EnergyTrace& trace, const DeviceProfile& profile, TargetKind target) {
  const auto& spec = profile.target(target);
  check_time(trace.t_idle, "t_idle");
  for (const auto& seg : trace.busy) {
    check_time(seg.seconds, "t_busy");
    if (seg.step >= spec.dvfs_steps.size()) throw LookupError("DVFS step out of range in trace");
  }
  if (target == TargetKind::Cpu) {
    const double cores = static_cast<double>(spec.cores);
    double total = 0.0;
    for (int core = 0; core < spec.cores; ++core) {
      double e_core = 0.0;
      for (const auto& seg : trace.busy)
        e_core += spec.dvfs_steps[seg.step].busy_power_w / cores * seg.seconds;
      e_core += profile.idle_power_w / cores * trace.t_idle;
      total += e_core;
    }
    return total;
  }
  double e = 0.0;
  for (const auto& seg : trace.busy) e += spec.dvfs_steps[seg.step].busy_power_w * seg.seconds;
  return e + profile.idle_power_w * trace.t_idle;
}

double comm_energy(const EnergyTrace& trace, const DeviceProfile& profile) {
  check_time(trace.t_tx, "t_tx");
  return profile.comm_power(trace.signal_band) * trace.t_tx;
}

double idle_energy(const DeviceProfile& profile, double t_round) {
  check_time(t_round, "t_round");
  return profile.idle_power_w * t_round;
}

double EnergyReport::total_comp() const { return sum(e_comp); }
double EnergyReport::total_comm() const { return sum(e_comm); }
double EnergyReport::total_idle() const { return sum(e_idle); }

EnergyReport energy_rewards(std::span<const EnergyTrace> traces, const std::vector<bool>& selected,
                            const Fleet& fleet, Exec exec) {
  const std::size_t n = fleet.size();
  if (traces.size() != n || selected.size() != n)
    throw ContractViolation("energy_rewards needs one trace and one selection flag per device");
  for (std::size_t i = 0; i < n; ++i)
    if (selected[i] && !traces[i].active)
      throw ContractViolation("participant " + std::to_string(i) + " has no activity trace");

  EnergyReport r;
  r.e_comp.assign(n, 0.0);
  r.e_comm.assign(n, 0.0);
  r.e_idle.assign(n, 0.0);
  r.r_energy_local.assign(n, 0.0);

  auto one = [&](std::size_t i) {
    const auto& p = fleet[i];
    if (selected[i]) {
      r.e_comp[i] = comp_energy(traces[i], p, traces[i].target);
      r.e_comm[i] = comm_energy(traces[i], p);
      r.r_energy_local[i] = r.e_comp[i] + r.e_comm[i];
    } else {
      r.e_idle[i] = idle_energy(p, traces[i].t_round);
      r.r_energy_local[i] = r.e_idle[i];
    }
  };

  const auto count = static_cast<long long>(n);
  if (exec == Exec::Parallel) {
    // Exceptions must not escape an OpenMP region; capture the first one.
    std::exception_ptr err;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < count; ++i) {
      try {
        one(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  } else {
    for (long long i = 0; i < count; ++i) one(static_cast<std::size_t>(i));
  }
  // Fixed-order reduction so the global reward is independent of thread count.
  for (std::size_t i = 0; i < n; ++i) r.r_energy_global += r.r_energy_local[i];
  return r;
}

}  // namespace fedsim
