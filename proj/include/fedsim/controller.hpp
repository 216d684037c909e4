#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/device_model.hpp"
#include "fedsim/qstore.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/state.hpp"

namespace fedsim {

struct ActionChoice {
  bool selected = false;
  std::size_t action = 0;  // index into the ActionSpace; meaningful iff selected
  ExecTargetChoice target;

  bool operator==(const ActionChoice&) const = default;
};

struct Selection {
  std::vector<ActionChoice> choices;  // per device
  std::vector<std::size_t> participants;  // ascending device id
  bool explored = false;

  std::vector<ExecTargetChoice> targets() const;  // aligned with participants
  std::vector<std::size_t> actions() const;
};

// Epsilon-greedy two-level selection. One exploration coin per call. Explore:
// K devices uniformly without replacement, each with a uniform action. Exploit:
// rank devices by max_A Q (ties broken by a seeded shuffle), take the top K,
// give each its argmax action (ties -> lowest action index).
Selection select(const QStore& q, const Fleet& fleet, const GlobalState& g,
                 std::span<const LocalState> locals, std::size_t k, double epsilon, Rng& rng);

struct RewardInputs {
  double r_energy_global = 0.0;
  double r_energy_local = 0.0;
  double r_accuracy = 0.0;       // percent
  double r_accuracy_prev = 0.0;  // percent
  double alpha = 1.0;
  double beta = 2.0;
};

// Non-improvement (acc - prev <= 0): acc - 100.
// Otherwise: -E_global - E_local + alpha * acc + beta * (acc - prev).
double compute_reward(const RewardInputs& in);

struct QParams {
  double gamma = 0.9;  // learning rate
  double mu = 0.1;     // discount
};

// old + gamma * (reward + mu * next_max - old)
double bellman(double old, double reward, double next_max, double gamma, double mu);

// Updates Q(device, S, A) towards reward + mu * Q(device, S', argmax A'). Returns the new value.
double q_update(QStore& q, const DeviceProfile& device, const GlobalState& g, const LocalState& l,
                std::size_t action, double reward, const GlobalState& g_next,
                const LocalState& l_next, const QParams& p);

// ---- baselines -----------------------------------------------------------

struct BaselinePolicy {
  enum class Kind { Random, Power, Performance, ClusterFixed } kind = Kind::Random;
  std::array<std::size_t, kNumTiers> cluster{};  // H, M, L counts for ClusterFixed
};

// Rows C1..C7 of the characterization cluster table (C0 is the random baseline).
std::array<std::size_t, kNumTiers> cluster_row(std::string_view name);

// Participants get CPU at its top DVFS step.
Selection baseline_select(const BaselinePolicy& policy, const Fleet& fleet, std::size_t k,
                          const ActionSpace& actions, Rng& rng);

// ---- exhaustive oracle ----------------------------------------------------

inline constexpr double kOracleEnumerationLimit = 1e6;

struct OracleResult {
  std::vector<std::size_t> participants;  // ascending
  std::vector<std::size_t> actions;       // aligned with participants
  double reward = 0.0;
  std::size_t evaluations = 0;
};

// Scores one candidate round; participants ascending, actions aligned.
using RoundEvaluator =
    std::function<double(std::span<const std::size_t> participants, std::span<const std::size_t> actions)>;

// Number of (participant set, action assignment) combinations, or nullopt if it
// exceeds the enumeration limit.
std::optional<std::size_t> oracle_combinations(const Fleet& fleet, std::size_t k,
                                               const ActionSpace& actions);

// Enumerates every K-subset in lexicographic order and every action tuple;
// returns the first maximizer. Throws InfeasibleInstance above the limit.
OracleResult oracle_search(const Fleet& fleet, std::size_t k, const ActionSpace& actions,
                           const RoundEvaluator& evaluate);

}  // namespace fedsim
