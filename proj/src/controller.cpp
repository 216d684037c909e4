#include "fedsim/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/errors.hpp"

namespace fedsim {

std::vector<ExecTargetChoice> Selection::targets() const {
  std::vector<ExecTargetChoice> t;
  for (auto d : participants) t.push_back(choices[d].target);
  return t;
}

std::vector<std::size_t> Selection::actions() const {
  std::vector<std::size_t> a;
  for (auto d : participants) a.push_back(choices[d].action);
  return a;
}

namespace {

std::vector<std::size_t> available_actions(const ActionSpace& actions, const DeviceProfile& p) {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < actions.size(); ++a)
    if (actions.available(p, a)) out.push_back(a);
  if (out.empty()) throw LookupError("device " + std::to_string(p.id) + " supports no action");
  return out;
}

void finish(Selection& s, const Fleet& fleet, const ActionSpace& actions) {
  std::sort(s.participants.begin(), s.participants.end());
  for (auto d : s.participants) {
    auto& c = s.choices[d];
    c.selected = true;
    c.target = actions.resolve(fleet[d], c.action);
  }
}

}  // namespace

Selection select(const QStore& q, const Fleet& fleet, const GlobalState& g,
                 std::span<const LocalState> locals, std::size_t k, double epsilon, Rng& rng) {
  const std::size_t n = fleet.size();
  if (k < 1 || k > n) throw ContractViolation("select: K must satisfy 1 <= K <= N");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("select: epsilon must lie in [0, 1]");
  if (locals.size() != n) throw ContractViolation("select: one local state per device required");

  Selection s;
  s.choices.assign(n, {});
  s.explored = rng.uniform() < epsilon;
  if (s.explored) {
    s.participants = rng.sample_without_replacement(n, k);
    for (auto d : s.participants) {
      const auto avail = available_actions(q.actions(), fleet[d]);
      s.choices[d].action = avail[static_cast<std::size_t>(rng.below(avail.size()))];
    }
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<double> score(n);
    std::vector<std::size_t> best(n);
    for (std::size_t d = 0; d < n; ++d) {
      best[d] = q.argmax(fleet[d], g, locals[d]);
      score[d] = q.get(d, g, locals[d], best[d]);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    s.participants.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    for (auto d : s.participants) s.choices[d].action = best[d];
  }
  finish(s, fleet, q.actions());
  return s;
}

double compute_reward(const RewardInputs& in) {
  if (in.r_accuracy - in.r_accuracy_prev <= 0.0) return in.r_accuracy - 100.0;
  return -in.r_energy_global - in.r_energy_local + in.alpha * in.r_accuracy +
         in.beta * (in.r_accuracy - in.r_accuracy_prev);
}

double bellman(double old, double reward, double next_max, double gamma, double mu) {
  return old + gamma * (reward + mu * next_max - old);
}

double q_update(QStore& q, const DeviceProfile& device, const GlobalState& g, const LocalState& l,
                std::size_t action, double reward, const GlobalState& g_next,
                const LocalState& l_next, const QParams& p) {
  if (!std::isfinite(reward)) throw ContractViolation("q_update: reward must be finite");
  if (!(p.gamma > 0.0 && p.gamma <= 1.0)) throw ContractViolation("q_update: gamma must lie in (0, 1]");
  if (!(p.mu >= 0.0 && p.mu < 1.0)) throw ContractViolation("q_update: mu must lie in [0, 1)");
  const double old = q.get(device.id, g, l, action);
  const double next_max = q.max_value(device, g_next, l_next);
  const double v = bellman(old, reward, next_max, p.gamma, p.mu);
  q.set(device.id, g, l, action, v);
  return v;
}

// ---- baselines -----------------------------------------------------------

std::array<std::size_t, kNumTiers> cluster_row(std::string_view name) {
  if (name == "C1") return {20, 0, 0};
  if (name == "C2") return {15, 5, 0};
  if (name == "C3") return {10, 5, 5};
  if (name == "C4") return {5, 10, 5};
  if (name == "C5") return {5, 5, 10};
  if (name == "C6") return {0, 5, 15};
  if (name == "C7") return {0, 0, 20};
  throw ConfigError("unknown cluster '" + std::string(name) + "' (expected C1..C7)");
}

Selection baseline_select(const BaselinePolicy& policy, const Fleet& fleet, std::size_t k,
                          const ActionSpace& actions, Rng& rng) {
  const std::size_t n = fleet.size();
  if (k < 1 || k > n) throw ContractViolation("baseline_select: K must satisfy 1 <= K <= N");
  Selection s;
  s.choices.assign(n, {});
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});

  using Kind = BaselinePolicy::Kind;
  switch (policy.kind) {
    case Kind::Random:
      s.participants = rng.sample_without_replacement(n, k);
      break;
    case Kind::Power:
      std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) {
        return fleet[a].peak_cpu_power() < fleet[b].peak_cpu_power();
      });
      s.participants.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
      break;
    case Kind::Performance:
      std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) {
        return fleet[a].target(TargetKind::Cpu).base_throughput >
               fleet[b].target(TargetKind::Cpu).base_throughput;
      });
      s.participants.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
      break;
    case Kind::ClusterFixed: {
      const auto& want = policy.cluster;
      if (want[0] + want[1] + want[2] != k)
        throw ConfigError("cluster tier counts must sum to K");
      for (std::size_t t = 0; t < kNumTiers; ++t) {
        std::vector<std::size_t> pool;
        for (const auto& d : fleet)
          if (static_cast<std::size_t>(d.tier) == t) pool.push_back(d.id);
        if (pool.size() < want[t])
          throw ConfigError("fleet has too few " + std::string(to_string(static_cast<Tier>(t))) +
                            " devices for the requested cluster");
        for (auto i : rng.sample_without_replacement(pool.size(), want[t]))
          s.participants.push_back(pool[i]);
      }
      break;
    }
  }
  for (auto d : s.participants) {
    // Highest CPU level in the action space resolves to the top DVFS step.
    std::size_t a = actions.size();
    for (std::size_t i = 0; i < actions.size(); ++i)
      if (actions.kind(i) == TargetKind::Cpu && actions.level(i) == actions.levels() - 1) a = i;
    if (a == actions.size()) throw ConfigError("action space has no CPU target");
    s.choices[d].action = a;
  }
  finish(s, fleet, actions);
  for (auto d : s.participants) s.choices[d].target = top_cpu(fleet[d]);
  return s;
}

// ---- oracle ------------------------------------------------------------------

std::optional<std::size_t> oracle_combinations(const Fleet& fleet, std::size_t k,
                                               const ActionSpace& actions) {
  const std::size_t n = fleet.size();
  if (k < 1 || k > n) throw ContractViolation("oracle: K must satisfy 1 <= K <= N");
  // C(n, k) * A^k, bailing out as soon as the limit is crossed.
  double subsets = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    subsets = subsets * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (subsets > kOracleEnumerationLimit) return std::nullopt;
  }
  double total = std::round(subsets);
  for (std::size_t i = 0; i < k; ++i) {
    total *= static_cast<double>(actions.size());
    if (total > kOracleEnumerationLimit) return std::nullopt;
  }
  return static_cast<std::size_t>(total);
}

OracleResult oracle_search(const Fleet& fleet, std::size_t k, const ActionSpace& actions,
                           const RoundEvaluator& evaluate) {
  if (!oracle_combinations(fleet, k, actions))
    throw InfeasibleInstance("oracle search over C(" + std::to_string(fleet.size()) + ", " +
                             std::to_string(k) + ") participant sets exceeds " +
                             std::to_string(static_cast<long long>(kOracleEnumerationLimit)) +
                             " evaluations; use the learned controller instead");
  const std::size_t n = fleet.size();
  OracleResult best;
  bool have = false;

  std::vector<std::size_t> subset(k);
  std::iota(subset.begin(), subset.end(), std::size_t{0});
  for (;;) {
    std::vector<std::vector<std::size_t>> avail;
    for (auto d : subset) avail.push_back(available_actions(actions, fleet[d]));
    std::vector<std::size_t> digit(k, 0), chosen(k);
    for (;;) {
      for (std::size_t i = 0; i < k; ++i) chosen[i] = avail[i][digit[i]];
      const double r = evaluate(subset, chosen);
      ++best.evaluations;
      if (!have || r > best.reward) {
        best.participants = subset;
        best.actions = chosen;
        best.reward = r;
        have = true;
      }
      // Mixed-radix increment, last participant fastest.
      std::size_t i = k;
      while (i > 0) {
        --i;
        if (++digit[i] < avail[i].size()) break;
        digit[i] = 0;
        if (i == 0) {
          i = k + 1;
          break;
        }
      }
      if (i == k + 1) break;
    }
    // Next lexicographic K-subset of [0, n).
    std::size_t i = k;
    while (i > 0 && subset[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++subset[i - 1];
    for (std::size_t j = i; j < k; ++j) subset[j] = subset[j - 1] + 1;
  }
  return best;
}

}  // namespace fedsim
