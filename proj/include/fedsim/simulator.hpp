#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/controller.hpp"
#include "fedsim/energy.hpp"
#include "fedsim/qstore.hpp"
#include "fedsim/trainer.hpp"

namespace fedsim {

// Everything about an experiment that does not change across rounds.
struct World {
  Fleet fleet;
  Dataset train;
  Dataset test;
  ShardSet shards;
  NnDescriptor nn;
  GlobalParams params;
  ActionSpace actions;
};

World build_world(const ExperimentConfig& cfg);

struct RoundSettings {
  bool exclude_stragglers = false;
  double straggler_deadline = 3.0;
  bool unweighted_average = false;
  double alpha = 1.0;
  double beta = 2.0;
  double energy_scale = 1.0;
  std::uint64_t train_seed = 0;
  Exec exec = Exec::Serial;
};

struct RoundOutcome {
  std::vector<std::size_t> participants;  // ascending
  std::vector<bool> aggregated;           // aligned with participants
  RoundTiming timing;                     // t_round honours straggler exclusion
  std::vector<EnergyTrace> traces;        // per device
  EnergyReport energy;
  ModelState model;
  double accuracy = 0.0;
  double accuracy_prev = 0.0;
  std::vector<double> rewards;  // per participant, aligned with participants
  double reward = 0.0;          // mean of rewards
};

// One round against frozen inputs (model, previous accuracy, conditions).
// Local training results are cached per device, so evaluating many candidate
// selections re-trains nobody.
class RoundEngine {
 public:
  RoundEngine(const World& world, RoundSettings settings, const ModelState& model,
              double accuracy_prev, std::vector<DeviceConditions> conditions, std::uint64_t round);

  // Trains any uncached device among `devices` (in parallel under Exec::Parallel).
  void prepare(std::span<const std::size_t> devices);

  // participants ascending; targets aligned.
  RoundOutcome run(std::span<const std::size_t> participants,
                   std::span<const ExecTargetChoice> targets);
  double score(std::span<const std::size_t> participants, std::span<const std::size_t> actions);

  const std::vector<DeviceConditions>& conditions() const { return conditions_; }

 private:
  const World& world_;
  RoundSettings settings_;
  const ModelState& model_;
  double accuracy_prev_;
  std::vector<DeviceConditions> conditions_;
  std::uint64_t round_;
  std::map<std::size_t, LocalUpdate> cache_;
};

struct RoundRecord {
  std::size_t round = 0;
  std::size_t episode = 0;
  std::vector<std::size_t> participants;
  std::vector<std::string> actions;  // aligned with participants
  std::size_t aggregated = 0;
  double t_round = 0.0;
  std::vector<double> energy_local;  // per device
  double energy_global = 0.0;
  double accuracy = 0.0;
  double reward = 0.0;
  bool explored = false;
};

struct ExperimentResult {
  std::vector<RoundRecord> records;  // measured episode
  std::vector<std::vector<RoundRecord>> warmup;
  ModelState model;
  std::optional<QStore> qstore;  // AutoFL only
  double initial_accuracy = 0.0;

  // Warm-up rounds followed by measured rounds.
  std::vector<RoundRecord> all_records() const;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);
// Runs on a pre-built world (lets callers share one world across policies).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const World& world);

// First record whose accuracy >= target and which, together with the following
// patience - 1 records, stays >= target. Returns that record's round number.
std::optional<std::size_t> detect_convergence(std::span<const RoundRecord> records,
                                              double target_accuracy, std::size_t patience = 5);

struct Summary {
  std::size_t rounds = 0;
  std::optional<std::size_t> convergence_round;
  double time_to_convergence_s = 0.0;  // sum of t_round up to and including convergence
  double total_time_s = 0.0;
  double total_energy_j = 0.0;
  double mean_power_w = 0.0;
  std::optional<double> ppw;  // (1 / time_to_convergence) / mean_power
  double mean_t_round_s = 0.0;
  double final_accuracy = 0.0;
  std::optional<double> ppw_ratio;  // against a baseline run
};

Summary summarize(std::span<const RoundRecord> records, double target_accuracy,
                  std::size_t patience = 5);
Summary summarize(std::span<const RoundRecord> records, std::span<const RoundRecord> baseline,
                  double target_accuracy, std::size_t patience = 5);

// Rolling-mean reward stabilization: the first round t (1-based count of
// rounds seen) at which the `window` rolling means ending at rounds
// t-window+1..t span at most `tolerance` times their mean absolute value.
// nullopt if never.
std::optional<std::size_t> reward_stabilization_round(std::span<const double> rewards,
                                                      std::size_t window = 20,
                                                      double tolerance = 0.10);

// ---- output -------------------------------------------------------------

inline constexpr const char* kRecordsHeader =
    "round,t_round_s,energy_global_j,accuracy_pct,reward,n_participants,explored";

void write_records_csv(std::span<const RoundRecord> records, std::ostream& out);
void write_records_csv(std::span<const RoundRecord> records, const std::filesystem::path& path);
std::vector<RoundRecord> read_records_csv(const std::filesystem::path& path);

std::string summary_json(const Summary& s, const ExperimentConfig* cfg = nullptr);

// Writes records / summary / Q-store to the paths named in cfg.output.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

}  // namespace fedsim
