#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/controller.hpp"
#include "fedsim/device_model.hpp"
#include "fedsim/parallel.hpp"
#include "fedsim/qstore.hpp"
#include "fedsim/variance.hpp"
#include "fedsim/workload.hpp"

namespace fedsim {

enum class PolicyKind { AutoFl, Random, Power, Performance, ClusterFixed, Oracle };
std::string_view to_string(PolicyKind p);
PolicyKind parse_policy(std::string_view s);

struct DatasetConfig {
  enum class Source { Synthetic, Idx, Csv } source = Source::Synthetic;
  MixtureSpec mixture{};            // synthetic train set (test set shares class means)
  std::size_t test_samples = 2000;  // synthetic only
  std::filesystem::path train_images, train_labels, test_images, test_labels;  // idx
  std::filesystem::path train_csv, test_csv;                                   // csv
};

struct WorkloadConfig {
  NnKind nn = NnKind::ToyLogistic;
  std::size_t hidden = 32;
  double flops_scale = 1.0;
  double bytes_scale = 1.0;
  DatasetConfig dataset;
};

struct DataConfig {
  PartitionMode mode = PartitionMode::iid();
  double concentration = 0.1;
};

struct ControllerConfig {
  QParams q{};
  double epsilon = 0.1;
  double alpha = 1.0;
  double beta = 2.0;
  double energy_scale = 1.0;  // energies are divided by this inside the reward
  QMode qmode = QMode::PerDevice;
  double init_scale = QStore::kDefaultInitScale;
  std::vector<TargetKind> action_targets{TargetKind::Cpu, TargetKind::Gpu};
  std::size_t exposed_levels = 4;
  // Full trainings run before the measured one; the Q-store carries over.
  std::size_t warmup_episodes = 0;
  std::optional<std::filesystem::path> qstore_in;
};

struct TrainingConfig {
  bool unweighted_average = false;
  double straggler_deadline = 3.0;  // x median; baseline policies only
  Exec exec = Exec::Parallel;
};

struct RunConfig {
  bool stop_at_target = true;
  std::size_t patience = 5;
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t variance = 2;
  std::uint64_t rl = 3;
  std::uint64_t train = 4;
};

struct OutputConfig {
  std::optional<std::filesystem::path> records_csv;
  std::optional<std::filesystem::path> summary_json;
  std::optional<std::filesystem::path> qstore;
};

struct ExperimentConfig {
  std::string name = "experiment";
  FleetSpec fleet = default_fleet_spec(3, 7, 10);
  WorkloadConfig workload;
  GlobalParams params;
  VarianceSpec variance;
  DataConfig data;
  PolicyKind policy = PolicyKind::AutoFl;
  std::array<std::size_t, kNumTiers> cluster{};  // ClusterFixed only
  ControllerConfig controller;
  TrainingConfig training;
  RunConfig run;
  Seeds seeds;
  OutputConfig output;

  void validate() const;  // throws ConfigError
};

// YAML with nested sections; unknown keys are errors. Relative paths resolve
// against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = std::filesystem::path("."));
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace fedsim
