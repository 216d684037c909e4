#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedsim/conditions.hpp"
#include "fedsim/device_model.hpp"
#include "fedsim/parallel.hpp"
#include "fedsim/workload.hpp"

namespace fedsim {

struct ModelState {
  std::vector<double> params;
  std::size_t version = 0;
};

// Logistic: zeros. Mlp: hidden weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), rest zero.
ModelState init_model(const TrainableSpec& spec, std::uint64_t seed);

// Mean softmax cross-entropy over `batch` and its gradient (same length as params).
double loss_and_gradient(const TrainableSpec& spec, std::span<const double> params,
                         const Dataset& data, std::span<const std::size_t> batch,
                         std::span<double> grad);

// Argmax class; ties go to the lowest class index.
std::uint32_t predict(const TrainableSpec& spec, std::span<const double> params,
                      std::span<const double> x);

struct LocalUpdate {
  std::size_t device = 0;
  std::vector<double> delta;  // local_after - global_before
  std::size_t sample_count = 0;
};

struct LocalTrainParams {
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
  double lr = 0.05;
};

// E epochs of minibatch SGD over `shard`, reshuffled each epoch from `seed`;
// a trailing short batch is kept. Throws DivergenceError on a non-finite loss.
LocalUpdate local_train(const TrainableSpec& spec, const ModelState& global, const Dataset& data,
                        std::span<const std::size_t> shard, const LocalTrainParams& p,
                        std::uint64_t seed, std::size_t device);

// Runs local_train for each listed device; result order follows `devices`.
// Per-device seeds are derive_seed({train_seed, round, device}).
std::vector<LocalUpdate> train_participants(const TrainableSpec& spec, const ModelState& global,
                                            const Dataset& data, const ShardSet& shards,
                                            std::span<const std::size_t> devices,
                                            const LocalTrainParams& p, std::uint64_t train_seed,
                                            std::uint64_t round, Exec exec = Exec::Serial);

// new = old + sum_i w_i * delta_i with w_i = n_i / sum n (or 1/K when unweighted).
// Updates are consumed in the given order.
ModelState aggregate(const ModelState& global, std::span<const LocalUpdate> updates,
                     bool unweighted = false);

// Percent of test samples whose argmax prediction matches the label.
double evaluate(const TrainableSpec& spec, const ModelState& model, const Dataset& test,
                Exec exec = Exec::Serial);

struct ParticipantTiming {
  std::size_t device = 0;
  double t_comp = 0.0;
  double t_comm = 0.0;
  double total() const { return t_comp + t_comm; }
};

struct RoundTiming {
  std::vector<ParticipantTiming> participants;
  double t_round = 0.0;  // max over participants of t_comp + t_comm
};

// t_comp = flops_per_sample * |shard| * E / throughput; t_comm = bytes * 8 / (Mbps * 1e6).
RoundTiming simulate_timing(std::span<const std::size_t> participants,
                            std::span<const ExecTargetChoice> targets,
                            std::span<const DeviceConditions> conditions, const NnDescriptor& nn,
                            const GlobalParams& params, const ShardSet& shards, const Fleet& fleet);

double round_time(std::span<const ParticipantTiming> participants);

// true = kept. A participant is dropped when its time exceeds factor * median.
std::vector<bool> straggler_mask(std::span<const ParticipantTiming> participants,
                                 double deadline_factor);

// ---- checkpoints --------------------------------------------------------
// 16-byte header: "FLCK", u32 LE model version, u64 LE parameter count;
// then parameters as little-endian float32.
void save_checkpoint(const ModelState& model, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace fedsim
