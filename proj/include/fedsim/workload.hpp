#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim {

// Dense labelled samples, row-major features.
struct Dataset {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
  Dataset subset(std::span<const std::size_t> indices) const;
};

struct MixtureSpec {
  std::size_t samples = 1000;
  std::size_t features = 64;
  std::size_t classes = 10;
  double separation = 1.0;  // stddev of class means; noise is unit variance
  // Feature f is multiplied by spread^(2f/(F-1) - 1), so scales run from
  // 1/spread to spread. 1 keeps the features isotropic.
  double scale_spread = 1.0;
};

// Balanced Gaussian mixture: label of sample i is i % classes. Class means are
// drawn from `mean_seed`, samples from `sample_seed`, so a train and a test set
// can share means.
Dataset make_gaussian_mixture(const MixtureSpec& spec, std::uint64_t mean_seed,
                              std::uint64_t sample_seed);

// ---- model description --------------------------------------------------

enum class NnKind { CnnLike, LstmLike, MobileNetLike, ToyLogistic, ToyMlp };
std::string_view to_string(NnKind k);
NnKind parse_nn_kind(std::string_view s);

enum class BodyKind { Logistic, Mlp };

// The desk-scale model that is actually trained.
struct TrainableSpec {
  BodyKind body = BodyKind::Logistic;
  std::size_t features = 0;
  std::size_t classes = 0;
  std::size_t hidden = 0;  // Mlp only

  std::size_t param_count() const;
};

struct NnDescriptor {
  NnKind kind = NnKind::ToyLogistic;
  std::size_t conv_layers = 0;
  std::size_t fc_layers = 0;
  std::size_t rc_layers = 0;
  double flops_per_sample = 0.0;
  double update_bytes = 0.0;
  TrainableSpec trainable;

  // Multiplies the analytic cost model only; the trainable body is unchanged.
  NnDescriptor scaled(double flops_scale, double bytes_scale) const;
};

inline constexpr double kFlopsPerParamPerSample = 6.0;
inline constexpr double kBytesPerParam = 4.0;

// hidden is used by ToyMlp and by the stand-in body of the *Like kinds.
NnDescriptor describe_nn(NnKind kind, std::size_t features, std::size_t classes,
                         std::size_t hidden = 32);

struct GlobalParams {
  std::size_t batch_size = 16;         // B
  std::size_t local_epochs = 5;        // E
  std::size_t participants = 10;       // K
  std::size_t fleet_size = 200;        // N
  double target_accuracy = 90.0;       // percent
  std::size_t max_rounds = 200;
  double local_lr = 0.05;

  void validate() const;  // throws ConfigError
};

// ---- partitioning -------------------------------------------------------

struct PartitionMode {
  enum class Kind { Iid, NonIid } kind = Kind::Iid;
  double non_iid_fraction = 0.0;

  static PartitionMode iid() { return {}; }
  static PartitionMode non_iid(double frac) { return {Kind::NonIid, frac}; }
};

struct ShardSet {
  std::size_t num_classes = 0;
  std::vector<std::vector<std::size_t>> indices;     // per device
  std::vector<std::vector<std::size_t>> histograms;  // per device, per class
  std::vector<bool> non_iid;                         // per device

  std::size_t devices() const { return indices.size(); }
  std::size_t shard_size(std::size_t device) const { return indices.at(device).size(); }
};

ShardSet partition_dataset(std::span<const std::uint32_t> labels, std::size_t num_classes,
                           std::size_t num_devices, PartitionMode mode, double concentration,
                           std::uint64_t seed);

inline ShardSet partition_dataset(const Dataset& data, std::size_t num_devices, PartitionMode mode,
                                  double concentration, std::uint64_t seed) {
  return partition_dataset(data.labels, data.num_classes, num_devices, mode, concentration, seed);
}

std::size_t classes_present(const ShardSet& shards, std::size_t device);

// Mean Shannon entropy (nats) of per-device class distributions.
double mean_class_entropy(const ShardSet& shards);

// ---- file formats -------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// IDX image + label files; pixels scaled to [0, 1].
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::optional<std::size_t> num_classes = std::nullopt);
void write_idx_dataset(const Dataset& data, const std::filesystem::path& images,
                       const std::filesystem::path& labels, std::size_t rows, std::size_t cols);

// One sample per line: label,feature,feature,...
void write_csv_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_csv_dataset(const std::filesystem::path& path,
                         std::optional<std::size_t> num_classes = std::nullopt);

}  // namespace fedsim
