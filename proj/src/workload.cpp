#include "fedsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_features = num_features;
  out.num_classes = num_classes;
  out.labels.reserve(indices.size());
  out.features.reserve(indices.size() * num_features);
  for (auto i : indices) {
    out.labels.push_back(labels.at(i));
    auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
  }
  return out;
}

Dataset make_gaussian_mixture(const MixtureSpec& spec, std::uint64_t mean_seed,
                              std::uint64_t sample_seed) {
  if (spec.samples == 0 || spec.features == 0 || spec.classes == 0)
    throw ConfigError("mixture needs samples, features and classes > 0");
  if (!(spec.scale_spread >= 1.0)) throw ConfigError("mixture scale_spread must be >= 1");
  std::vector<double> scale(spec.features, 1.0);
  if (spec.features > 1)
    for (std::size_t f = 0; f < spec.features; ++f)
      scale[f] = std::pow(spec.scale_spread, 2.0 * static_cast<double>(f) /
                                                 static_cast<double>(spec.features - 1) - 1.0);
  Rng mean_rng{mean_seed, 0x6d65616eULL};
  std::vector<double> means(spec.classes * spec.features);
  for (auto& m : means) m = mean_rng.normal(0.0, spec.separation);

  Rng rng{sample_seed, 0x73616d70ULL};
  Dataset d;
  d.num_features = spec.features;
  d.num_classes = spec.classes;
  d.labels.resize(spec.samples);
  d.features.resize(spec.samples * spec.features);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const auto c = static_cast<std::uint32_t>(i % spec.classes);
    d.labels[i] = c;
    for (std::size_t f = 0; f < spec.features; ++f)
      d.features[i * spec.features + f] = scale[f] * (means[c * spec.features + f] + rng.normal());
  }
  return d;
}

std::string_view to_string(NnKind k) {
  switch (k) {
    case NnKind::CnnLike: return "CnnLike";
    case NnKind::LstmLike: return "LstmLike";
    case NnKind::MobileNetLike: return "MobileNetLike";
    case NnKind::ToyLogistic: return "ToyLogistic";
    case NnKind::ToyMlp: return "ToyMlp";
  }
  return "?";
}

NnKind parse_nn_kind(std::string_view s) {
  for (auto k : {NnKind::CnnLike, NnKind::LstmLike, NnKind::MobileNetLike, NnKind::ToyLogistic,
                 NnKind::ToyMlp})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown nn kind '" + std::string(s) + "'");
}

std::size_t TrainableSpec::param_count() const {
  if (body == BodyKind::Logistic) return features * classes + classes;
  return features * hidden + hidden + hidden * classes + classes;
}

NnDescriptor NnDescriptor::scaled(double flops_scale, double bytes_scale) const {
  if (!(flops_scale > 0.0) || !(bytes_scale > 0.0))
    throw ConfigError("workload scales must be positive");
  NnDescriptor d = *this;
  d.flops_per_sample *= flops_scale;
  d.update_bytes *= bytes_scale;
  return d;
}

NnDescriptor describe_nn(NnKind kind, std::size_t features, std::size_t classes,
                         std::size_t hidden) {
  if (features == 0 || classes < 2) throw ConfigError("model needs features > 0 and classes >= 2");
  NnDescriptor d;
  d.kind = kind;
  d.trainable = {BodyKind::Mlp, features, classes, hidden};
  // Nominal parameter counts of the full-size models the *Like kinds stand in for.
  double nominal_params = 0.0;
  switch (kind) {
    case NnKind::ToyLogistic:
      d.trainable = {BodyKind::Logistic, features, classes, 0};
      d.fc_layers = 1;
      break;
    case NnKind::ToyMlp:
      d.fc_layers = 2;
      break;
    case NnKind::CnnLike:
      d.conv_layers = 2;
      d.fc_layers = 2;
      nominal_params = 1'663'370.0;
      break;
    case NnKind::LstmLike:
      d.fc_layers = 1;
      d.rc_layers = 2;
      nominal_params = 866'578.0;
      break;
    case NnKind::MobileNetLike:
      d.conv_layers = 28;
      d.fc_layers = 1;
      nominal_params = 4'231'976.0;
      break;
  }
  if (d.trainable.body == BodyKind::Mlp && hidden == 0)
    throw ConfigError("MLP body needs at least one hidden unit");
  const double params =
      nominal_params > 0.0 ? nominal_params : static_cast<double>(d.trainable.param_count());
  d.flops_per_sample = kFlopsPerParamPerSample * params;
  d.update_bytes = kBytesPerParam * params;
  return d;
}

void GlobalParams::validate() const {
  if (batch_size < 1) throw ConfigError("batch size B must be >= 1");
  if (local_epochs < 1) throw ConfigError("local epochs E must be >= 1");
  if (participants < 1 || participants > fleet_size)
    throw ConfigError("participants K must satisfy 1 <= K <= N");
  if (!(target_accuracy > 0.0) || target_accuracy > 100.0)
    throw ConfigError("target accuracy must lie in (0, 100]");
  if (!(local_lr >= 0.0) || !std::isfinite(local_lr))
    throw ConfigError("local learning rate must be finite and >= 0");
}

// ---- partitioning -------------------------------------------------------

namespace {

// Largest-remainder rounding of shares * total; result sums to total exactly.
std::vector<std::size_t> apportion(std::span<const double> shares, std::size_t total) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) counts[rem[j % rem.size()].second]++;
  return counts;
}

}  // namespace

ShardSet partition_dataset(std::span<const std::uint32_t> labels, std::size_t num_classes,
                           std::size_t num_devices, PartitionMode mode, double concentration,
                           std::uint64_t seed) {
  if (labels.empty()) throw ConfigError("cannot partition an empty dataset");
  if (num_devices == 0) throw ConfigError("cannot partition across zero devices");
  if (labels.size() < num_devices) throw ConfigError("dataset has fewer samples than devices");
  if (!(concentration > 0.0)) throw ConfigError("Dirichlet concentration must be > 0");
  if (mode.kind == PartitionMode::Kind::NonIid &&
      (mode.non_iid_fraction < 0.0 || mode.non_iid_fraction > 1.0))
    throw ConfigError("non-IID fraction must lie in [0, 1]");

  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw ConfigError("label exceeds class count");
    by_class[labels[i]].push_back(i);
  }

  Rng rng{seed, 0x70617274ULL};
  std::size_t non_iid_count = 0;
  if (mode.kind == PartitionMode::Kind::NonIid)
    non_iid_count = static_cast<std::size_t>(
        std::ceil(mode.non_iid_fraction * static_cast<double>(num_devices) - 1e-9));

  ShardSet s;
  s.num_classes = num_classes;
  s.indices.assign(num_devices, {});
  s.non_iid.assign(num_devices, false);
  auto picked = rng.sample_without_replacement(num_devices, non_iid_count);
  std::sort(picked.begin(), picked.end());
  for (auto d : picked) s.non_iid[d] = true;

  std::vector<std::size_t> iid_devices, skew_devices;
  for (std::size_t d = 0; d < num_devices; ++d) (s.non_iid[d] ? skew_devices : iid_devices).push_back(d);

  std::size_t cursor = 0;  // round-robin position over IID devices, carried across classes
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& pool = by_class[c];
    rng.shuffle(pool);
    const std::size_t n = pool.size();
    std::size_t iid_take = n;
    if (!skew_devices.empty())
      iid_take = static_cast<std::size_t>(std::llround(
          static_cast<double>(n) * static_cast<double>(iid_devices.size()) /
          static_cast<double>(num_devices)));
    std::size_t k = 0;
    for (; k < iid_take; ++k) {
      s.indices[iid_devices[cursor % iid_devices.size()]].push_back(pool[k]);
      ++cursor;
    }
    if (skew_devices.empty()) continue;
    const auto shares = rng.dirichlet(skew_devices.size(), concentration);
    const auto counts = apportion(shares, n - iid_take);
    for (std::size_t j = 0; j < skew_devices.size(); ++j)
      for (std::size_t r = 0; r < counts[j]; ++r) s.indices[skew_devices[j]].push_back(pool[k++]);
  }

  // Nobody may end up empty: move one sample from the largest shard.
  for (;;) {
    auto empty = std::find_if(s.indices.begin(), s.indices.end(),
                              [](const auto& v) { return v.empty(); });
    if (empty == s.indices.end()) break;
    auto largest = std::max_element(s.indices.begin(), s.indices.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    empty->push_back(largest->back());
    largest->pop_back();
  }

  s.histograms.assign(num_devices, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t d = 0; d < num_devices; ++d) {
    std::sort(s.indices[d].begin(), s.indices[d].end());
    for (auto i : s.indices[d]) s.histograms[d][labels[i]]++;
  }
  return s;
}

std::size_t classes_present(const ShardSet& shards, std::size_t device) {
  const auto& h = shards.histograms.at(device);
  return static_cast<std::size_t>(std::count_if(h.begin(), h.end(), [](auto n) { return n > 0; }));
}

double mean_class_entropy(const ShardSet& shards) {
  double total = 0.0;
  for (const auto& h : shards.histograms) {
    const double n = static_cast<double>(std::accumulate(h.begin(), h.end(), std::size_t{0}));
    double e = 0.0;
    for (auto c : h)
      if (c > 0) {
        const double p = static_cast<double>(c) / n;
        e -= p * std::log(p);
      }
    total += e;
  }
  return total / static_cast<double>(shards.histograms.size());
}

}  // namespace fedsim
