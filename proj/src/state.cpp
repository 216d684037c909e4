#include "fedsim/state.hpp"

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

constexpr std::array<std::size_t, 6> kGlobalRadix{4, 2, 3, 3, 3, 3};
constexpr std::array<std::size_t, 4> kLocalRadix{4, 4, 2, 3};

template <std::size_t N>
std::size_t pack(const std::array<std::uint8_t, N>& v, const std::array<std::size_t, N>& radix) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (v[i] >= radix[i]) throw ContractViolation("state bin out of range");
    idx = idx * radix[i] + v[i];
  }
  return idx;
}

template <std::size_t N>
std::array<std::uint8_t, N> unpack(std::size_t idx, const std::array<std::size_t, N>& radix) {
  std::array<std::uint8_t, N> v{};
  for (std::size_t i = N; i-- > 0;) {
    v[i] = static_cast<std::uint8_t>(idx % radix[i]);
    idx /= radix[i];
  }
  if (idx != 0) throw ContractViolation("state index out of range");
  return v;
}

}  // namespace

std::size_t GlobalState::index() const { return pack<6>({conv, fc, rc, b, e, k}, kGlobalRadix); }

GlobalState GlobalState::from_index(std::size_t i) {
  auto v = unpack<6>(i, kGlobalRadix);
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

std::size_t LocalState::index() const { return pack<4>({co_cpu, co_mem, network, data}, kLocalRadix); }

LocalState LocalState::from_index(std::size_t i) {
  auto v = unpack<4>(i, kLocalRadix);
  return {v[0], v[1], v[2], v[3]};
}

std::uint8_t bin_conv(std::size_t n) { return n < 10 ? 0 : n < 20 ? 1 : n < 40 ? 2 : 3; }
std::uint8_t bin_fc(std::size_t n) { return n < 10 ? 0 : 1; }
std::uint8_t bin_rc(std::size_t n) { return n < 5 ? 0 : n < 10 ? 1 : 2; }
std::uint8_t bin_batch(std::size_t b) { return b < 8 ? 0 : b < 32 ? 1 : 2; }
std::uint8_t bin_epochs(std::size_t e) { return e < 5 ? 0 : e < 10 ? 1 : 2; }
std::uint8_t bin_participants(std::size_t k) { return k < 10 ? 0 : k < 50 ? 1 : 2; }

std::uint8_t bin_utilization(double f) {
  if (f <= 0.0) return 0;
  return f < 0.25 ? 1 : f < 0.75 ? 2 : 3;
}

std::uint8_t bin_network(double mbps) { return mbps > kWeakBandwidthMbps ? 0 : 1; }

std::uint8_t bin_data(std::size_t present, std::size_t total) {
  if (total == 0) throw ContractViolation("class count must be > 0");
  if (present >= total) return 2;
  // present / total < 0.25, in integers
  return present * 4 < total ? 0 : 1;
}

GlobalState featurize_global(const NnDescriptor& nn, const GlobalParams& p) {
  return {bin_conv(nn.conv_layers), bin_fc(nn.fc_layers),       bin_rc(nn.rc_layers),
          bin_batch(p.batch_size),  bin_epochs(p.local_epochs), bin_participants(p.participants)};
}

LocalState featurize_local(const DeviceConditions& c, std::size_t present, std::size_t total) {
  return {bin_utilization(c.interference.cpu_util), bin_utilization(c.interference.mem_util),
          bin_network(c.network.bandwidth_mbps), bin_data(present, total)};
}

Features featurize(const NnDescriptor& nn, const GlobalParams& params,
                   std::span<const DeviceConditions> conditions, const ShardSet& shards) {
  if (conditions.size() != shards.devices())
    throw ContractViolation("conditions and shards cover different device counts");
  Features f;
  f.global = featurize_global(nn, params);
  f.local.reserve(conditions.size());
  for (std::size_t d = 0; d < conditions.size(); ++d)
    f.local.push_back(featurize_local(conditions[d], classes_present(shards, d), shards.num_classes));
  return f;
}

const std::array<StateField, 6>& global_fields() {
  static const std::array<StateField, 6> f{{
      {"conv", {"Small", "Medium", "Large", "Larger"}},
      {"fc", {"Small", "Large"}},
      {"rc", {"Small", "Medium", "Large"}},
      {"b", {"Small", "Medium", "Large"}},
      {"e", {"Small", "Medium", "Large"}},
      {"k", {"Small", "Medium", "Large"}},
  }};
  return f;
}

const std::array<StateField, 4>& local_fields() {
  static const std::array<StateField, 4> f{{
      {"co_cpu", {"None", "Small", "Medium", "Large"}},
      {"co_mem", {"None", "Small", "Medium", "Large"}},
      {"network", {"Regular", "Bad"}},
      {"data", {"Small", "Medium", "Large"}},
  }};
  return f;
}

namespace {

template <std::size_t N>
std::string join(const std::array<StateField, N>& fields, const std::array<std::uint8_t, N>& v) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) {
    if (i) out += ' ';
    out += fields[i].name;
    out += '=';
    out += fields[i].bins.at(v[i]);
  }
  return out;
}

}  // namespace

std::string describe(const GlobalState& s) {
  return join<6>(global_fields(), {s.conv, s.fc, s.rc, s.b, s.e, s.k});
}

std::string describe(const LocalState& s) {
  return join<4>(local_fields(), {s.co_cpu, s.co_mem, s.network, s.data});
}

}  // namespace fedsim
