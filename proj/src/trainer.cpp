#include "fedsim/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

void softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (auto& v : z) v /= s;
}

struct MlpView {
  std::size_t f, h, c;
  std::span<const double> p;
  const double* w1() const { return p.data(); }
  const double* b1() const { return p.data() + h * f; }
  const double* w2() const { return b1() + h; }
  const double* b2() const { return w2() + c * h; }
};

// Fills logits (and hidden activations for the MLP body).
void forward(const TrainableSpec& spec, std::span<const double> params, std::span<const double> x,
             std::span<double> logits, std::span<double> hidden) {
  const std::size_t f = spec.features, c = spec.classes;
  if (spec.body == BodyKind::Logistic) {
    const double* w = params.data();
    const double* b = params.data() + c * f;
    for (std::size_t k = 0; k < c; ++k) {
      double z = b[k];
      const double* wk = w + k * f;
      for (std::size_t j = 0; j < f; ++j) z += wk[j] * x[j];
      logits[k] = z;
    }
    return;
  }
  MlpView m{f, spec.hidden, c, params};
  for (std::size_t u = 0; u < m.h; ++u) {
    double a = m.b1()[u];
    const double* wu = m.w1() + u * f;
    for (std::size_t j = 0; j < f; ++j) a += wu[j] * x[j];
    hidden[u] = std::tanh(a);
  }
  for (std::size_t k = 0; k < c; ++k) {
    double z = m.b2()[k];
    const double* wk = m.w2() + k * m.h;
    for (std::size_t u = 0; u < m.h; ++u) z += wk[u] * hidden[u];
    logits[k] = z;
  }
}

}  // namespace

ModelState init_model(const TrainableSpec& spec, std::uint64_t seed) {
  ModelState m;
  m.params.assign(spec.param_count(), 0.0);
  if (spec.body == BodyKind::Mlp) {
    Rng rng{seed, 0x696e6974ULL};
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.features));
    for (std::size_t i = 0; i < spec.hidden * spec.features; ++i)
      m.params[i] = rng.uniform(-bound, bound);
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(spec.hidden));
    const std::size_t w2 = spec.hidden * spec.features + spec.hidden;
    for (std::size_t i = 0; i < spec.classes * spec.hidden; ++i)
      m.params[w2 + i] = rng.uniform(-bound2, bound2);
  }
  return m;
}

double loss_and_gradient(const TrainableSpec& spec, std::span<const double> params,
                         const Dataset& data, std::span<const std::size_t> batch,
                         std::span<double> grad) {
  if (params.size() != spec.param_count() || grad.size() != params.size())
    throw ContractViolation("parameter/gradient length does not match model");
  if (batch.empty()) throw ContractViolation("empty batch");
  const std::size_t f = spec.features, c = spec.classes, h = spec.hidden;
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> z(c), hid(h), dh(h);
  double loss = 0.0;
  for (auto idx : batch) {
    const auto x = data.row(idx);
    const auto y = data.labels[idx];
    forward(spec, params, x, z, hid);
    softmax_inplace(z);
    loss -= std::log(std::max(z[y], 1e-300));
    z[y] -= 1.0;  // dL/dlogits
    if (spec.body == BodyKind::Logistic) {
      double* gw = grad.data();
      double* gb = grad.data() + c * f;
      for (std::size_t k = 0; k < c; ++k) {
        double* gwk = gw + k * f;
        for (std::size_t j = 0; j < f; ++j) gwk[j] += z[k] * x[j];
        gb[k] += z[k];
      }
      continue;
    }
    MlpView m{f, h, c, params};
    double* gw1 = grad.data();
    double* gb1 = gw1 + h * f;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + c * h;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      const double* w2k = m.w2() + k * h;
      for (std::size_t u = 0; u < h; ++u) {
        gw2[k * h + u] += z[k] * hid[u];
        dh[u] += w2k[u] * z[k];
      }
      gb2[k] += z[k];
    }
    for (std::size_t u = 0; u < h; ++u) {
      const double da = dh[u] * (1.0 - hid[u] * hid[u]);
      double* gw1u = gw1 + u * f;
      for (std::size_t j = 0; j < f; ++j) gw1u[j] += da * x[j];
      gb1[u] += da;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad) g *= inv;
  return loss * inv;
}

std::uint32_t predict(const TrainableSpec& spec, std::span<const double> params,
                      std::span<const double> x) {
  std::vector<double> z(spec.classes), hid(spec.hidden);
  forward(spec, params, x, z, hid);
  // max_element returns the first maximum, i.e. the lowest class index on ties.
  return static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

LocalUpdate local_train(const TrainableSpec& spec, const ModelState& global, const Dataset& data,
                        std::span<const std::size_t> shard, const LocalTrainParams& p,
                        std::uint64_t seed, std::size_t device) {
  if (shard.empty()) throw ContractViolation("device " + std::to_string(device) + " has an empty shard");
  if (p.batch_size < 1 || p.epochs < 1) throw ContractViolation("B and E must be >= 1");
  if (global.params.size() != spec.param_count())
    throw ContractViolation("global model length does not match model spec");

  std::vector<double> w = global.params;
  std::vector<double> grad(w.size());
  std::vector<std::size_t> order(shard.begin(), shard.end());
  Rng rng{seed};
  for (std::size_t e = 0; e < p.epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += p.batch_size) {
      const std::size_t len = std::min(p.batch_size, order.size() - start);
      const double loss =
          loss_and_gradient(spec, w, data, std::span(order).subspan(start, len), grad);
      if (!std::isfinite(loss))
        throw DivergenceError(device, "local training diverged (non-finite loss)");
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= p.lr * grad[i];
    }
  }
  LocalUpdate u;
  u.device = device;
  u.sample_count = shard.size();
  u.delta.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) u.delta[i] = w[i] - global.params[i];
  for (double d : u.delta)
    if (!std::isfinite(d)) throw DivergenceError(device, "local update is not finite");
  return u;
}

std::vector<LocalUpdate> train_participants(const TrainableSpec& spec, const ModelState& global,
                                            const Dataset& data, const ShardSet& shards,
                                            std::span<const std::size_t> devices,
                                            const LocalTrainParams& p, std::uint64_t train_seed,
                                            std::uint64_t round, Exec exec) {
  std::vector<LocalUpdate> out(devices.size());
  auto one = [&](std::size_t i) {
    const auto d = devices[i];
    out[i] = local_train(spec, global, data, shards.indices.at(d), p,
                         derive_seed({train_seed, round, static_cast<std::uint64_t>(d)}), d);
  };
  const auto n = static_cast<long long>(devices.size());
  if (exec == Exec::Parallel) {
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < n; ++i) {
      try {
        one(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
  } else {
    for (long long i = 0; i < n; ++i) one(static_cast<std::size_t>(i));
  }
  return out;
}

ModelState aggregate(const ModelState& global, std::span<const LocalUpdate> updates,
                     bool unweighted) {
  if (updates.empty()) throw ContractViolation("aggregate needs at least one update");
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.delta.size() != global.params.size())
      throw ContractViolation("update length does not match global model");
    if (u.sample_count == 0) throw ContractViolation("update with zero samples");
    total += static_cast<double>(u.sample_count);
  }
  ModelState next = global;
  next.version = global.version + 1;
  for (const auto& u : updates) {
    const double w = unweighted ? 1.0 / static_cast<double>(updates.size())
                                : static_cast<double>(u.sample_count) / total;
    for (std::size_t i = 0; i < next.params.size(); ++i) next.params[i] += w * u.delta[i];
  }
  return next;
}

double evaluate(const TrainableSpec& spec, const ModelState& model, const Dataset& test,
                Exec exec) {
  if (test.size() == 0) throw ContractViolation("empty test set");
  const auto n = static_cast<long long>(test.size());
  long long correct = 0;
  if (exec == Exec::Parallel) {
#pragma omp parallel for reduction(+ : correct) schedule(static)
    for (long long i = 0; i < n; ++i)
      if (predict(spec, model.params, test.row(static_cast<std::size_t>(i))) ==
          test.labels[static_cast<std::size_t>(i)])
        ++correct;
  } else {
    for (long long i = 0; i < n; ++i)
      if (predict(spec, model.params, test.row(static_cast<std::size_t>(i))) ==
          test.labels[static_cast<std::size_t>(i)])
        ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

double round_time(std::span<const ParticipantTiming> participants) {
  double t = 0.0;
  for (const auto& p : participants) t = std::max(t, p.total());
  return t;
}

RoundTiming simulate_timing(std::span<const std::size_t> participants,
                            std::span<const ExecTargetChoice> targets,
                            std::span<const DeviceConditions> conditions, const NnDescriptor& nn,
                            const GlobalParams& params, const ShardSet& shards, const Fleet& fleet) {
  if (targets.size() != participants.size())
    throw ContractViolation("one execution target per participant required");
  if (conditions.size() != fleet.size())
    throw ContractViolation("conditions must cover every device");
  RoundTiming rt;
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const auto d = participants[i];
    const auto& c = conditions[d];
    const double tp = effective_throughput(fleet.at(d), targets[i], c.interference);
    ParticipantTiming pt;
    pt.device = d;
    pt.t_comp = nn.flops_per_sample * static_cast<double>(shards.shard_size(d)) *
                static_cast<double>(params.local_epochs) / tp;
    pt.t_comm = nn.update_bytes * 8.0 / (c.network.bandwidth_mbps * 1e6);
    rt.participants.push_back(pt);
  }
  rt.t_round = round_time(rt.participants);
  return rt;
}

std::vector<bool> straggler_mask(std::span<const ParticipantTiming> participants,
                                 double deadline_factor) {
  std::vector<bool> keep(participants.size(), true);
  if (participants.empty()) return keep;
  std::vector<double> t;
  for (const auto& p : participants) t.push_back(p.total());
  std::vector<double> sorted = t;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  for (std::size_t i = 0; i < n; ++i) keep[i] = t[i] <= deadline_factor * median;
  return keep;
}

// ---- checkpoints --------------------------------------------------------

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(std::istream& in) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    const int b = in.get();
    if (b == EOF) throw std::runtime_error("truncated checkpoint");
    v |= static_cast<U>(static_cast<unsigned char>(b)) << (8 * i);
  }
  return v;
}

}  // namespace

void save_checkpoint(const ModelState& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write("FLCK", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.version));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.params.size()));
  for (double p : model.params) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(p)));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string_view(magic, 4) != "FLCK")
    throw std::runtime_error(path.string() + ": not a checkpoint (bad magic)");
  ModelState m;
  m.version = get_le<std::uint32_t>(in);
  const auto n = get_le<std::uint64_t>(in);
  m.params.resize(n);
  for (auto& p : m.params) p = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(in)));
  return m;
}

}  // namespace fedsim
