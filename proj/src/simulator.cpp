#include "fedsim/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fedsim/errors.hpp"
#include "fedsim/state.hpp"
#include "fedsim/variance.hpp"

namespace fedsim {

namespace {

constexpr std::uint64_t kMeanStream = 0x6d65616e;
constexpr std::uint64_t kTrainStream = 0x74726e;
constexpr std::uint64_t kTestStream = 0x747374;
constexpr std::uint64_t kShardStream = 0x73686172;
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kQInitStream = 0x71696e;
constexpr std::uint64_t kRoundsPerEpisode = 1'000'000;

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Dataset load_split(const DatasetConfig& d, bool train, std::optional<std::size_t> classes) {
  if (d.source == DatasetConfig::Source::Idx)
    return train ? load_idx_dataset(d.train_images, d.train_labels, classes)
                 : load_idx_dataset(d.test_images, d.test_labels, classes);
  return read_csv_dataset(train ? d.train_csv : d.test_csv, classes);
}

}  // namespace

World build_world(const ExperimentConfig& cfg) {
  cfg.validate();
  World w;
  w.fleet = build_fleet(cfg.fleet);
  w.params = cfg.params;

  const auto& ds = cfg.workload.dataset;
  if (ds.source == DatasetConfig::Source::Synthetic) {
    const auto means = derive_seed({cfg.seeds.data, kMeanStream});
    w.train = make_gaussian_mixture(ds.mixture, means, derive_seed({cfg.seeds.data, kTrainStream}));
    auto test_spec = ds.mixture;
    test_spec.samples = ds.test_samples;
    w.test = make_gaussian_mixture(test_spec, means, derive_seed({cfg.seeds.data, kTestStream}));
  } else {
    w.train = load_split(ds, true, std::nullopt);
    w.test = load_split(ds, false, w.train.num_classes);
    if (w.test.num_features != w.train.num_features)
      throw ConfigError("train and test sets disagree on feature count");
  }
  if (w.train.size() < w.fleet.size())
    throw ConfigError("training set has fewer samples than the fleet has devices");

  w.nn = describe_nn(cfg.workload.nn, w.train.num_features, w.train.num_classes, cfg.workload.hidden)
             .scaled(cfg.workload.flops_scale, cfg.workload.bytes_scale);
  w.shards = partition_dataset(w.train, w.fleet.size(), cfg.data.mode, cfg.data.concentration,
                               derive_seed({cfg.seeds.data, kShardStream}));
  w.actions = ActionSpace(cfg.controller.action_targets, cfg.controller.exposed_levels);
  return w;
}

// ---- RoundEngine ----------------------------------------------------------

RoundEngine::RoundEngine(const World& world, RoundSettings settings, const ModelState& model,
                         double accuracy_prev, std::vector<DeviceConditions> conditions,
                         std::uint64_t round)
    : world_(world),
      settings_(settings),
      model_(model),
      accuracy_prev_(accuracy_prev),
      conditions_(std::move(conditions)),
      round_(round) {
  if (conditions_.size() != world_.fleet.size())
    throw ContractViolation("round engine needs conditions for every device");
}

void RoundEngine::prepare(std::span<const std::size_t> devices) {
  std::vector<std::size_t> todo;
  for (auto d : devices)
    if (!cache_.count(d) && std::find(todo.begin(), todo.end(), d) == todo.end()) todo.push_back(d);
  if (todo.empty()) return;
  const LocalTrainParams lp{world_.params.batch_size, world_.params.local_epochs,
                            world_.params.local_lr};
  auto ups = train_participants(world_.nn.trainable, model_, world_.train, world_.shards, todo, lp,
                                settings_.train_seed, round_, settings_.exec);
  for (auto& u : ups) cache_.emplace(u.device, std::move(u));
}

RoundOutcome RoundEngine::run(std::span<const std::size_t> participants,
                              std::span<const ExecTargetChoice> targets) {
  const auto& fleet = world_.fleet;
  const std::size_t n = fleet.size();
  if (participants.empty()) throw ContractViolation("a round needs at least one participant");
  if (!std::is_sorted(participants.begin(), participants.end()) ||
      std::adjacent_find(participants.begin(), participants.end()) != participants.end())
    throw ContractViolation("participants must be strictly ascending");

  RoundOutcome out;
  out.participants.assign(participants.begin(), participants.end());
  out.accuracy_prev = accuracy_prev_;
  prepare(participants);

  auto timing = simulate_timing(participants, targets, conditions_, world_.nn, world_.params,
                                world_.shards, fleet);
  out.aggregated = settings_.exclude_stragglers
                       ? straggler_mask(timing.participants, settings_.straggler_deadline)
                       : std::vector<bool>(participants.size(), true);
  std::vector<ParticipantTiming> kept;
  std::vector<LocalUpdate> updates;
  for (std::size_t i = 0; i < participants.size(); ++i)
    if (out.aggregated[i]) {
      kept.push_back(timing.participants[i]);
      updates.push_back(cache_.at(participants[i]));
    }
  timing.t_round = round_time(kept);
  const double t_round = timing.t_round;

  out.model = aggregate(model_, updates, settings_.unweighted_average);
  out.accuracy = evaluate(world_.nn.trainable, out.model, world_.test, settings_.exec);

  std::vector<bool> selected(n, false);
  out.traces.assign(n, EnergyTrace::idle(t_round));
  for (std::size_t i = 0; i < participants.size(); ++i) {
    const auto d = participants[i];
    const auto& pt = timing.participants[i];
    selected[d] = true;
    EnergyTrace tr;
    tr.active = true;
    tr.target = targets[i].kind;
    tr.t_round = t_round;
    tr.signal_band = conditions_[d].network.signal_band;
    // A dropped straggler is cut off at the deadline.
    const double busy = std::min(pt.t_comp, t_round);
    const double tx = std::clamp(t_round - busy, 0.0, pt.t_comm);
    tr.busy.push_back({targets[i].step, busy});
    tr.t_tx = tx;
    tr.t_idle = std::max(0.0, t_round - busy - tx);
    out.traces[d] = std::move(tr);
  }
  out.timing = std::move(timing);
  out.energy = energy_rewards(out.traces, selected, fleet, settings_.exec);

  const double scale = settings_.energy_scale;
  double sum = 0.0;
  for (auto d : participants) {
    const double r = compute_reward({out.energy.r_energy_global / scale,
                                     out.energy.r_energy_local[d] / scale, out.accuracy,
                                     accuracy_prev_, settings_.alpha, settings_.beta});
    out.rewards.push_back(r);
    sum += r;
  }
  out.reward = sum / static_cast<double>(participants.size());
  return out;
}

double RoundEngine::score(std::span<const std::size_t> participants,
                          std::span<const std::size_t> actions) {
  std::vector<ExecTargetChoice> targets;
  for (std::size_t i = 0; i < participants.size(); ++i)
    targets.push_back(world_.actions.resolve(world_.fleet[participants[i]], actions[i]));
  return run(participants, targets).reward;
}

// ---- experiment loop ---------------------------------------------------------

std::vector<RoundRecord> ExperimentResult::all_records() const {
  std::vector<RoundRecord> all;
  for (const auto& ep : warmup) all.insert(all.end(), ep.begin(), ep.end());
  all.insert(all.end(), records.begin(), records.end());
  return all;
}

namespace {

BaselinePolicy baseline_for(const ExperimentConfig& cfg) {
  BaselinePolicy b;
  switch (cfg.policy) {
    case PolicyKind::Random: b.kind = BaselinePolicy::Kind::Random; break;
    case PolicyKind::Power: b.kind = BaselinePolicy::Kind::Power; break;
    case PolicyKind::Performance: b.kind = BaselinePolicy::Kind::Performance; break;
    case PolicyKind::ClusterFixed: b.kind = BaselinePolicy::Kind::ClusterFixed; break;
    default: throw ContractViolation("not a baseline policy");
  }
  b.cluster = cfg.cluster;
  return b;
}

struct EpisodeResult {
  std::vector<RoundRecord> records;
  ModelState model;
  double initial_accuracy = 0.0;
};

// Episode key 0 is the measured training; warm-up episodes use keys 1..W so
// the measured episode sees the same conditions whatever precedes it.
EpisodeResult run_episode(const ExperimentConfig& cfg, const World& world, std::size_t episode,
                          std::uint64_t key, QStore* q) {
  const auto& params = world.params;
  const auto exec = cfg.training.exec;
  const bool learned = cfg.policy == PolicyKind::AutoFl;
  const bool baseline = !learned && cfg.policy != PolicyKind::Oracle;

  RoundSettings rs;
  rs.exclude_stragglers = baseline;
  rs.straggler_deadline = cfg.training.straggler_deadline;
  rs.unweighted_average = cfg.training.unweighted_average;
  rs.alpha = cfg.controller.alpha;
  rs.beta = cfg.controller.beta;
  rs.energy_scale = cfg.controller.energy_scale;
  rs.train_seed = cfg.seeds.train;
  rs.exec = exec;

  EpisodeResult ep;
  ep.model = init_model(world.nn.trainable, derive_seed({cfg.seeds.train, kInitStream}));
  ep.initial_accuracy = evaluate(world.nn.trainable, ep.model, world.test, exec);
  double acc_prev = ep.initial_accuracy;
  Rng rng({cfg.seeds.rl, key});
  const GlobalState g = featurize_global(world.nn, params);
  const std::size_t n = world.fleet.size();

  for (std::size_t r = 0; r < params.max_rounds; ++r) {
    const std::uint64_t round_key = key * kRoundsPerEpisode + r;
    auto conds = sample_round_conditions(cfg.variance, n, round_key, cfg.seeds.variance, exec);
    const auto feats = featurize(world.nn, params, conds, world.shards);
    RoundEngine engine(world, rs, ep.model, acc_prev, conds, round_key);

    Selection sel;
    if (learned) {
      sel = select(*q, world.fleet, g, feats.local, params.participants, cfg.controller.epsilon, rng);
    } else if (baseline) {
      sel = baseline_select(baseline_for(cfg), world.fleet, params.participants, world.actions, rng);
    } else {
      auto best = oracle_search(world.fleet, params.participants, world.actions,
                                [&](auto p, auto a) { return engine.score(p, a); });
      sel.choices.assign(n, {});
      sel.participants = best.participants;
      for (std::size_t i = 0; i < best.participants.size(); ++i) {
        auto& c = sel.choices[best.participants[i]];
        c.selected = true;
        c.action = best.actions[i];
        c.target = world.actions.resolve(world.fleet[best.participants[i]], c.action);
      }
    }

    auto out = engine.run(sel.participants, sel.targets());

    if (learned) {
      for (std::size_t i = 0; i < sel.participants.size(); ++i) {
        const auto d = sel.participants[i];
        const auto next = sample_device_conditions(cfg.variance, d, round_key + 1, cfg.seeds.variance);
        const auto l_next = featurize_local(next, classes_present(world.shards, d),
                                            world.shards.num_classes);
        q_update(*q, world.fleet[d], g, feats.local[d], sel.choices[d].action, out.rewards[i], g,
                 l_next, cfg.controller.q);
      }
    }

    RoundRecord rec;
    rec.round = r;
    rec.episode = episode;
    rec.participants = sel.participants;
    for (auto d : sel.participants) {
      const auto& c = sel.choices[d];
      rec.actions.push_back(baseline ? std::string(to_string(c.target.kind)) + "@" +
                                           std::to_string(c.target.step)
                                     : world.actions.name(c.action));
    }
    rec.aggregated = static_cast<std::size_t>(std::count(out.aggregated.begin(), out.aggregated.end(), true));
    rec.t_round = out.timing.t_round;
    rec.energy_local = out.energy.r_energy_local;
    rec.energy_global = out.energy.r_energy_global;
    rec.accuracy = out.accuracy;
    rec.reward = out.reward;
    rec.explored = sel.explored;
    ep.records.push_back(std::move(rec));

    ep.model = std::move(out.model);
    acc_prev = out.accuracy;
    if (cfg.run.stop_at_target &&
        detect_convergence(ep.records, params.target_accuracy, cfg.run.patience))
      break;
  }
  return ep;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const World world = build_world(cfg);
  return run_experiment(cfg, world);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const World& world) {
  cfg.validate();
  ExperimentResult res;
  QStore* q = nullptr;
  if (cfg.policy == PolicyKind::AutoFl) {
    res.qstore.emplace(cfg.controller.qmode, world.actions, world.fleet,
                       derive_seed({cfg.seeds.rl, kQInitStream}), cfg.controller.init_scale);
    if (cfg.controller.qstore_in) {
      std::ifstream in(*cfg.controller.qstore_in);
      if (!in) throw ConfigError("cannot open Q-store snapshot " + cfg.controller.qstore_in->string());
      res.qstore->load(in);
    }
    q = &*res.qstore;
    for (std::size_t e = 0; e < cfg.controller.warmup_episodes; ++e)
      res.warmup.push_back(run_episode(cfg, world, e, e + 1, q).records);
  }
  auto ep = run_episode(cfg, world, res.warmup.size(), 0, q);
  res.records = std::move(ep.records);
  res.model = std::move(ep.model);
  res.initial_accuracy = ep.initial_accuracy;
  return res;
}

// ---- metrics ----------------------------------------------------------------

std::optional<std::size_t> detect_convergence(std::span<const RoundRecord> records,
                                              double target_accuracy, std::size_t patience) {
  const std::size_t need = std::max<std::size_t>(patience, 1);
  std::size_t run = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    run = records[i].accuracy >= target_accuracy ? run + 1 : 0;
    if (run == need) return records[i + 1 - need].round;
  }
  return std::nullopt;
}

Summary summarize(std::span<const RoundRecord> records, double target_accuracy,
                  std::size_t patience) {
  if (records.empty()) throw ContractViolation("summarize: no records");
  Summary s;
  s.rounds = records.size();
  s.convergence_round = detect_convergence(records, target_accuracy, patience);
  for (const auto& r : records) {
    s.total_time_s += r.t_round;
    s.total_energy_j += r.energy_global;
    if (s.convergence_round && r.round <= *s.convergence_round) s.time_to_convergence_s += r.t_round;
  }
  s.mean_t_round_s = s.total_time_s / static_cast<double>(records.size());
  s.final_accuracy = records.back().accuracy;
  if (s.total_time_s > 0.0) s.mean_power_w = s.total_energy_j / s.total_time_s;
  if (s.convergence_round && s.time_to_convergence_s > 0.0 && s.mean_power_w > 0.0)
    s.ppw = (1.0 / s.time_to_convergence_s) / s.mean_power_w;
  return s;
}

Summary summarize(std::span<const RoundRecord> records, std::span<const RoundRecord> baseline,
                  double target_accuracy, std::size_t patience) {
  auto s = summarize(records, target_accuracy, patience);
  const auto b = summarize(baseline, target_accuracy, patience);
  if (s.ppw && b.ppw) s.ppw_ratio = *s.ppw / *b.ppw;
  return s;
}

std::optional<std::size_t> reward_stabilization_round(std::span<const double> rewards,
                                                      std::size_t window, double tolerance) {
  if (window == 0) throw ContractViolation("stabilization window must be positive");
  if (rewards.size() < window) return std::nullopt;
  std::vector<double> means;
  double acc = 0.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    acc += rewards[t];
    if (t >= window) acc -= rewards[t - window];
    if (t + 1 < window) continue;
    means.push_back(acc / static_cast<double>(window));
    if (means.size() < window) continue;
    const auto first = means.end() - static_cast<std::ptrdiff_t>(window);
    const auto [lo, hi] = std::minmax_element(first, means.end());
    double level = 0.0;
    for (auto it = first; it != means.end(); ++it) level += std::abs(*it);
    level /= static_cast<double>(window);
    if (*hi - *lo <= tolerance * level) return t + 1;
  }
  return std::nullopt;
}

// ---- output -------------------------------------------------------------------

void write_records_csv(std::span<const RoundRecord> records, std::ostream& out) {
  out << kRecordsHeader << '\n';
  for (const auto& r : records)
    out << r.round << ',' << fmt(r.t_round) << ',' << fmt(r.energy_global) << ','
        << fmt(r.accuracy) << ',' << fmt(r.reward) << ',' << r.participants.size() << ','
        << (r.explored ? 1 : 0) << '\n';
}

void write_records_csv(std::span<const RoundRecord> records, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_records_csv(records, out);
  if (!out) throw std::runtime_error("error writing " + path.string());
}

std::vector<RoundRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open records file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRecordsHeader)
    throw ConfigError(path.string() + ": unexpected header");
  std::vector<RoundRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 7) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
    auto num = [&](const std::string& s) {
      double v = 0.0;
      auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
      return v;
    };
    RoundRecord r;
    r.round = static_cast<std::size_t>(num(f[0]));
    r.t_round = num(f[1]);
    r.energy_global = num(f[2]);
    r.accuracy = num(f[3]);
    r.reward = num(f[4]);
    r.participants.resize(static_cast<std::size_t>(num(f[5])));
    r.explored = num(f[6]) != 0.0;
    out.push_back(std::move(r));
  }
  return out;
}

std::string summary_json(const Summary& s, const ExperimentConfig* cfg) {
  using nlohmann::json;
  auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  json j;
  if (cfg) {
    j["name"] = cfg->name;
    j["policy"] = std::string(to_string(cfg->policy));
    j["target_accuracy"] = cfg->params.target_accuracy;
  }
  j["rounds"] = s.rounds;
  j["converged"] = s.convergence_round.has_value();
  j["convergence_round"] = opt(s.convergence_round);
  j["time_to_convergence_s"] = s.convergence_round ? json(s.time_to_convergence_s) : json(nullptr);
  j["total_time_s"] = s.total_time_s;
  j["total_energy_j"] = s.total_energy_j;
  j["mean_power_w"] = s.mean_power_w;
  j["ppw"] = opt(s.ppw);
  j["mean_t_round_s"] = s.mean_t_round_s;
  j["final_accuracy_pct"] = s.final_accuracy;
  if (s.ppw_ratio) j["ppw_ratio"] = *s.ppw_ratio;
  return j.dump(2);
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  auto open = [](const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
  };
  if (cfg.output.records_csv) write_records_csv(result.records, *cfg.output.records_csv);
  if (cfg.output.summary_json && !result.records.empty()) {
    auto out = open(*cfg.output.summary_json);
    out << summary_json(summarize(result.records, cfg.params.target_accuracy, cfg.run.patience), &cfg)
        << '\n';
  }
  if (cfg.output.qstore && result.qstore) {
    auto out = open(*cfg.output.qstore);
    result.qstore->save(out);
  }
}

}  // namespace fedsim
