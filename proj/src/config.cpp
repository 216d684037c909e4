#include "fedsim/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "fedsim/errors.hpp"

namespace fedsim {

std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::AutoFl: return "autofl";
    case PolicyKind::Random: return "random";
    case PolicyKind::Power: return "power";
    case PolicyKind::Performance: return "performance";
    case PolicyKind::ClusterFixed: return "cluster_fixed";
    case PolicyKind::Oracle: return "oracle";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view s) {
  for (auto p : {PolicyKind::AutoFl, PolicyKind::Random, PolicyKind::Power, PolicyKind::Performance,
                 PolicyKind::ClusterFixed, PolicyKind::Oracle})
    if (s == to_string(p)) return p;
  throw ConfigError("unknown policy '" + std::string(s) + "'");
}

void ExperimentConfig::validate() const {
  std::size_t n = 0;
  for (auto c : fleet.tier_counts) n += c;
  if (n == 0) throw ConfigError("fleet is empty");
  if (params.fleet_size != n)
    throw ConfigError("params.fleet_size (" + std::to_string(params.fleet_size) +
                      ") differs from the fleet's tier counts (" + std::to_string(n) + ")");
  params.validate();
  variance.validate();
  if (data.mode.kind == PartitionMode::Kind::NonIid &&
      !(data.mode.non_iid_fraction >= 0.0 && data.mode.non_iid_fraction <= 1.0))
    throw ConfigError("non-IID fraction must lie in [0, 1]");
  if (!(data.concentration > 0.0)) throw ConfigError("Dirichlet concentration must be > 0");
  if (!(workload.flops_scale > 0.0) || !(workload.bytes_scale > 0.0))
    throw ConfigError("cost scales must be > 0");
  const auto& c = controller;
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!(c.q.gamma > 0.0 && c.q.gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(c.q.mu >= 0.0 && c.q.mu < 1.0)) throw ConfigError("mu must lie in [0, 1)");
  if (!(c.energy_scale > 0.0)) throw ConfigError("energy_scale must be > 0");
  if (!(c.init_scale >= 0.0)) throw ConfigError("init_scale must be >= 0");
  if (c.action_targets.empty()) throw ConfigError("controller needs at least one action target");
  if (std::set<TargetKind>(c.action_targets.begin(), c.action_targets.end()).size() !=
      c.action_targets.size())
    throw ConfigError("duplicate action target");
  if (c.exposed_levels < 1) throw ConfigError("exposed_levels must be >= 1");
  if (!(training.straggler_deadline >= 1.0)) throw ConfigError("straggler deadline must be >= 1");
  if (policy == PolicyKind::ClusterFixed) {
    if (cluster[0] + cluster[1] + cluster[2] != params.participants)
      throw ConfigError("cluster tier counts must sum to K");
    for (std::size_t t = 0; t < kNumTiers; ++t)
      if (cluster[t] > fleet.tier_counts[t])
        throw ConfigError("cluster asks for more " + std::string(to_string(static_cast<Tier>(t))) +
                          " devices than the fleet has");
  }
  if (workload.dataset.source == DatasetConfig::Source::Synthetic && workload.dataset.test_samples == 0)
    throw ConfigError("test_samples must be > 0");
}

// ---- parsing --------------------------------------------------------------

namespace {

// Wraps a mapping node and rejects keys nobody asked for.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_ + ": expected a mapping");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() || !node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto k = kv.first.as<std::string>();
      if (!seen_.count(k)) throw ConfigError("unknown key '" + where(k) + "'");
    }
  }

  YAML::Node get(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node();
    const YAML::Node& n = node_;
    return n[key];
  }
  bool has(const std::string& key) {
    auto n = get(key);
    return n && !n.IsNull();
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void read(const std::string& key, T& out) {
    auto n = get(key);
    if (!n || n.IsNull()) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("bad value for '" + where(key) + "'");
    }
  }
  void read_path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    read(key, s);
    if (!s.empty()) out = resolve(s, base);
  }
  void read_path(const std::string& key, std::optional<std::filesystem::path>& out,
                 const std::filesystem::path& base) {
    std::string s;
    read(key, s);
    if (!s.empty()) out = resolve(s, base);
  }
  Section sub(const std::string& key) { return Section(get(key), where(key)); }

 private:
  static std::filesystem::path resolve(const std::string& s, const std::filesystem::path& base) {
    std::filesystem::path p(s);
    return p.is_absolute() ? p : base / p;
  }
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto rethrow_as_config(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const LookupError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

void read_target(Section s, TargetTemplate& t) {
  std::string kind = std::string(to_string(t.kind));
  s.read("kind", kind);
  t.kind = rethrow_as_config(s.where("kind"), [&] { return parse_target_kind(kind); });
  s.read("peak_frequency_hz", t.peak_frequency_hz);
  s.read("dvfs_steps", t.dvfs_steps);
  s.read("min_frequency_fraction", t.min_frequency_fraction);
  s.read("peak_power_w", t.peak_power_w);
  s.read("cores", t.cores);
  s.read("peak_throughput_flops", t.peak_throughput);
}

void read_tier(Section s, TierTemplate& t) {
  s.read("idle_power_w", t.idle_power_w);
  s.read("comm_strong_w", t.comm_strong_w);
  s.read("comm_weak_w", t.comm_weak_w);
  auto targets = s.get("targets");
  if (!targets || targets.IsNull()) return;
  if (!targets.IsSequence()) throw ConfigError(s.where("targets") + ": expected a list");
  t.targets.clear();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    TargetTemplate tt;
    read_target(Section(targets[i], s.where("targets") + "[" + std::to_string(i) + "]"), tt);
    t.targets.push_back(tt);
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig cfg;
  {
    Section top(root, "");
    top.read("name", cfg.name);

    bool fleet_size_given = false;
    {
      auto fleet = top.sub("fleet");
      fleet.read("high", cfg.fleet.tier_counts[0]);
      fleet.read("mid", cfg.fleet.tier_counts[1]);
      fleet.read("low", cfg.fleet.tier_counts[2]);
      auto tiers = fleet.sub("tiers");
      read_tier(tiers.sub("high"), cfg.fleet.templates[0]);
      read_tier(tiers.sub("mid"), cfg.fleet.templates[1]);
      read_tier(tiers.sub("low"), cfg.fleet.templates[2]);
    }
    {
      auto w = top.sub("workload");
      std::string nn(to_string(cfg.workload.nn));
      w.read("nn", nn);
      cfg.workload.nn = parse_nn_kind(nn);
      w.read("hidden", cfg.workload.hidden);
      w.read("flops_scale", cfg.workload.flops_scale);
      w.read("bytes_scale", cfg.workload.bytes_scale);
      auto d = w.sub("dataset");
      auto& ds = cfg.workload.dataset;
      std::string source = "synthetic";
      d.read("source", source);
      if (source == "synthetic")
        ds.source = DatasetConfig::Source::Synthetic;
      else if (source == "idx")
        ds.source = DatasetConfig::Source::Idx;
      else if (source == "csv")
        ds.source = DatasetConfig::Source::Csv;
      else
        throw ConfigError("unknown dataset source '" + source + "'");
      d.read("samples", ds.mixture.samples);
      d.read("features", ds.mixture.features);
      d.read("classes", ds.mixture.classes);
      d.read("separation", ds.mixture.separation);
      d.read("scale_spread", ds.mixture.scale_spread);
      d.read("test_samples", ds.test_samples);
      d.read_path("train_images", ds.train_images, base_dir);
      d.read_path("train_labels", ds.train_labels, base_dir);
      d.read_path("test_images", ds.test_images, base_dir);
      d.read_path("test_labels", ds.test_labels, base_dir);
      d.read_path("train_csv", ds.train_csv, base_dir);
      d.read_path("test_csv", ds.test_csv, base_dir);
    }
    {
      auto p = top.sub("params");
      p.read("batch_size", cfg.params.batch_size);
      p.read("local_epochs", cfg.params.local_epochs);
      p.read("participants", cfg.params.participants);
      fleet_size_given = p.has("fleet_size");
      p.read("fleet_size", cfg.params.fleet_size);
      p.read("target_accuracy", cfg.params.target_accuracy);
      p.read("max_rounds", cfg.params.max_rounds);
      p.read("local_lr", cfg.params.local_lr);
    }
    if (!fleet_size_given)
      cfg.params.fleet_size = cfg.fleet.tier_counts[0] + cfg.fleet.tier_counts[1] + cfg.fleet.tier_counts[2];
    {
      auto v = top.sub("variance");
      v.read("interference_prob", cfg.variance.interference_prob);
      v.read("cpu_util_min", cfg.variance.cpu_util_min);
      v.read("cpu_util_max", cfg.variance.cpu_util_max);
      v.read("mem_util_min", cfg.variance.mem_util_min);
      v.read("mem_util_max", cfg.variance.mem_util_max);
      v.read("bw_mean_mbps", cfg.variance.bw_mean_mbps);
      v.read("bw_stddev_mbps", cfg.variance.bw_stddev_mbps);
      v.read("bw_floor_mbps", cfg.variance.bw_floor_mbps);
    }
    {
      auto d = top.sub("data");
      std::string mode = "iid";
      d.read("mode", mode);
      double frac = 1.0;
      d.read("non_iid_fraction", frac);
      if (mode == "iid")
        cfg.data.mode = PartitionMode::iid();
      else if (mode == "non_iid")
        cfg.data.mode = PartitionMode::non_iid(frac);
      else
        throw ConfigError("unknown data mode '" + mode + "' (iid or non_iid)");
      d.read("concentration", cfg.data.concentration);
    }
    {
      std::string policy(to_string(cfg.policy));
      top.read("policy", policy);
      cfg.policy = parse_policy(policy);
      auto cl = top.get("cluster");
      if (cl && !cl.IsNull()) {
        if (cl.IsScalar()) {
          cfg.cluster = cluster_row(cl.as<std::string>());
        } else if (cl.IsSequence() && cl.size() == kNumTiers) {
          for (std::size_t t = 0; t < kNumTiers; ++t) cfg.cluster[t] = cl[t].as<std::size_t>();
        } else {
          throw ConfigError("cluster: expected C1..C7 or [high, mid, low]");
        }
      }
    }
    {
      auto c = top.sub("controller");
      auto& cc = cfg.controller;
      c.read("gamma", cc.q.gamma);
      c.read("mu", cc.q.mu);
      c.read("epsilon", cc.epsilon);
      c.read("alpha", cc.alpha);
      c.read("beta", cc.beta);
      c.read("energy_scale", cc.energy_scale);
      std::string qmode(to_string(cc.qmode));
      c.read("qmode", qmode);
      cc.qmode = parse_qmode(qmode);
      c.read("init_scale", cc.init_scale);
      std::vector<std::string> targets;
      c.read("action_targets", targets);
      if (!targets.empty()) {
        cc.action_targets.clear();
        for (const auto& t : targets)
          cc.action_targets.push_back(
              rethrow_as_config(c.where("action_targets"), [&] { return parse_target_kind(t); }));
      }
      c.read("exposed_levels", cc.exposed_levels);
      c.read("warmup_episodes", cc.warmup_episodes);
      c.read_path("qstore_in", cc.qstore_in, base_dir);
    }
    {
      auto t = top.sub("training");
      t.read("unweighted_average", cfg.training.unweighted_average);
      t.read("straggler_deadline", cfg.training.straggler_deadline);
      std::string exec = "parallel";
      t.read("exec", exec);
      if (exec == "parallel")
        cfg.training.exec = Exec::Parallel;
      else if (exec == "serial")
        cfg.training.exec = Exec::Serial;
      else
        throw ConfigError("training.exec must be serial or parallel");
    }
    {
      auto r = top.sub("run");
      r.read("stop_at_target", cfg.run.stop_at_target);
      r.read("patience", cfg.run.patience);
    }
    {
      auto s = top.sub("seeds");
      s.read("data", cfg.seeds.data);
      s.read("variance", cfg.seeds.variance);
      s.read("rl", cfg.seeds.rl);
      s.read("train", cfg.seeds.train);
    }
    {
      auto o = top.sub("output");
      o.read_path("records_csv", cfg.output.records_csv, base_dir);
      o.read_path("summary_json", cfg.output.summary_json, base_dir);
      o.read_path("qstore", cfg.output.qstore, base_dir);
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

std::string dump_config(const ExperimentConfig& cfg) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << cfg.name;

  e << YAML::Key << "fleet" << YAML::Value << YAML::BeginMap;
  const char* tier_keys[] = {"high", "mid", "low"};
  for (std::size_t t = 0; t < kNumTiers; ++t) e << YAML::Key << tier_keys[t] << YAML::Value << cfg.fleet.tier_counts[t];
  e << YAML::Key << "tiers" << YAML::Value << YAML::BeginMap;
  for (std::size_t t = 0; t < kNumTiers; ++t) {
    const auto& tpl = cfg.fleet.templates[t];
    e << YAML::Key << tier_keys[t] << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "idle_power_w" << YAML::Value << tpl.idle_power_w;
    e << YAML::Key << "comm_strong_w" << YAML::Value << tpl.comm_strong_w;
    e << YAML::Key << "comm_weak_w" << YAML::Value << tpl.comm_weak_w;
    e << YAML::Key << "targets" << YAML::Value << YAML::BeginSeq;
    for (const auto& tt : tpl.targets) {
      e << YAML::BeginMap;
      e << YAML::Key << "kind" << YAML::Value << std::string(to_string(tt.kind));
      e << YAML::Key << "peak_frequency_hz" << YAML::Value << tt.peak_frequency_hz;
      e << YAML::Key << "dvfs_steps" << YAML::Value << tt.dvfs_steps;
      e << YAML::Key << "min_frequency_fraction" << YAML::Value << tt.min_frequency_fraction;
      e << YAML::Key << "peak_power_w" << YAML::Value << tt.peak_power_w;
      e << YAML::Key << "cores" << YAML::Value << tt.cores;
      e << YAML::Key << "peak_throughput_flops" << YAML::Value << tt.peak_throughput;
      e << YAML::EndMap;
    }
    e << YAML::EndSeq << YAML::EndMap;
  }
  e << YAML::EndMap << YAML::EndMap;

  const auto& w = cfg.workload;
  const auto& ds = w.dataset;
  e << YAML::Key << "workload" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "nn" << YAML::Value << std::string(to_string(w.nn));
  e << YAML::Key << "hidden" << YAML::Value << w.hidden;
  e << YAML::Key << "flops_scale" << YAML::Value << w.flops_scale;
  e << YAML::Key << "bytes_scale" << YAML::Value << w.bytes_scale;
  e << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  switch (ds.source) {
    case DatasetConfig::Source::Synthetic:
      e << YAML::Key << "source" << YAML::Value << "synthetic";
      e << YAML::Key << "samples" << YAML::Value << ds.mixture.samples;
      e << YAML::Key << "features" << YAML::Value << ds.mixture.features;
      e << YAML::Key << "classes" << YAML::Value << ds.mixture.classes;
      e << YAML::Key << "separation" << YAML::Value << ds.mixture.separation;
      e << YAML::Key << "scale_spread" << YAML::Value << ds.mixture.scale_spread;
      e << YAML::Key << "test_samples" << YAML::Value << ds.test_samples;
      break;
    case DatasetConfig::Source::Idx:
      e << YAML::Key << "source" << YAML::Value << "idx";
      e << YAML::Key << "train_images" << YAML::Value << ds.train_images.string();
      e << YAML::Key << "train_labels" << YAML::Value << ds.train_labels.string();
      e << YAML::Key << "test_images" << YAML::Value << ds.test_images.string();
      e << YAML::Key << "test_labels" << YAML::Value << ds.test_labels.string();
      break;
    case DatasetConfig::Source::Csv:
      e << YAML::Key << "source" << YAML::Value << "csv";
      e << YAML::Key << "train_csv" << YAML::Value << ds.train_csv.string();
      e << YAML::Key << "test_csv" << YAML::Value << ds.test_csv.string();
      break;
  }
  e << YAML::EndMap << YAML::EndMap;

  const auto& p = cfg.params;
  e << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "batch_size" << YAML::Value << p.batch_size;
  e << YAML::Key << "local_epochs" << YAML::Value << p.local_epochs;
  e << YAML::Key << "participants" << YAML::Value << p.participants;
  e << YAML::Key << "fleet_size" << YAML::Value << p.fleet_size;
  e << YAML::Key << "target_accuracy" << YAML::Value << p.target_accuracy;
  e << YAML::Key << "max_rounds" << YAML::Value << p.max_rounds;
  e << YAML::Key << "local_lr" << YAML::Value << p.local_lr;
  e << YAML::EndMap;

  const auto& v = cfg.variance;
  e << YAML::Key << "variance" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "interference_prob" << YAML::Value << v.interference_prob;
  e << YAML::Key << "cpu_util_min" << YAML::Value << v.cpu_util_min;
  e << YAML::Key << "cpu_util_max" << YAML::Value << v.cpu_util_max;
  e << YAML::Key << "mem_util_min" << YAML::Value << v.mem_util_min;
  e << YAML::Key << "mem_util_max" << YAML::Value << v.mem_util_max;
  e << YAML::Key << "bw_mean_mbps" << YAML::Value << v.bw_mean_mbps;
  e << YAML::Key << "bw_stddev_mbps" << YAML::Value << v.bw_stddev_mbps;
  e << YAML::Key << "bw_floor_mbps" << YAML::Value << v.bw_floor_mbps;
  e << YAML::EndMap;

  e << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  const bool non_iid = cfg.data.mode.kind == PartitionMode::Kind::NonIid;
  e << YAML::Key << "mode" << YAML::Value << (non_iid ? "non_iid" : "iid");
  if (non_iid) e << YAML::Key << "non_iid_fraction" << YAML::Value << cfg.data.mode.non_iid_fraction;
  e << YAML::Key << "concentration" << YAML::Value << cfg.data.concentration;
  e << YAML::EndMap;

  e << YAML::Key << "policy" << YAML::Value << std::string(to_string(cfg.policy));
  e << YAML::Key << "cluster" << YAML::Value << YAML::Flow << YAML::BeginSeq << cfg.cluster[0]
    << cfg.cluster[1] << cfg.cluster[2] << YAML::EndSeq;

  const auto& c = cfg.controller;
  e << YAML::Key << "controller" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "gamma" << YAML::Value << c.q.gamma;
  e << YAML::Key << "mu" << YAML::Value << c.q.mu;
  e << YAML::Key << "epsilon" << YAML::Value << c.epsilon;
  e << YAML::Key << "alpha" << YAML::Value << c.alpha;
  e << YAML::Key << "beta" << YAML::Value << c.beta;
  e << YAML::Key << "energy_scale" << YAML::Value << c.energy_scale;
  e << YAML::Key << "qmode" << YAML::Value << std::string(to_string(c.qmode));
  e << YAML::Key << "init_scale" << YAML::Value << c.init_scale;
  e << YAML::Key << "action_targets" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto t : c.action_targets) e << std::string(to_string(t));
  e << YAML::EndSeq;
  e << YAML::Key << "exposed_levels" << YAML::Value << c.exposed_levels;
  e << YAML::Key << "warmup_episodes" << YAML::Value << c.warmup_episodes;
  if (c.qstore_in) e << YAML::Key << "qstore_in" << YAML::Value << c.qstore_in->string();
  e << YAML::EndMap;

  e << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "unweighted_average" << YAML::Value << cfg.training.unweighted_average;
  e << YAML::Key << "straggler_deadline" << YAML::Value << cfg.training.straggler_deadline;
  e << YAML::Key << "exec" << YAML::Value << (cfg.training.exec == Exec::Parallel ? "parallel" : "serial");
  e << YAML::EndMap;

  e << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "stop_at_target" << YAML::Value << cfg.run.stop_at_target;
  e << YAML::Key << "patience" << YAML::Value << cfg.run.patience;
  e << YAML::EndMap;

  e << YAML::Key << "seeds" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "data" << YAML::Value << cfg.seeds.data;
  e << YAML::Key << "variance" << YAML::Value << cfg.seeds.variance;
  e << YAML::Key << "rl" << YAML::Value << cfg.seeds.rl;
  e << YAML::Key << "train" << YAML::Value << cfg.seeds.train;
  e << YAML::EndMap;

  const auto& o = cfg.output;
  if (o.records_csv || o.summary_json || o.qstore) {
    e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    if (o.records_csv) e << YAML::Key << "records_csv" << YAML::Value << o.records_csv->string();
    if (o.summary_json) e << YAML::Key << "summary_json" << YAML::Value << o.summary_json->string();
    if (o.qstore) e << YAML::Key << "qstore" << YAML::Value << o.qstore->string();
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace fedsim
