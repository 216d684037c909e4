#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/simulator.hpp"

using namespace fedsim;

namespace {

ExperimentConfig tiny(PolicyKind policy = PolicyKind::AutoFl) {
  auto cfg = parse_config(R"(
name: tiny
fleet: {high: 1, mid: 2, low: 3}
workload: {nn: ToyLogistic, flops_scale: 1000, bytes_scale: 100, dataset: {samples: 600, features: 8, classes: 3, separation: 1.0, scale_spread: 3, test_samples: 300}}
params: {batch_size: 8, local_epochs: 2, participants: 3, target_accuracy: 99.9, max_rounds: 12, local_lr: 0.01}
data: {mode: non_iid, non_iid_fraction: 0.5}
controller: {warmup_episodes: 1}
)");
  cfg.policy = policy;
  return cfg;
}

std::string csv(const std::vector<RoundRecord>& r) {
  std::ostringstream s;
  write_records_csv(r, s);
  return s.str();
}

std::vector<RoundRecord> accuracies(std::initializer_list<double> acc) {
  std::vector<RoundRecord> out;
  for (double a : acc) {
    RoundRecord r;
    r.round = out.size();
    r.accuracy = a;
    r.t_round = 1.0;
    r.energy_global = 2.0;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("detect_convergence examples") {
  CHECK(detect_convergence(accuracies({10, 95, 95, 95, 95, 95}), 90, 5) == 1u);
  CHECK_FALSE(detect_convergence(accuracies({10, 20, 30}), 90, 5));
  CHECK_FALSE(detect_convergence(accuracies({91, 89, 91, 89, 91, 89, 91, 89, 91, 89}), 90, 5));
  CHECK_FALSE(detect_convergence(accuracies({10, 95, 95, 95}), 90, 5));
  CHECK(detect_convergence(accuracies({10, 95}), 90, 1) == 1u);
}

TEST_CASE("summaries and PPW ratios") {
  const auto a = accuracies({50, 95, 95, 95, 95, 95});
  const auto s = summarize(a, 90, 5);
  CHECK(s.convergence_round == 1u);
  CHECK(s.time_to_convergence_s == 2.0);
  CHECK(s.mean_power_w == 2.0);
  REQUIRE(s.ppw);
  CHECK(*s.ppw == doctest::Approx(0.25));
  CHECK(summarize(a, a, 90, 5).ppw_ratio == 1.0);

  auto half = a;
  for (auto& r : half) r.energy_global /= 2;
  CHECK(*summarize(half, a, 90, 5).ppw_ratio == doctest::Approx(2.0));

  const auto never = accuracies({10, 20, 30});
  const auto n = summarize(never, a, 90, 5);
  CHECK_FALSE(n.ppw);
  CHECK_FALSE(n.ppw_ratio);
  CHECK(summary_json(n).find("\"ppw\": null") != std::string::npos);
  CHECK_THROWS_AS(summarize(std::vector<RoundRecord>{}, 90, 5), ContractViolation);
}

TEST_CASE("reward stabilization") {
  const std::vector<double> flat(60, -5.0);
  CHECK(reward_stabilization_round(flat, 20, 0.1) == 39u);
  std::vector<double> ramp;
  for (int i = 0; i < 100; ++i) ramp.push_back(i < 50 ? -100.0 + 2 * i : 10.0);
  const auto r = reward_stabilization_round(ramp, 20, 0.1);
  REQUIRE(r);
  CHECK(*r > 50);
  std::vector<double> noisy;
  for (int i = 0; i < 300; ++i) noisy.push_back(100.0 * std::sin(2 * 3.14159265358979 * i / 80.0));
  CHECK_FALSE(reward_stabilization_round(noisy, 20, 0.1));
  CHECK_FALSE(reward_stabilization_round(std::vector<double>(10, 1.0), 20, 0.1));
}

TEST_CASE("max_rounds = 0 runs nothing") {
  auto cfg = tiny();
  cfg.params.max_rounds = 0;
  const auto world = build_world(cfg);
  const auto res = run_experiment(cfg, world);
  CHECK(res.records.empty());
  CHECK(res.model.params == std::vector<double>(world.nn.trainable.param_count(), 0.0));
  CHECK(res.model.version == 0);
}

TEST_CASE("runs are deterministic and exec-independent") {
  for (auto policy : {PolicyKind::AutoFl, PolicyKind::Random, PolicyKind::Power, PolicyKind::Performance}) {
    auto cfg = tiny(policy);
    cfg.training.exec = Exec::Serial;
    const auto a = run_experiment(cfg);
    const auto b = run_experiment(cfg);
    cfg.training.exec = Exec::Parallel;
    const auto c = run_experiment(cfg);
    REQUIRE(a.records.size() == 12);
    CHECK(csv(a.records) == csv(b.records));
    CHECK(csv(a.records) == csv(c.records));
    CHECK(a.model.params == c.model.params);
  }
}

TEST_CASE("round records are consistent") {
  auto cfg = tiny();
  const auto res = run_experiment(cfg);
  REQUIRE(res.warmup.size() == 1);
  CHECK(res.all_records().size() == res.warmup[0].size() + res.records.size());
  REQUIRE(res.qstore);
  CHECK(res.qstore->written() > 0);
  for (const auto& r : res.records) {
    CHECK(r.participants.size() == cfg.params.participants);
    CHECK(r.actions.size() == r.participants.size());
    CHECK(std::is_sorted(r.participants.begin(), r.participants.end()));
    REQUIRE(r.energy_local.size() == 6);
    CHECK(r.energy_global == doctest::Approx(std::accumulate(r.energy_local.begin(), r.energy_local.end(), 0.0)));
    CHECK(r.t_round > 0.0);
    for (double e : r.energy_local) CHECK(e > 0.0);
    CHECK(r.aggregated == r.participants.size());
  }
}

TEST_CASE("baselines drop stragglers from the average") {
  auto cfg = tiny(PolicyKind::Random);
  cfg.training.straggler_deadline = 1.0;
  const auto res = run_experiment(cfg);
  bool dropped = false;
  for (const auto& r : res.records) {
    CHECK(r.aggregated >= 1);
    dropped = dropped || r.aggregated < r.participants.size();
  }
  CHECK(dropped);
}

TEST_CASE("oracle and cluster policies run") {
  auto cfg = tiny(PolicyKind::Oracle);
  cfg.params.max_rounds = 2;
  const auto o = run_experiment(cfg);
  CHECK(o.records.size() == 2);
  cfg = tiny(PolicyKind::ClusterFixed);
  cfg.cluster = {1, 1, 1};
  const auto c = run_experiment(cfg);
  for (const auto& r : c.records) CHECK(r.participants[0] == 0);
}

TEST_CASE("run stops once the target holds") {
  auto cfg = tiny(PolicyKind::Random);
  cfg.params.target_accuracy = 40.0;
  cfg.run.patience = 2;
  const auto res = run_experiment(cfg);
  const auto conv = detect_convergence(res.records, 40.0, 2);
  REQUIRE(conv);
  CHECK(res.records.back().round == *conv + 1);
}

TEST_CASE("records CSV and outputs") {
  auto cfg = tiny();
  const auto dir = std::filesystem::temp_directory_path() / "fedsim_sim_test";
  std::filesystem::remove_all(dir);
  cfg.output.records_csv = dir / "nested" / "r.csv";
  cfg.output.summary_json = dir / "s.json";
  cfg.output.qstore = dir / "q.txt";
  const auto res = run_experiment(cfg);
  write_outputs(cfg, res);
  const auto back = read_records_csv(*cfg.output.records_csv);
  REQUIRE(back.size() == res.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].round == res.records[i].round);
    CHECK(back[i].t_round == res.records[i].t_round);
    CHECK(back[i].energy_global == res.records[i].energy_global);
    CHECK(back[i].accuracy == res.records[i].accuracy);
    CHECK(back[i].reward == res.records[i].reward);
  }
  std::ifstream head(*cfg.output.records_csv);
  std::string first;
  std::getline(head, first);
  CHECK(first == kRecordsHeader);
  CHECK(std::filesystem::exists(*cfg.output.summary_json));
  CHECK(std::filesystem::exists(*cfg.output.qstore));

  auto again = tiny();
  again.controller.qstore_in = *cfg.output.qstore;
  again.controller.warmup_episodes = 0;
  CHECK_NOTHROW(run_experiment(again));
}
