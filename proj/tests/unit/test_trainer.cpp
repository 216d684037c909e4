#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/trainer.hpp"

using namespace fedsim;

namespace {

Dataset small_mixture(std::size_t n = 120, std::size_t f = 5, std::size_t c = 3) {
  MixtureSpec m;
  m.samples = n;
  m.features = f;
  m.classes = c;
  m.separation = 2.0;
  return make_gaussian_mixture(m, 11, 12);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12}); }

}  // namespace

TEST_CASE("gradient matches finite differences") {
  const auto data = small_mixture();
  const auto batch = iota(data.size());
  for (BodyKind body : {BodyKind::Logistic, BodyKind::Mlp}) {
    const TrainableSpec spec{body, 5, 3, body == BodyKind::Mlp ? 4u : 0u};
    auto model = init_model(spec, 3);
    Rng rng(5);
    for (auto& p : model.params) p += rng.normal(0.0, 0.3);
    std::vector<double> g(model.params.size());
    loss_and_gradient(spec, model.params, data, batch, g);
    std::vector<double> scratch(g.size());
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      auto plus = model.params, minus = model.params;
      const double h = 1e-5;
      plus[i] += h;
      minus[i] -= h;
      const double fd = (loss_and_gradient(spec, plus, data, batch, scratch) -
                         loss_and_gradient(spec, minus, data, batch, scratch)) /
                        (2 * h);
      CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(std::abs(g[i]), 1e-3));
    }
  }
}

TEST_CASE("local_train basics") {
  const auto data = small_mixture();
  const TrainableSpec spec{BodyKind::Logistic, 5, 3, 0};
  const auto global = init_model(spec, 1);
  const auto shard = iota(40);

  const auto still = local_train(spec, global, data, shard, {8, 2, 0.0}, 1, 0);
  for (double d : still.delta) CHECK(d == 0.0);
  CHECK(still.sample_count == 40);

  const auto full = local_train(spec, global, data, shard, {40, 1, 0.1}, 1, 0);
  std::vector<double> g(global.params.size());
  loss_and_gradient(spec, global.params, data, shard, g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(rel(full.delta[i], -0.1 * g[i]) < 1e-9);

  const auto a = local_train(spec, global, data, shard, {8, 3, 0.1}, 9, 0);
  const auto b = local_train(spec, global, data, shard, {8, 3, 0.1}, 9, 1);
  CHECK(a.delta == b.delta);

  CHECK_THROWS_AS(local_train(spec, global, data, std::vector<std::size_t>{}, {8, 1, 0.1}, 1, 0),
                  ContractViolation);
  CHECK_THROWS_AS(local_train(spec, global, data, shard, {8, 1, 1e308}, 1, 7), DivergenceError);
}

TEST_CASE("aggregate examples") {
  ModelState g{{1.0, -2.0, 0.5}, 4};
  const LocalUpdate u{0, {0.5, 0.25, -1.0}, 10};
  const std::vector<LocalUpdate> one{u};
  const auto a = aggregate(g, one);
  CHECK(a.params == std::vector<double>{1.5, -1.75, -0.5});
  CHECK(a.version == 5);

  const std::vector<LocalUpdate> sym{{0, {1.0, 2.0, 3.0}, 50}, {1, {-1.0, -2.0, -3.0}, 50}};
  CHECK(aggregate(g, sym).params == g.params);

  const std::vector<LocalUpdate> w{{0, {4.0, 8.0, -4.0}, 100}, {1, {0.0, 0.0, 0.0}, 300}};
  const auto b = aggregate(g, w);
  CHECK(b.params[0] == doctest::Approx(2.0));
  CHECK(b.params[1] == doctest::Approx(0.0));
  CHECK(b.params[2] == doctest::Approx(-0.5));

  const auto uw = aggregate(g, w, true);
  CHECK(uw.params[0] == doctest::Approx(3.0));

  const std::vector<LocalUpdate> bad{{0, {1.0}, 1}};
  CHECK_THROWS_AS(aggregate(g, bad), ContractViolation);
  CHECK_THROWS_AS(aggregate(g, std::vector<LocalUpdate>{}), ContractViolation);
}

TEST_CASE("evaluate") {
  MixtureSpec m;
  m.samples = 1000;
  m.features = 4;
  m.classes = 10;
  const auto data = make_gaussian_mixture(m, 1, 2);
  const TrainableSpec spec{BodyKind::Logistic, 4, 10, 0};
  CHECK(evaluate(spec, init_model(spec, 0), data) == doctest::Approx(10.0));

  Dataset skew;
  skew.num_features = 1;
  skew.num_classes = 2;
  skew.features = {0, 0, 0, 0, 0};
  skew.labels = {0, 0, 1, 1, 1};
  const TrainableSpec two{BodyKind::Logistic, 1, 2, 0};
  CHECK(evaluate(two, init_model(two, 0), skew) == doctest::Approx(40.0));

  Dataset sep;
  sep.num_features = 1;
  sep.num_classes = 2;
  for (int i = 0; i < 50; ++i) {
    sep.features.push_back(i % 2 ? 3.0 : -3.0);
    sep.labels.push_back(i % 2);
  }
  auto model = init_model(two, 0);
  const auto all = iota(sep.size());
  for (int it = 0; it < 50; ++it) {
    const auto up = local_train(two, model, sep, all, {50, 1, 0.5}, 1, 0);
    model = aggregate(model, std::vector<LocalUpdate>{up});
  }
  CHECK(evaluate(two, model, sep) == 100.0);
  CHECK(evaluate(two, model, sep, Exec::Parallel) == 100.0);
}

TEST_CASE("timing and stragglers") {
  const auto fleet = build_fleet(default_fleet_spec(1, 1, 0));
  const auto nn = describe_nn(NnKind::ToyLogistic, 64, 10);
  CHECK(nn.update_bytes * 8.0 / (40.0 * 1e6) == doctest::Approx(5.2e-4));

  ShardSet shards;
  shards.num_classes = 10;
  shards.indices = {std::vector<std::size_t>(100), std::vector<std::size_t>(100)};
  GlobalParams gp;
  const std::vector<DeviceConditions> cond(2, DeviceConditions{{}, NetworkState::from_bandwidth(40.0)});
  const std::vector<std::size_t> p{0};
  const std::vector<ExecTargetChoice> t{top_cpu(fleet[0])};
  const auto rt = simulate_timing(p, t, cond, nn, gp, shards, fleet);
  REQUIRE(rt.participants.size() == 1);
  CHECK(rt.participants[0].t_comm == doctest::Approx(5.2e-4));
  CHECK(rt.t_round == doctest::Approx(rt.participants[0].t_comp + rt.participants[0].t_comm));
  CHECK(rt.participants[0].t_comp ==
        doctest::Approx(nn.flops_per_sample * 100 * gp.local_epochs / fleet[0].target(TargetKind::Cpu).base_throughput));

  const std::vector<ParticipantTiming> two{{0, 2.0, 1.0}, {1, 6.0, 1.0}};
  CHECK(round_time(two) == 7.0);
  CHECK_THROWS_AS(simulate_timing(p, std::vector<ExecTargetChoice>{}, cond, nn, gp, shards, fleet),
                  ContractViolation);

  const std::vector<ParticipantTiming> lag{{0, 1, 0}, {1, 1.2, 0}, {2, 1.1, 0}, {3, 9, 0}};
  CHECK(straggler_mask(lag, 3.0) == std::vector<bool>{true, true, true, false});
  CHECK(straggler_mask(lag, 10.0) == std::vector<bool>(4, true));
}

TEST_CASE("train_participants is the same serial and parallel") {
  const auto data = small_mixture(200);
  const TrainableSpec spec{BodyKind::Mlp, 5, 3, 6};
  const auto global = init_model(spec, 2);
  const auto shards = partition_dataset(data, 4, PartitionMode::iid(), 0.1, 1);
  const std::vector<std::size_t> devs{0, 2, 3};
  const auto s = train_participants(spec, global, data, shards, devs, {10, 2, 0.1}, 5, 3);
  const auto p = train_participants(spec, global, data, shards, devs, {10, 2, 0.1}, 5, 3, Exec::Parallel);
  REQUIRE(s.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s[i].device == devs[i]);
    CHECK(s[i].delta == p[i].delta);
  }
}

TEST_CASE("checkpoint round trip") {
  ModelState m{{0.5, -1.25, 3.0, 1e-3}, 7};
  const auto path = std::filesystem::temp_directory_path() / "fedsim_unit_ckpt.bin";
  save_checkpoint(m, path);
  CHECK(std::filesystem::file_size(path) == 16 + 4 * 4);
  const auto back = load_checkpoint(path);
  CHECK(back.version == 7);
  REQUIRE(back.params.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(back.params[i] == doctest::Approx(m.params[i]).epsilon(1e-7));
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}
