#include <doctest.h>

#include "fedsim/errors.hpp"
#include "fedsim/state.hpp"

using namespace fedsim;

TEST_CASE("global feature bins") {
  CHECK(bin_conv(2) == 0);
  CHECK(bin_conv(9) == 0);
  CHECK(bin_conv(10) == 1);
  CHECK(bin_conv(19) == 1);
  CHECK(bin_conv(28) == 2);
  CHECK(bin_conv(39) == 2);
  CHECK(bin_conv(40) == 3);
  CHECK(bin_fc(2) == 0);
  CHECK(bin_fc(10) == 1);
  CHECK(bin_rc(0) == 0);
  CHECK(bin_rc(5) == 1);
  CHECK(bin_rc(10) == 2);
  CHECK(bin_batch(32) == 2);
  CHECK(bin_batch(16) == 1);
  CHECK(bin_batch(4) == 0);
  CHECK(bin_epochs(10) == 2);
  CHECK(bin_epochs(5) == 1);
  CHECK(bin_participants(20) == 1);
  CHECK(bin_participants(50) == 2);
  CHECK(bin_participants(5) == 0);
}

TEST_CASE("featurize_global on a small CNN and the S1 setting") {
  const auto cnn = describe_nn(NnKind::CnnLike, 64, 10);
  GlobalParams p;
  p.batch_size = 32;
  p.local_epochs = 10;
  p.participants = 20;
  const auto g = featurize_global(cnn, p);
  CHECK(g.conv == 0);
  CHECK(g.fc == 0);
  CHECK(g.rc == 0);
  CHECK(g.b == 2);
  CHECK(g.e == 2);
  CHECK(g.k == 1);
}

TEST_CASE("local feature bins") {
  CHECK(bin_network(40.0) == 1);
  CHECK(bin_network(40.5) == 0);
  CHECK(bin_utilization(0.0) == 0);
  CHECK(bin_utilization(0.1) == 1);
  CHECK(bin_utilization(0.5) == 2);
  CHECK(bin_utilization(0.8) == 3);
  CHECK(bin_data(10, 10) == 2);
  CHECK(bin_data(5, 10) == 1);
  CHECK(bin_data(2, 10) == 0);
  const DeviceConditions c{{0.5, 0.1}, NetworkState::from_bandwidth(30.0)};
  const auto l = featurize_local(c, 10, 10);
  CHECK(l.co_cpu == 2);
  CHECK(l.co_mem == 1);
  CHECK(l.network == 1);
  CHECK(l.data == 2);
}

TEST_CASE("state indices round trip") {
  for (std::size_t i = 0; i < GlobalState::kCardinality; ++i)
    CHECK(GlobalState::from_index(i).index() == i);
  for (std::size_t i = 0; i < LocalState::kCardinality; ++i)
    CHECK(LocalState::from_index(i).index() == i);
  CHECK_THROWS_AS(GlobalState::from_index(GlobalState::kCardinality), ContractViolation);
  GlobalState bad;
  bad.conv = 7;
  CHECK_THROWS_AS(bad.index(), ContractViolation);
}

TEST_CASE("describe names every field") {
  GlobalState g;
  g.conv = 2;
  CHECK(describe(g).find("conv=Large") != std::string::npos);
  LocalState l;
  l.network = 1;
  CHECK(describe(l).find("network=Bad") != std::string::npos);
  CHECK(global_fields().size() == 6);
  CHECK(local_fields().size() == 4);
}

TEST_CASE("featurize covers every device") {
  ShardSet shards;
  shards.num_classes = 4;
  shards.histograms = {{1, 1, 1, 1}, {0, 3, 0, 0}};
  shards.indices = {{0, 1, 2, 3}, {4, 5, 6}};
  const std::vector<DeviceConditions> cond{{{}, NetworkState::from_bandwidth(80)},
                                           {{0.3, 0.3}, NetworkState::from_bandwidth(20)}};
  const auto f = featurize(describe_nn(NnKind::ToyLogistic, 4, 4), GlobalParams{}, cond, shards);
  REQUIRE(f.local.size() == 2);
  CHECK(f.local[0].data == 2);
  CHECK(f.local[1].data == 1);
  CHECK(f.local[1].network == 1);
  const std::vector<DeviceConditions> one(1);
  CHECK_THROWS_AS(featurize(describe_nn(NnKind::ToyLogistic, 4, 4), GlobalParams{}, one, shards),
                  ContractViolation);
}
