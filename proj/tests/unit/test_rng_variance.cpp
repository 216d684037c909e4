#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/variance.hpp"

using namespace fedsim;

TEST_CASE("rng streams are reproducible and seed-sensitive") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng(1).next_u64() != Rng(2).next_u64());
  CHECK(derive_seed({1, 2}) != derive_seed({2, 1}));
  CHECK(derive_seed({1, 2}) == derive_seed({1, 2}));
}

TEST_CASE("rng distributions have the right moments") {
  Rng r(7);
  const int n = 200000;
  double s = 0, s2 = 0, u = 0, g = 0;
  std::size_t below = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
    u += r.uniform();
    g += r.gamma(2.5);
    below += r.below(10) == 3;
  }
  CHECK(s / n == doctest::Approx(0.0).epsilon(0.01).scale(1.0));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(u / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(g / n == doctest::Approx(2.5).epsilon(0.02));
  CHECK(static_cast<double>(below) / n == doctest::Approx(0.1).epsilon(0.05));

  const auto d = r.dirichlet(10, 0.1);
  CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(1.0));
  const auto pick = r.sample_without_replacement(20, 5);
  CHECK(std::set<std::size_t>(pick.begin(), pick.end()).size() == 5);
  for (auto p : pick) CHECK(p < 20);
}

TEST_CASE("degenerate variance gives quiet devices at the mean bandwidth") {
  auto spec = VarianceSpec::none(80.0);
  const auto c = sample_round_conditions(spec, 50, 3, 11);
  for (const auto& d : c) {
    CHECK(d.interference == InterferenceState{});
    CHECK(d.network.bandwidth_mbps == 80.0);
    CHECK(d.network.signal_band == SignalBand::Strong);
  }
  spec.bw_mean_mbps = 30.0;
  for (const auto& d : sample_round_conditions(spec, 50, 3, 11))
    CHECK(d.network.signal_band == SignalBand::Weak);
  CHECK(NetworkState::from_bandwidth(40.0).signal_band == SignalBand::Weak);
  CHECK(NetworkState::from_bandwidth(40.01).signal_band == SignalBand::Strong);
}

TEST_CASE("co-runner frequency matches interference_prob") {
  VarianceSpec spec;
  spec.interference_prob = 0.3;
  std::size_t hits = 0;
  const std::size_t n = 10000;
  for (std::size_t r = 0; r < n / 100; ++r)
    for (const auto& d : sample_round_conditions(spec, 100, r, 5)) {
      if (d.interference.cpu_util > 0.0) {
        ++hits;
        CHECK(d.interference.cpu_util >= spec.cpu_util_min);
        CHECK(d.interference.cpu_util <= spec.cpu_util_max);
        CHECK(d.interference.mem_util >= spec.mem_util_min);
        CHECK(d.interference.mem_util <= spec.mem_util_max);
      }
      CHECK(d.network.bandwidth_mbps >= spec.bw_floor_mbps);
    }
  const double freq = static_cast<double>(hits) / n;
  CHECK(freq >= 0.28);
  CHECK(freq <= 0.32);
}

TEST_CASE("conditions depend only on (seed, round, device)") {
  VarianceSpec spec;
  const auto all = sample_round_conditions(spec, 30, 9, 77);
  const auto par = sample_round_conditions(spec, 30, 9, 77, Exec::Parallel);
  CHECK(all == par);
  for (std::size_t i = 0; i < all.size(); ++i)
    CHECK(all[i] == sample_device_conditions(spec, i, 9, 77));
  CHECK(sample_round_conditions(spec, 30, 10, 77) != all);
}

TEST_CASE("variance spec validation") {
  VarianceSpec s;
  s.interference_prob = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = VarianceSpec{};
  s.cpu_util_min = 0.9;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_NOTHROW(VarianceSpec::weak_network().validate());
  std::size_t weak = 0;
  for (const auto& d : sample_round_conditions(VarianceSpec::weak_network(), 200, 0, 1))
    weak += d.network.signal_band == SignalBand::Weak;
  CHECK(weak > 100);
}
