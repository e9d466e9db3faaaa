#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "rfnltiso/var_synth.hpp"

using namespace rfnltiso;

namespace {

GeneratorConfig small_config(std::size_t N, std::size_t P, double prob, std::uint64_t seed) {
  GeneratorConfig c;
  c.N = N;
  c.P = P;
  c.T = 50;
  c.edge_probability = prob;
  c.seed = seed;
  return c;
}

std::set<std::size_t> active_set(const TrueTopology& t) {
  std::set<std::size_t> s;
  for (std::size_t i = 0; i < t.slots(); ++i)
    if (t.active[i]) s.insert(i);
  return s;
}

}  // namespace

TEST(InitTopology, ZeroProbabilityGivesEmptyGraph) {
  const auto t = init_topology(small_config(4, 2, 0.0, 1));
  EXPECT_EQ(t.active_count(), 0u);
  for (double a : t.a) EXPECT_EQ(a, 0.0);
}

TEST(InitTopology, FullGraph) {
  const auto t = init_topology(small_config(2, 1, 1.0, 1));
  EXPECT_EQ(t.active_count(), 4u);
  for (double a : t.a) {
    EXPECT_GT(a, 0.0);
    EXPECT_LT(a, 1.0);
  }
}

TEST(InitTopology, MeanActiveCountIsBinomialMean) {
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) mean += init_topology(small_config(5, 2, 0.1, seed)).active_count();
  mean /= 1000.0;
  EXPECT_NEAR(mean, 5.0, 0.5);
}

TEST(InitTopology, InactiveSlotsAreZeroAndDeterministic) {
  const auto cfg = small_config(6, 3, 0.3, 42);
  const auto t = init_topology(cfg);
  for (std::size_t i = 0; i < t.slots(); ++i)
    if (!t.active[i]) EXPECT_EQ(t.a[i], 0.0);
  EXPECT_EQ(t, init_topology(cfg));
}

TEST(InitTopology, SelfLoopsCanBeExcluded) {
  auto cfg = small_config(4, 2, 1.0, 3);
  cfg.allow_self_loops = false;
  const auto t = init_topology(cfg);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t p = 0; p < 2; ++p) EXPECT_FALSE(t.is_active(n, n, p));
  EXPECT_EQ(t.active_count(), 4u * 3u * 2u);
}

TEST(SwitchEdge, PreservesCountAndMovesOneSlot) {
  TrueTopology t(5, 2);
  for (std::size_t i : {0u, 7u, 13u, 22u, 41u}) {
    t.active[i] = 1;
    t.a[i] = 0.5;
  }
  Rng rng(9);
  const auto s = switch_edge(t, rng);
  EXPECT_EQ(s.active_count(), 5u);
  const auto before = active_set(t), after = active_set(s);
  std::vector<std::size_t> diff;
  std::set_symmetric_difference(before.begin(), before.end(), after.begin(), after.end(), std::back_inserter(diff));
  EXPECT_EQ(diff.size(), 2u);
  for (std::size_t i = 0; i < s.slots(); ++i) {
    if (!s.active[i]) EXPECT_EQ(s.a[i], 0.0);
    else EXPECT_TRUE(s.a[i] > 0.0 && s.a[i] < 1.0);
  }
}

TEST(SwitchEdge, DegenerateTopologiesRejected) {
  Rng rng(1);
  TrueTopology empty(3, 1);
  EXPECT_THROW(switch_edge(empty, rng), NoSwitchPossible);
  TrueTopology full(2, 1);
  std::fill(full.active.begin(), full.active.end(), 1);
  std::fill(full.a.begin(), full.a.end(), 0.3);
  EXPECT_THROW(switch_edge(full, rng), NoSwitchPossible);
}

TEST(SwitchEdge, CountInvariantOverManySwitches) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto t = init_topology(small_config(5, 2, 0.2, seed + 10));
    if (t.active_count() == 0) continue;
    const auto count = t.active_count();
    Rng rng(seed);
    for (int k = 0; k < 1000; ++k) {
      t = switch_edge(t, rng);
      ASSERT_EQ(t.active_count(), count);
    }
  }
}

TEST(SlowDrift, ZeroAtTimeZero) {
  TrueTopology t(2, 1);
  t.active[1] = 1;
  t.a[1] = 0.4;
  EXPECT_EQ(slow_drift(t, 0.0), t);
}

TEST(SlowDrift, PeakIncrement) {
  TrueTopology t(2, 1);
  t.active[2] = 1;
  t.a[2] = 0.5;
  const auto d = slow_drift(t, std::numbers::pi / 2.0 / 0.03);
  EXPECT_NEAR(d.a[2], 0.51, 1e-12);
  for (std::size_t i = 0; i < d.slots(); ++i)
    if (!d.active[i]) EXPECT_EQ(d.a[i], 0.0);
}

TEST(SlowDrift, TraceMatchesPrefixSum) {
  TrueTopology t(3, 2);
  t.active[4] = 1;
  t.a[4] = 0.25;
  double prefix = 0.0;
  for (int k = 0; k < 4000; ++k) {
    t = slow_drift(t, static_cast<double>(k));
    prefix += std::sin(0.03 * k);
    ASSERT_NEAR(t.a[4], 0.25 + 0.01 * prefix, 1e-12);
  }
}

TEST(Step, ZeroTopologyNoNoise) {
  auto cfg = small_config(3, 2, 0.0, 1);
  const auto topo = init_topology(cfg);
  const auto bank = make_bank(cfg);
  LagWindow w(3, 2);
  w.push(std::vector<double>{0.3, -1.0, 2.0});
  w.push(std::vector<double>{0.1, 0.2, 0.3});
  const std::vector<double> noise(3, 0.0);
  for (double y : step(topo, bank, w, noise)) EXPECT_EQ(y, 0.0);
}

TEST(Step, SingleEdgeByHand) {
  // Edge 1 <- 2 at lag 1, one kernel center.
  NonlinearityBank bank;
  bank.N = 2;
  bank.P = 1;
  bank.M = 1;
  bank.kernel = GaussianKernelSpec{0.01};
  // Slot (n=0, n'=1, p=0) has index 1.
  bank.centers = {0.0, 0.15, 0.0, 0.0};
  bank.weights = {0.0, 3.0, 0.0, 0.0};
  TrueTopology topo(2, 1);
  topo.active[topo.index(0, 1, 0)] = 1;
  topo.a[topo.index(0, 1, 0)] = 0.7;
  LagWindow w(2, 1);
  w.push(std::vector<double>{5.0, 0.2});
  const std::vector<double> noise{0.0, 0.0};
  const auto y = step(topo, bank, w, noise);
  const double expected = 0.7 * 3.0 * std::exp(-(0.2 - 0.15) * (0.2 - 0.15) / 0.02);
  EXPECT_NEAR(y[0], expected, 1e-15);
  EXPECT_EQ(y[1], 0.0);
}

// Independent evaluation of the model sum from a raw history array.
TEST(Step, MatchesBruteForceModel) {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t N = 1; N <= 4; ++N)
    for (std::size_t P = 1; P <= 3; ++P) {
      auto cfg = small_config(N, P, 0.7, N * 10 + P);
      cfg.centers = 4;
      const auto topo = init_topology(cfg);
      const auto bank = make_bank(cfg);
      std::vector<std::vector<double>> hist(P, std::vector<double>(N));  // hist[p-1][n] = y_n[t-p]
      LagWindow w(N, P);
      for (std::size_t k = 0; k < P; ++k) {
        std::vector<double> s(N);
        for (auto& v : s) v = normal(gen) * 0.3;
        w.push(s);
        hist[P - 1 - k] = s;
      }
      std::vector<double> noise(N);
      for (auto& u : noise) u = 0.01 * normal(gen);
      const auto y = step(topo, bank, w, noise);
      for (std::size_t n = 0; n < N; ++n) {
        double acc = noise[n];
        for (std::size_t m = 0; m < N; ++m)
          for (std::size_t p = 1; p <= P; ++p) {
            const std::size_t slot = (n * N + m) * P + (p - 1);
            double f = 0.0;
            for (std::size_t c = 0; c < cfg.centers; ++c) {
              const double d = hist[p - 1][m] - bank.centers[slot * cfg.centers + c];
              f += bank.weights[slot * cfg.centers + c] * std::exp(-d * d / (2.0 * cfg.kernel_variance));
            }
            acc += topo.a[slot] * f;
          }
        EXPECT_NEAR(y[n], acc, 1e-12) << "N=" << N << " P=" << P << " n=" << n;
      }
    }
}

TEST(Step, NonFiniteHistoryIsDivergence) {
  auto cfg = small_config(2, 1, 1.0, 1);
  LagWindow w(2, 1);
  w.push(std::vector<double>{NAN, 0.0});
  const std::vector<double> noise(2, 0.0);
  EXPECT_THROW(step(init_topology(cfg), make_bank(cfg), w, noise), DivergenceError);
}

TEST(Generate, OnlyInitialBlockWhenTEqualsP) {
  auto cfg = small_config(3, 4, 0.5, 5);
  cfg.T = 4;
  const auto d = generate(cfg);
  EXPECT_EQ(d.T, 4u);
  for (double v : d.values) EXPECT_NE(v, 0.0);
}

TEST(Generate, SwitchingPresetHasExpectedSwitches) {
  GeneratorConfig cfg;  // N=5, P=2, kernel variance 0.01, beta variance 30
  cfg.T = 3000;
  cfg.switch_interval = 1000;
  cfg.seed = 11;
  const auto d = generate(cfg);
  ASSERT_EQ(d.snapshots.size(), 1u + 2u);
  EXPECT_EQ(expected_switches(cfg), (cfg.T - cfg.P) / 1000);
  EXPECT_EQ(d.snapshots[1].t, 1000u);
  EXPECT_EQ(d.snapshots[2].t, 2000u);
  for (double v : d.values) EXPECT_TRUE(std::isfinite(v));
  for (std::size_t k = 1; k < d.snapshots.size(); ++k)
    EXPECT_EQ(d.snapshots[k].topology.active_count(), d.snapshots[0].topology.active_count());
}

TEST(Generate, BitIdenticalForSameSeed) {
  GeneratorConfig cfg;
  cfg.T = 500;
  cfg.switch_interval = 100;
  cfg.seed = 3;
  const auto a = generate(cfg), b = generate(cfg);
  EXPECT_EQ(a.values, b.values);
  ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) EXPECT_EQ(a.snapshots[k].topology, b.snapshots[k].topology);
}

TEST(Generate, ZeroTopologyWithoutNoiseIsZeroAfterWarmup) {
  auto cfg = small_config(4, 3, 0.0, 8);
  cfg.noise_std = 0.0;
  cfg.T = 200;
  const auto d = generate(cfg);
  for (std::size_t t = cfg.P; t < cfg.T; ++t)
    for (std::size_t n = 0; n < cfg.N; ++n) ASSERT_EQ(d.at(n, t), 0.0);
}

TEST(Generate, SwitchingKeepsEmptyOrFullTopology) {
  auto cfg = small_config(3, 1, 0.0, 8);
  cfg.T = 500;
  cfg.switch_interval = 100;
  const auto empty = generate(cfg);
  EXPECT_EQ(empty.snapshots.size(), 1u);
  cfg.edge_probability = 1.0;
  const auto full = generate(cfg);
  EXPECT_EQ(full.snapshots.size(), 1u);
  EXPECT_FALSE(can_switch(full.snapshots.front().topology));
}

TEST(Generate, DriftTraceFollowsRecursion) {
  GeneratorConfig cfg;
  cfg.T = 1200;
  cfg.drift = true;
  cfg.edge_probability = 0.3;
  cfg.seed = 21;
  const auto d = generate(cfg);
  const auto& first = d.snapshots.front().topology;
  const std::size_t slot = designated_edge(first);
  ASSERT_NE(slot, SIZE_MAX);
  double prefix = 0.0;
  for (std::size_t t = cfg.P; t < cfg.T; ++t) {
    ASSERT_NEAR(d.topology_at(t).a[slot], first.a[slot] + 0.01 * prefix, 1e-12);
    prefix += std::sin(0.03 * static_cast<double>(t - cfg.P));
  }
}

TEST(Generate, SingleEdgeDriftLeavesOthersFixed) {
  GeneratorConfig cfg;
  cfg.T = 300;
  cfg.drift = true;
  cfg.drift_all_edges = false;
  cfg.edge_probability = 0.4;
  cfg.seed = 4;
  const auto d = generate(cfg);
  const auto& first = d.snapshots.front().topology;
  const auto& last = d.snapshots.back().topology;
  const std::size_t slot = designated_edge(first);
  for (std::size_t i = 0; i < first.slots(); ++i)
    if (i != slot) EXPECT_EQ(first.a[i], last.a[i]);
  EXPECT_NE(first.a[slot], last.a[slot]);
}

TEST(Generate, ExplodingLinearModelAbortsLoudly) {
  GeneratorConfig cfg;
  cfg.N = 6;
  cfg.P = 2;
  cfg.T = 2000;
  cfg.edge_probability = 1.0;
  cfg.nonlinearity = Nonlinearity::linear;
  EXPECT_THROW(generate(cfg), DivergenceError);
}

TEST(GeneratorConfig, Validation) {
  GeneratorConfig c;
  c.T = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.edge_probability = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.drift = true;
  c.switch_interval = 10;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(LagWindow, ReturnsLagsInOrder) {
  LagWindow w(2, 3);
  EXPECT_FALSE(w.full());
  w.push(std::vector<double>{1, 10});
  w.push(std::vector<double>{2, 20});
  w.push(std::vector<double>{3, 30});
  ASSERT_TRUE(w.full());
  EXPECT_EQ(w.lag(0, 1), 3);
  EXPECT_EQ(w.lag(0, 3), 1);
  w.push(std::vector<double>{4, 40});
  EXPECT_EQ(w.lag(1, 1), 40);
  EXPECT_EQ(w.lag(1, 2), 30);
  EXPECT_EQ(w.lag(1, 3), 20);
}
