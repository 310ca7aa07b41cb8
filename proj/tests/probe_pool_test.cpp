#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "prequal/probe_pool.hpp"

namespace prequal {
namespace {

using std::chrono::milliseconds;

ProbeResponse probe(std::size_t id, int rif, int latency_ms, int received_ms) {
  return ProbeResponse{replica(id), rif, milliseconds(latency_ms),
                       at(milliseconds(received_ms))};
}

PrequalConfig cfg_with(double r_probe, double r_remove) {
  PrequalConfig cfg;
  cfg.r_probe = r_probe;
  cfg.r_remove = r_remove;
  return cfg;
}

TEST(ReuseBudget, TabulatedCases) {
  EXPECT_NEAR(compute_reuse_budget(cfg_with(3, 1)), 2.0 / 1.52, 1e-9 * 2.0 / 1.52);
  EXPECT_NEAR(compute_reuse_budget(cfg_with(0.5, 0.25)), 2.0 / 0.17,
              1e-9 * 2.0 / 0.17);
  auto wide = cfg_with(3, 1);
  wide.num_replicas = 1'000'000'000;
  wide.pool_size = 1;
  EXPECT_NEAR(compute_reuse_budget(wide), 1.0, 1e-6);
}

TEST(ReuseBudget, NonPositiveIncomeUsesCap) {
  EXPECT_EQ(compute_reuse_budget(cfg_with(1, 1)), kMaxReuseBudget);
  EXPECT_EQ(compute_reuse_budget(cfg_with(0.5, 2)), kMaxReuseBudget);
}

TEST(ProbeRate, IntegerRate) {
  ProbePool pool;
  const auto cfg = cfg_with(3, 1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(pool.probes_for_query(cfg), 3);
}

TEST(ProbeRate, HalfAlternates) {
  ProbePool pool;
  const auto cfg = cfg_with(0.5, 0);
  std::vector<int> got;
  for (int i = 0; i < 6; ++i) got.push_back(pool.probes_for_query(cfg));
  EXPECT_EQ(got, (std::vector<int>{0, 1, 0, 1, 0, 1}));
}

TEST(ProbeRate, OneAndAHalfAlternates) {
  ProbePool pool;
  const auto cfg = cfg_with(1.5, 0);
  std::vector<int> got;
  for (int i = 0; i < 6; ++i) got.push_back(pool.probes_for_query(cfg));
  EXPECT_EQ(got, (std::vector<int>{1, 2, 1, 2, 1, 2}));
}

TEST(ProbeTargets, EdgeSizes) {
  std::vector<ReplicaId> all;
  for (std::size_t i = 0; i < 10; ++i) all.push_back(replica(i));
  Rng rng(1);
  EXPECT_TRUE(pick_probe_targets(0, all, rng).empty());
  auto every = pick_probe_targets(10, all, rng);
  std::sort(every.begin(), every.end());
  EXPECT_EQ(every, all);
  EXPECT_EQ(pick_probe_targets(25, all, rng).size(), 10u);
}

TEST(ProbeTargets, PairsAreUniform) {
  std::vector<ReplicaId> four{replica(0), replica(1), replica(2), replica(3)};
  Rng rng(7);
  std::map<std::pair<ReplicaId, ReplicaId>, int> counts;
  const int draws = 100'000;
  for (int i = 0; i < draws; ++i) {
    auto p = pick_probe_targets(2, four, rng);
    ASSERT_NE(p[0], p[1]);
    counts[std::minmax(p[0], p[1])]++;
  }
  ASSERT_EQ(counts.size(), 6u);
  const double expect = draws / 6.0;
  const double sigma = std::sqrt(draws * (1.0 / 6) * (5.0 / 6));
  for (const auto& [pair, n] : counts) EXPECT_NEAR(n, expect, 3 * sigma);
}

TEST(AddProbe, RandomizedRoundingMean) {
  ProbePool pool;
  PrequalConfig cfg;
  Rng rng(3);
  const double budget = 1.3158;
  double total = 0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) {
    pool.add_probe(probe(0, 0, 1, i), cfg, budget, rng);
    total += pool.entries()[0].uses_remaining;
  }
  const double mean = total / n;
  EXPECT_GE(mean, 1.30);
  EXPECT_LE(mean, 1.33);
}

TEST(AddProbe, FullPoolEvictsOldest) {
  ProbePool pool;
  PrequalConfig cfg;
  Rng rng(1);
  for (int i = 0; i < 16; ++i) pool.add_probe(probe(i, 0, 1, 100 + i), cfg, 1.0, rng);
  pool.add_probe(probe(50, 0, 1, 200), cfg, 1.0, rng);
  EXPECT_EQ(pool.size(), 16u);
  EXPECT_EQ(pool.find(replica(0)), nullptr);
  EXPECT_NE(pool.find(replica(50)), nullptr);
}

TEST(AddProbe, DuplicateReplaces) {
  ProbePool pool;
  PrequalConfig cfg;
  Rng rng(1);
  pool.add_probe(probe(4, 2, 10, 1), cfg, 1.0, rng);
  pool.add_probe(probe(5, 2, 10, 2), cfg, 1.0, rng);
  pool.add_probe(probe(4, 7, 30, 3), cfg, 1.0, rng);
  EXPECT_EQ(pool.size(), 2u);
  EXPECT_EQ(pool.find(replica(4))->response.rif, 7);
  EXPECT_EQ(pool.find(replica(4))->effective_rif, 7);
}

TEST(Expire, StrictAgeBoundary) {
  ProbePool pool;
  PrequalConfig cfg;
  Rng rng(1);
  pool.add_probe(probe(1, 0, 1, 0), cfg, 1.0, rng);
  pool.expire_and_maintain(at(milliseconds(1000)), cfg);
  EXPECT_EQ(pool.size(), 1u);
  pool.expire_and_maintain(at(milliseconds(1100)), cfg);
  EXPECT_EQ(pool.size(), 0u);
}

TEST(Expire, MixedAges) {
  ProbePool pool;
  PrequalConfig cfg;
  Rng rng(1);
  pool.add_probe(probe(1, 0, 1, 1300), cfg, 1.0, rng);
  pool.add_probe(probe(2, 0, 1, 600), cfg, 1.0, rng);
  pool.add_probe(probe(3, 0, 1, 0), cfg, 1.0, rng);
  const auto history = std::vector<int>(pool.rif_history().begin(),
                                        pool.rif_history().end());
  pool.expire_and_maintain(at(milliseconds(1500)), cfg);
  EXPECT_EQ(pool.size(), 2u);
  EXPECT_EQ(pool.find(replica(3)), nullptr);
  EXPECT_EQ(std::vector<int>(pool.rif_history().begin(), pool.rif_history().end()),
            history);
}

TEST(Threshold, NearestRank) {
  std::vector<int> ten(10);
  std::iota(ten.begin(), ten.end(), 1);
  EXPECT_EQ(nearest_rank_threshold(ten, 0.75), RifThreshold(8));
  EXPECT_TRUE(nearest_rank_threshold(ten, 1.0).is_infinite());
  EXPECT_EQ(nearest_rank_threshold({3, 7, 5}, 0.0), RifThreshold(3));
  EXPECT_EQ(nearest_rank_threshold({}, 0.5), RifThreshold(0));
}

TEST(Threshold, HotIsInclusive) {
  EXPECT_TRUE(RifThreshold(8).is_hot(8));
  EXPECT_FALSE(RifThreshold(8).is_hot(7));
  EXPECT_FALSE(RifThreshold::infinity().is_hot(1'000'000));
}

TEST(QuerySent, BumpsRifAndSpendsBudget) {
  ProbePool pool;
  auto cfg = cfg_with(3, 0);
  Rng rng(1);
  pool.add_probe(probe(1, 2, 5, 0), cfg, 2.0, rng);
  pool.on_query_sent(replica(1), cfg);
  ASSERT_NE(pool.find(replica(1)), nullptr);
  EXPECT_EQ(pool.find(replica(1))->effective_rif, 3);
  EXPECT_EQ(pool.find(replica(1))->response.rif, 2);
  pool.on_query_sent(replica(1), cfg);
  EXPECT_EQ(pool.find(replica(1)), nullptr);
}

TEST(QuerySent, RemovalsAlternateOldestWorst) {
  ProbePool pool;
  const auto cfg = cfg_with(3, 1);
  Rng rng(1);
  for (int i = 0; i < 6; ++i) pool.add_probe(probe(i, i, 10, i), cfg, 64, rng);
  std::vector<RemovalKind> seen;
  for (int q = 0; q < 4; ++q) {
    seen.push_back(pool.next_removal());
    pool.on_query_sent(replica(99), cfg);
  }
  EXPECT_EQ(seen, (std::vector<RemovalKind>{RemovalKind::kOldest, RemovalKind::kWorst,
                                            RemovalKind::kOldest, RemovalKind::kWorst}));
  EXPECT_EQ(pool.size(), 2u);
  EXPECT_EQ(pool.rate_removals(), 4u);
}

TEST(QuerySent, QuarterRateRemovesEveryFourth) {
  ProbePool pool;
  const auto cfg = cfg_with(3, 0.25);
  Rng rng(1);
  for (int i = 0; i < 16; ++i) pool.add_probe(probe(i, 0, 10, i), cfg, 64, rng);
  std::vector<int> removal_queries;
  for (int q = 1; q <= 12; ++q) {
    const auto before = pool.rate_removals();
    pool.on_query_sent(replica(99), cfg);
    if (pool.rate_removals() > before) removal_queries.push_back(q);
  }
  EXPECT_EQ(removal_queries, (std::vector<int>{4, 8, 12}));
}

TEST(QuerySent, WorstTurnRemovesHottest) {
  ProbePool pool;
  auto cfg = cfg_with(3, 1);
  cfg.q_rif = 0.999;
  Rng rng(1);
  // Replica 10 only seeds the RIF history; the oldest turn removes it.
  pool.add_probe(probe(10, 8, 1, 0), cfg, 64, rng);
  pool.add_probe(probe(1, 3, 50, 1), cfg, 64, rng);
  pool.add_probe(probe(2, 10, 20, 2), cfg, 64, rng);
  pool.add_probe(probe(3, 9, 90, 3), cfg, 64, rng);
  pool.on_query_sent(replica(99), cfg);
  ASSERT_EQ(pool.find(replica(10)), nullptr);
  auto hist = std::vector<int>(pool.rif_history().begin(), pool.rif_history().end());
  ASSERT_EQ(hist, (std::vector<int>{8, 3, 10, 9}));
  cfg.q_rif = 0.5;
  ASSERT_EQ(pool.rif_threshold(cfg), RifThreshold(8));
  pool.on_query_sent(replica(99), cfg);
  EXPECT_EQ(pool.find(replica(2)), nullptr);
  EXPECT_NE(pool.find(replica(3)), nullptr);
  EXPECT_NE(pool.find(replica(1)), nullptr);
}

TEST(QuerySent, WorstTurnWithoutHotRemovesSlowest) {
  ProbePool pool;
  auto cfg = cfg_with(3, 1);
  cfg.q_rif = 1.0;
  Rng rng(1);
  pool.add_probe(probe(0, 0, 1, 0), cfg, 64, rng);
  pool.add_probe(probe(1, 5, 50, 1), cfg, 64, rng);
  pool.add_probe(probe(2, 1, 90, 2), cfg, 64, rng);
  pool.on_query_sent(replica(99), cfg);
  pool.on_query_sent(replica(99), cfg);
  EXPECT_EQ(pool.size(), 1u);
  EXPECT_NE(pool.find(replica(1)), nullptr);
}

TEST(QuerySent, EmptyPoolKeepsToggle) {
  ProbePool pool;
  const auto cfg = cfg_with(3, 1);
  pool.on_query_sent(replica(0), cfg);
  EXPECT_EQ(pool.next_removal(), RemovalKind::kOldest);
  EXPECT_EQ(pool.removal_turns(), 1u);
  EXPECT_EQ(pool.rate_removals(), 0u);
}

TEST(Config, ValidateNamesField) {
  PrequalConfig cfg;
  cfg.q_rif = 1.5;
  try {
    cfg.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("q_rif"), std::string::npos);
  }
  cfg = PrequalConfig{};
  cfg.r_probe = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = PrequalConfig{};
  cfg.pool_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace prequal
