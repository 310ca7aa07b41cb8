#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "prequal/selection.hpp"

namespace prequal {
namespace {

using std::chrono::milliseconds;

Candidate cand(std::size_t id, int rif, int latency_ms) {
  return Candidate{replica(id), rif, milliseconds(latency_ms)};
}

const std::array<Candidate, 3> kAbc = {cand(0, 3, 50), cand(1, 10, 20),
                                       cand(2, 4, 80)};

TEST(Hcl, ColdWithLowestLatency) {
  EXPECT_EQ(hcl_index(kAbc, RifThreshold(8)), 0u);
}

TEST(Hcl, AllHotTakesLowestRif) {
  EXPECT_EQ(hcl_index(kAbc, RifThreshold(2)), 0u);
}

TEST(Hcl, TiesGoToLatencyThenId) {
  const std::array<Candidate, 3> hot = {cand(5, 4, 30), cand(2, 4, 30),
                                        cand(1, 4, 40)};
  EXPECT_EQ(hcl_index(hot, RifThreshold(0)), 1u);
  const std::array<Candidate, 3> cold = {cand(5, 2, 30), cand(2, 1, 30),
                                         cand(1, 1, 30)};
  EXPECT_EQ(hcl_index(cold, RifThreshold::infinity()), 2u);
}

TEST(Hcl, LowOccupancyFallsBackToRandom) {
  PrequalConfig cfg;
  ProbePool pool;
  Rng rng(1);
  pool.add_probe(ProbeResponse{replica(3), 0, milliseconds(1), at(milliseconds(0))},
                 cfg, 1.0, rng);
  std::array<int, 10> hits{};
  for (int i = 0; i < 10'000; ++i) {
    hits[index_of(hcl_select(pool, RifThreshold(0), cfg, 10, rng))]++;
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Hcl, PoolSelectionUsesEffectiveRif) {
  PrequalConfig cfg;
  cfg.r_remove = 0;
  ProbePool pool;
  Rng rng(1);
  pool.add_probe(ProbeResponse{replica(0), 1, milliseconds(5), at(milliseconds(0))},
                 cfg, 64, rng);
  pool.add_probe(ProbeResponse{replica(1), 2, milliseconds(9), at(milliseconds(0))},
                 cfg, 64, rng);
  EXPECT_EQ(hcl_select(pool, RifThreshold(0), cfg, 2, rng), replica(0));
  pool.on_query_sent(replica(0), cfg);
  pool.on_query_sent(replica(0), cfg);
  EXPECT_EQ(hcl_select(pool, RifThreshold(0), cfg, 2, rng), replica(1));
}

TEST(Sync, PicksColdFaster) {
  const std::array<ProbeResponse, 2> r = {
      ProbeResponse{replica(0), 1, milliseconds(30), {}},
      ProbeResponse{replica(1), 2, milliseconds(10), {}}};
  EXPECT_EQ(sync_select(3, 2, r, RifThreshold(5)), replica(1));
}

TEST(Sync, SingleResponse) {
  const std::array<ProbeResponse, 1> r = {
      ProbeResponse{replica(4), 9, milliseconds(30), {}}};
  EXPECT_EQ(sync_select(2, 1, r, RifThreshold(5)), replica(4));
}

TEST(Sync, AllHotTakesMinRif) {
  const std::array<ProbeResponse, 3> r = {
      ProbeResponse{replica(0), 3, milliseconds(1), {}},
      ProbeResponse{replica(1), 2, milliseconds(50), {}},
      ProbeResponse{replica(2), 4, milliseconds(2), {}}};
  EXPECT_EQ(sync_select(3, 2, r, RifThreshold(0)), replica(1));
}

TEST(Sync, TooFewResponsesFallsBack) {
  const std::array<ProbeResponse, 1> r = {
      ProbeResponse{replica(0), 3, milliseconds(1), {}}};
  EXPECT_FALSE(sync_select(3, 2, r, RifThreshold(0)).has_value());
}

TEST(Linear, Examples) {
  EXPECT_DOUBLE_EQ(linear_score(milliseconds(100), 2, 0.5, milliseconds(75)),
                   125'000.0);
  EXPECT_DOUBLE_EQ(linear_score(milliseconds(40), 7, 0.0, milliseconds(75)),
                   40'000.0);
  EXPECT_DOUBLE_EQ(linear_score(milliseconds(40), 3, 1.0, milliseconds(75)),
                   225'000.0);
}

TEST(C3, Examples) {
  EXPECT_DOUBLE_EQ(c3_score(0, 10, 100'000, 40'000, 0), 100'000.0);
  EXPECT_DOUBLE_EQ(c3_score(2, 10, 200'000, 50'000, 4),
                   150'000.0 + 15625.0 * 50'000.0);
  EXPECT_DOUBLE_EQ(c3_score(0, 10, 7'000, 7'000, 0), 7'000.0);
}

TEST(Ewma, SeedsWithFirstObservation) {
  Ewma e(0.1);
  EXPECT_FALSE(e.seeded());
  e.observe(10);
  EXPECT_DOUBLE_EQ(e.value(), 10);
  e.observe(20);
  EXPECT_DOUBLE_EQ(e.value(), 11);
}

std::vector<ReplicaId> ids(std::size_t n) {
  std::vector<ReplicaId> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(replica(i));
  return v;
}

TEST(Baseline, RoundRobinSuccessor) {
  ClientPolicyState s(10, 1);
  s.last_chosen = replica(7);
  Rng rng(1);
  const auto all = ids(10);
  EXPECT_EQ(baseline_select(Policy::kRoundRobin, s, all, rng), replica(8));
  s.last_chosen = replica(9);
  EXPECT_EQ(baseline_select(Policy::kRoundRobin, s, all, rng), replica(0));
}

TEST(Baseline, LeastLoadedCyclicTieBreak) {
  ClientPolicyState s(5, 1);
  s.client_rif = {0, 1, 0, 1, 0};
  s.last_chosen = replica(2);
  Rng rng(1);
  const auto all = ids(5);
  EXPECT_EQ(baseline_select(Policy::kLeastLoaded, s, all, rng), replica(4));
  EXPECT_EQ(baseline_select(Policy::kLeastLoaded, s, all, rng), replica(0));
}

TEST(Baseline, LlPo2cPicksLessLoaded) {
  ClientPolicyState s(2, 1);
  s.client_rif = {5, 2};
  Rng rng(1);
  const auto all = ids(2);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(baseline_select(Policy::kLLPo2C, s, all, rng), replica(1));
  }
}

TEST(Baseline, YarpUsesPolledRif) {
  ClientPolicyState s(2, 1);
  s.client_rif = {0, 9};
  s.polled_rif = {7, 1};
  Rng rng(1);
  const auto all = ids(2);
  EXPECT_EQ(baseline_select(Policy::kYarpPo2C, s, all, rng), replica(1));
}

TEST(Baseline, WrrProportional) {
  ClientPolicyState s(3, 1);
  s.wrr = std::make_shared<WrrWeights>(std::vector<double>{1, 2, 1});
  Rng rng(11);
  const auto all = ids(3);
  std::array<int, 3> hits{};
  const int n = 100'000;
  for (int i = 0; i < n; ++i) hits[index_of(baseline_select(Policy::kWrr, s, all, rng))]++;
  const std::array<double, 3> p = {0.25, 0.5, 0.25};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(hits[i], n * p[i], 3 * std::sqrt(n * p[i] * (1 - p[i])));
  }
}

TEST(Wrr, WeightsFromLoad) {
  const std::vector<double> qps{10, 10, 0};
  const std::vector<double> util{0.5, 1.0, 0.0};
  const bool data[] = {true, true, false};
  const auto w = WrrWeights::from_load(qps, util, data, 0.01, 0.01);
  ASSERT_EQ(w.weights().size(), 3u);
  EXPECT_DOUBLE_EQ(w.weights()[0], 20);
  EXPECT_DOUBLE_EQ(w.weights()[1], 10);
  EXPECT_DOUBLE_EQ(w.weights()[2], 15);
}

TEST(Policy, NamesRoundTrip) {
  for (Policy p : kAllPolicies) EXPECT_EQ(parse_policy(policy_name(p)), p);
  EXPECT_FALSE(parse_policy("fastest").has_value());
}

TEST(PoolSelect, LinearAndC3UseScores) {
  PrequalConfig cfg;
  PolicyParams params;
  params.linear_lambda = 1.0;
  ProbePool pool;
  Rng rng(1);
  pool.add_probe(ProbeResponse{replica(0), 4, milliseconds(1), {}}, cfg, 64, rng);
  pool.add_probe(ProbeResponse{replica(1), 1, milliseconds(9), {}}, cfg, 64, rng);
  ClientPolicyState s(2, 100);
  EXPECT_EQ(pool_select(Policy::kLinear, pool, cfg, params, s, rng), replica(1));
  params.linear_lambda = 0.0;
  EXPECT_EQ(pool_select(Policy::kLinear, pool, cfg, params, s, rng), replica(0));
  s.client_rif = {0, 1};
  EXPECT_EQ(pool_select(Policy::kC3, pool, cfg, params, s, rng), replica(0));
}

}  // namespace
}  // namespace prequal
