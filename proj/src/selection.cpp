#include "prequal/selection.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <tuple>

namespace prequal {

namespace {

constexpr std::array<std::string_view, 9> kPolicyNames = {
    "random", "round_robin", "wrr",    "least_loaded", "ll_po2c",
    "yarp_po2c", "linear",   "c3",     "prequal",
};

std::uint32_t raw(ReplicaId id) { return static_cast<std::uint32_t>(id); }

ReplicaId uniform_replica(std::size_t n, Rng& rng) {
  return replica(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
}

// Two distinct uniform samples (one if only one replica is available).
std::pair<ReplicaId, ReplicaId> two_choices(std::span<const ReplicaId> available,
                                            Rng& rng) {
  const auto n = available.size();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t a = pick(rng);
  if (n == 1) return {available[a], available[a]};
  std::size_t b = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
  if (b >= a) ++b;
  return {available[a], available[b]};
}

// Position of the first available replica strictly after `last` in cyclic
// id order.
std::size_t cyclic_start(std::span<const ReplicaId> available, ReplicaId last) {
  const auto it = std::upper_bound(available.begin(), available.end(), last);
  return it == available.end()
             ? 0
             : static_cast<std::size_t>(it - available.begin());
}

bool sorted_ids(std::span<const ReplicaId> available) {
  return std::is_sorted(available.begin(), available.end());
}

}  // namespace

std::string_view policy_name(Policy policy) {
  return kPolicyNames[static_cast<std::size_t>(policy)];
}

std::optional<Policy> parse_policy(std::string_view name) {
  for (std::size_t i = 0; i < kPolicyNames.size(); ++i) {
    if (kPolicyNames[i] == name) return static_cast<Policy>(i);
  }
  return std::nullopt;
}

bool uses_probe_pool(Policy policy) {
  return policy == Policy::kLinear || policy == Policy::kC3 ||
         policy == Policy::kPrequal;
}

std::size_t hcl_index(std::span<const Candidate> candidates,
                      RifThreshold theta) {
  PREQUAL_CHECK(!candidates.empty(), "HCL over an empty candidate set");
  const bool any_cold =
      std::any_of(candidates.begin(), candidates.end(),
                  [&](const Candidate& c) { return !theta.is_hot(c.rif); });
  auto key = [&](const Candidate& c) {
    return any_cold ? std::make_tuple(c.latency.count(), std::int64_t{c.rif},
                                      raw(c.replica))
                    : std::make_tuple(std::int64_t{c.rif}, c.latency.count(),
                                      raw(c.replica));
  };
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (any_cold && theta.is_hot(candidates[i].rif)) continue;
    if (!best || key(candidates[i]) < key(candidates[*best])) best = i;
  }
  return *best;
}

ReplicaId hcl_select(const ProbePool& pool, RifThreshold theta,
                     const PrequalConfig& cfg, std::size_t num_replicas,
                     Rng& rng) {
  const auto floor = static_cast<std::size_t>(std::max(cfg.min_occupancy, 1));
  if (pool.size() < floor) return uniform_replica(num_replicas, rng);
  std::array<Candidate, 64> stack;
  std::vector<Candidate> heap;
  std::span<Candidate> view;
  if (pool.size() <= stack.size()) {
    view = std::span<Candidate>(stack.data(), pool.size());
  } else {
    heap.resize(pool.size());
    view = heap;
  }
  const auto entries = pool.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    view[i] = Candidate{entries[i].response.replica, entries[i].effective_rif,
                        entries[i].response.latency_estimate};
  }
  return view[hcl_index(view, theta)].replica;
}

std::optional<ReplicaId> sync_select(int d, int needed,
                                     std::span<const ProbeResponse> responses,
                                     RifThreshold theta) {
  PREQUAL_CHECK(d >= 1 && needed >= 1 && needed <= d,
                "sync mode needs 1 <= needed <= d");
  if (responses.size() < static_cast<std::size_t>(needed) || responses.empty()) {
    return std::nullopt;
  }
  std::vector<Candidate> candidates;
  candidates.reserve(responses.size());
  for (const auto& r : responses) {
    candidates.push_back(Candidate{r.replica, r.rif, r.latency_estimate});
  }
  return candidates[hcl_index(candidates, theta)].replica;
}

double linear_score(Duration latency, int rif, double lambda, Duration alpha) {
  return (1.0 - lambda) * static_cast<double>(latency.count()) +
         lambda * static_cast<double>(alpha.count()) * static_cast<double>(rif);
}

double c3_score(int outstanding, int n_clients, double response_time_us,
                double service_time_us, double server_rif) {
  const double q_hat = 1.0 + static_cast<double>(outstanding) *
                                 static_cast<double>(n_clients) +
                       server_rif;
  return (response_time_us - service_time_us) +
         q_hat * q_hat * q_hat * service_time_us;
}

WrrWeights::WrrWeights(std::vector<double> weights)
    : weights_(std::move(weights)) {
  cumulative_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
  PREQUAL_CHECK(weights_.empty() || cumulative_.back() > 0.0,
                "WRR weights must have a positive sum");
}

WrrWeights WrrWeights::from_load(std::span<const double> qps,
                                 std::span<const double> utilization,
                                 std::span<const bool> has_data,
                                 double min_utilization,
                                 double relative_floor) {
  PREQUAL_CHECK(qps.size() == utilization.size() &&
                    qps.size() == has_data.size(),
                "WRR inputs must have one value per replica");
  std::vector<double> w(qps.size(), 0.0);
  double sum = 0.0;
  std::size_t known = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!has_data[i]) continue;
    w[i] = qps[i] / std::max(utilization[i], min_utilization);
    sum += w[i];
    ++known;
  }
  const double mean = known == 0 ? 1.0 : sum / static_cast<double>(known);
  const double floor = std::max(mean, 1e-12) * relative_floor;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!has_data[i]) w[i] = mean;
    w[i] = std::max(w[i], floor);
  }
  return WrrWeights(std::move(w));
}

ReplicaId WrrWeights::sample(Rng& rng) const {
  PREQUAL_CHECK(!weights_.empty(), "sampling from empty WRR weights");
  const double x = uniform01(rng) * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
  const auto i = std::min<std::size_t>(
      static_cast<std::size_t>(it - cumulative_.begin()), weights_.size() - 1);
  return replica(i);
}

ClientPolicyState::ClientPolicyState(std::size_t num_replicas, int num_clients,
                                     double c3_ewma_alpha)
    : num_clients(num_clients),
      client_rif(num_replicas, 0),
      polled_rif(num_replicas, 0),
      c3(num_replicas, C3Estimates{Ewma(c3_ewma_alpha), Ewma(c3_ewma_alpha),
                                   Ewma(c3_ewma_alpha)}) {}

void ClientPolicyState::on_sent(ReplicaId id) {
  ++client_rif[index_of(id)];
}

void ClientPolicyState::on_done(ReplicaId id) {
  auto& rif = client_rif[index_of(id)];
  PREQUAL_CHECK(rif > 0, "client-local RIF would go negative");
  --rif;
}

ReplicaId baseline_select(Policy policy, ClientPolicyState& state,
                          std::span<const ReplicaId> available, Rng& rng) {
  PREQUAL_CHECK(!available.empty(), "no replica available");
  ReplicaId chosen{};
  switch (policy) {
    case Policy::kRandom:
      chosen = available[std::uniform_int_distribution<std::size_t>(
          0, available.size() - 1)(rng)];
      break;
    case Policy::kRoundRobin: {
      PREQUAL_CHECK(sorted_ids(available), "available replicas must be sorted");
      chosen = available[cyclic_start(available, state.last_chosen)];
      break;
    }
    case Policy::kWrr:
      if (state.wrr == nullptr || state.wrr->empty()) {
        chosen = available[std::uniform_int_distribution<std::size_t>(
            0, available.size() - 1)(rng)];
      } else {
        chosen = state.wrr->sample(rng);
      }
      break;
    case Policy::kLeastLoaded: {
      PREQUAL_CHECK(sorted_ids(available), "available replicas must be sorted");
      const std::size_t start = cyclic_start(available, state.last_chosen);
      std::size_t best = start;
      for (std::size_t step = 1; step < available.size(); ++step) {
        const std::size_t i = (start + step) % available.size();
        if (state.client_rif[index_of(available[i])] <
            state.client_rif[index_of(available[best])]) {
          best = i;
        }
      }
      chosen = available[best];
      break;
    }
    case Policy::kLLPo2C: {
      const auto [a, b] = two_choices(available, rng);
      chosen = state.client_rif[index_of(b)] < state.client_rif[index_of(a)]
                   ? b
                   : a;
      break;
    }
    case Policy::kYarpPo2C: {
      const auto [a, b] = two_choices(available, rng);
      chosen = state.polled_rif[index_of(b)] < state.polled_rif[index_of(a)]
                   ? b
                   : a;
      break;
    }
    case Policy::kLinear:
    case Policy::kC3:
    case Policy::kPrequal:
      throw InvariantViolation("pool-based policy passed to baseline_select");
  }
  state.last_chosen = chosen;
  return chosen;
}

ReplicaId pool_select(Policy policy, const ProbePool& pool,
                      const PrequalConfig& cfg, const PolicyParams& params,
                      const ClientPolicyState& state, Rng& rng) {
  const std::size_t n = state.num_replicas();
  switch (policy) {
    case Policy::kPrequal:
      return hcl_select(pool, pool.rif_threshold(cfg), cfg, n, rng);
    case Policy::kLinear:
    case Policy::kC3:
      break;
    default:
      throw InvariantViolation("baseline policy passed to pool_select");
  }
  const auto floor = static_cast<std::size_t>(std::max(cfg.min_occupancy, 1));
  if (pool.size() < floor) return uniform_replica(n, rng);

  // Score ties fall back to the HCL order (latency, then RIF, then id), so
  // Linear at lambda = 1 ranks exactly like HCL with every entry hot.
  using Key = std::tuple<double, Duration, int, ReplicaId>;
  std::optional<Key> best;
  for (const auto& e : pool.entries()) {
    const ReplicaId id = e.response.replica;
    double score = 0.0;
    if (policy == Policy::kLinear) {
      score = linear_score(e.response.latency_estimate, e.effective_rif,
                           params.linear_lambda, params.linear_alpha);
    } else {
      const auto& est = state.c3[index_of(id)];
      const double service =
          est.service_time.seeded()
              ? est.service_time.value()
              : static_cast<double>(e.response.latency_estimate.count());
      const double response =
          est.response_time.seeded() ? est.response_time.value() : service;
      const double queue = est.queue_size.seeded()
                               ? est.queue_size.value()
                               : static_cast<double>(e.response.rif);
      score = c3_score(state.client_rif[index_of(id)], state.num_clients,
                       response, service, queue);
    }
    const Key key{score, e.response.latency_estimate, e.effective_rif, id};
    if (!best || key < *best) best = key;
  }
  return std::get<ReplicaId>(*best);
}

}  // namespace prequal
