#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "prequal/probe_pool.hpp"
#include "prequal/random.hpp"
#include "prequal/signals.hpp"
#include "prequal/types.hpp"

namespace prequal {

enum class Policy {
  kRandom,
  kRoundRobin,
  kWrr,
  kLeastLoaded,
  kLLPo2C,
  kYarpPo2C,
  kLinear,
  kC3,
  kPrequal,
};

inline constexpr Policy kAllPolicies[] = {
    Policy::kRandom,  Policy::kRoundRobin, Policy::kWrr,
    Policy::kLeastLoaded, Policy::kLLPo2C, Policy::kYarpPo2C,
    Policy::kLinear,  Policy::kC3,         Policy::kPrequal,
};

std::string_view policy_name(Policy policy);
std::optional<Policy> parse_policy(std::string_view name);
// Linear, C3 and Prequal select from an asynchronously probed pool.
bool uses_probe_pool(Policy policy);

// One selectable candidate: a replica and the load signals known for it.
struct Candidate {
  ReplicaId replica{};
  int rif = 0;
  Duration latency{};
};

// Hot-cold lexicographic choice over a non-empty candidate list. Returns the
// index of the chosen candidate.
std::size_t hcl_index(std::span<const Candidate> candidates, RifThreshold theta);

// HCL over the pool, or a uniformly random replica out of `num_replicas`
// when fewer than cfg.min_occupancy entries are pooled.
ReplicaId hcl_select(const ProbePool& pool, RifThreshold theta,
                     const PrequalConfig& cfg, std::size_t num_replicas,
                     Rng& rng);

// Probe-then-pick: `d` probes were sent and `needed` responses are required.
// nullopt tells the caller to fall back to a random replica.
std::optional<ReplicaId> sync_select(int d, int needed,
                                     std::span<const ProbeResponse> responses,
                                     RifThreshold theta);

// (1 - lambda) * latency + lambda * alpha * rif, in microseconds.
double linear_score(Duration latency, int rif, double lambda, Duration alpha);

// Exponentially weighted moving average, seeded by its first observation.
class Ewma {
 public:
  explicit Ewma(double alpha = 0.1) : alpha_(alpha) {}
  void observe(double x) {
    value_ = seeded_ ? alpha_ * x + (1.0 - alpha_) * value_ : x;
    seeded_ = true;
  }
  bool seeded() const { return seeded_; }
  double value() const { return value_; }

 private:
  double alpha_;
  double value_ = 0.0;
  bool seeded_ = false;
};

// Per-replica C3 inputs. Times in microseconds.
struct C3Estimates {
  Ewma response_time;  // R, client-local
  Ewma service_time;   // mu^-1, server-local
  Ewma queue_size;     // q-bar, server-local RIF
};

// q-hat = 1 + os * n_clients + q-bar; returns (R - mu^-1) + q-hat^3 * mu^-1.
double c3_score(int outstanding, int n_clients, double response_time_us,
                double service_time_us, double server_rif);

// Cumulative weights for proportional sampling, shared between clients.
class WrrWeights {
 public:
  WrrWeights() = default;
  explicit WrrWeights(std::vector<double> weights);

  // Weight per replica from goodput qps and CPU utilization. Replicas with no
  // data get the mean weight; every weight is kept at or above
  // `relative_floor` times the mean.
  static WrrWeights from_load(std::span<const double> qps,
                              std::span<const double> utilization,
                              std::span<const bool> has_data,
                              double min_utilization, double relative_floor);

  ReplicaId sample(Rng& rng) const;
  std::span<const double> weights() const { return weights_; }
  bool empty() const { return weights_.empty(); }

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

struct PolicyParams {
  double linear_lambda = 0.5;
  Duration linear_alpha = std::chrono::milliseconds(75);
  double c3_ewma_alpha = 0.1;
  Duration yarp_poll_period = std::chrono::milliseconds(500);
  Duration wrr_period = std::chrono::seconds(10);
  Duration wrr_window = std::chrono::seconds(30);
  double wrr_min_utilization = 0.01;
  double wrr_relative_floor = 0.01;
};

// Everything a client remembers for the non-pool rules and for C3.
class ClientPolicyState {
 public:
  ClientPolicyState(std::size_t num_replicas, int num_clients,
                    double c3_ewma_alpha = 0.1);

  std::size_t num_replicas() const { return client_rif.size(); }

  void on_sent(ReplicaId replica);
  void on_done(ReplicaId replica);

  ReplicaId last_chosen{};
  int num_clients = 1;
  std::vector<int> client_rif;
  std::vector<int> polled_rif;  // YARP: last polled server-local RIF
  std::vector<C3Estimates> c3;
  std::shared_ptr<const WrrWeights> wrr;
};

// Random, RoundRobin, WRR, LeastLoaded, LL-Po2C and YARP-Po2C.
ReplicaId baseline_select(Policy policy, ClientPolicyState& state,
                          std::span<const ReplicaId> available, Rng& rng);

// Linear, C3 and Prequal over the probe pool (with the low-occupancy random
// fallback). Linear and C3 take the minimum score; equal scores go to the
// lower latency estimate, then lower effective RIF, then lower id.
ReplicaId pool_select(Policy policy, const ProbePool& pool,
                      const PrequalConfig& cfg, const PolicyParams& params,
                      const ClientPolicyState& state, Rng& rng);

}  // namespace prequal
