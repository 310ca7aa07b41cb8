#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "prequal/random.hpp"
#include "prequal/signals.hpp"
#include "prequal/types.hpp"

namespace prequal {

// Tunables shared by every probing client.
struct PrequalConfig {
  double r_probe = 3.0;   // probes issued per query, may be fractional
  double r_remove = 1.0;  // rate-driven removals per query
  double delta = 1.0;     // net pool drift rate in the reuse budget
  int pool_size = 16;     // m
  int num_replicas = 100; // n
  double q_rif = 0.8408964152537145;  // 2^-0.25
  Duration age_limit = std::chrono::seconds(1);
  int min_occupancy = 2;
  std::optional<Duration> idle_probe_interval;
  int rif_window = 128;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Used when probe income cannot outpace removals (non-positive denominator).
inline constexpr double kMaxReuseBudget = 64.0;

double compute_reuse_budget(const PrequalConfig& cfg);

// RIF threshold separating hot from cold entries; may be +infinity.
class RifThreshold {
 public:
  constexpr explicit RifThreshold(int value) : value_(value) {}
  static constexpr RifThreshold infinity() {
    return RifThreshold(std::numeric_limits<int>::max(), true);
  }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr int value() const { return value_; }
  // Hot is RIF >= threshold, so ties for the window maximum count as hot.
  constexpr bool is_hot(int rif) const { return !infinite_ && rif >= value_; }

  friend constexpr bool operator==(const RifThreshold&,
                                   const RifThreshold&) = default;

 private:
  constexpr RifThreshold(int value, bool infinite)
      : value_(value), infinite_(infinite) {}
  int value_;
  bool infinite_ = false;
};

struct PoolEntry {
  ProbeResponse response;
  int effective_rif = 0;
  int uses_remaining = 0;
};

enum class RemovalKind { kOldest, kWorst };

// Uniform k-subset of `available` in random order; k is clamped to the size.
std::vector<ReplicaId> pick_probe_targets(int k,
                                          std::span<const ReplicaId> available,
                                          Rng& rng);

// Nearest-rank quantile over integer RIF samples. q = 1 gives +infinity,
// an empty sample gives 0.
RifThreshold nearest_rank_threshold(std::vector<int> samples, double q);

// A client's pool of probe responses. One pool per client; callers serialize
// access.
class ProbePool {
 public:
  ProbePool() = default;

  int probes_for_query(const PrequalConfig& cfg);

  void add_probe(const ProbeResponse& response, const PrequalConfig& cfg,
                 double budget, Rng& rng);

  void expire_and_maintain(Timestamp now, const PrequalConfig& cfg);

  RifThreshold rif_threshold(const PrequalConfig& cfg) const;

  // Bookkeeping after a query was dispatched to `chosen`: local RIF bump,
  // reuse accounting and the rate-driven worst/oldest removals.
  void on_query_sent(ReplicaId chosen, const PrequalConfig& cfg);

  std::span<const PoolEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const PoolEntry* find(ReplicaId replica) const;

  RemovalKind next_removal() const { return next_removal_; }
  std::span<const int> rif_history() const { return rif_history_; }

  std::uint64_t removal_turns() const { return removal_turns_; }
  std::uint64_t rate_removals() const { return rate_removals_; }

  void clear();

 private:
  void remove_at(std::size_t i);
  std::optional<std::size_t> oldest_index() const;
  std::optional<std::size_t> worst_index(RifThreshold theta) const;
  void record_rif(int rif, const PrequalConfig& cfg);

  std::vector<PoolEntry> entries_;
  RemovalKind next_removal_ = RemovalKind::kOldest;
  double probe_accumulator_ = 0.0;
  double removal_accumulator_ = 0.0;
  // Circular window of recent probe RIFs (pre-increment values).
  std::vector<int> rif_history_;
  std::size_t rif_history_next_ = 0;
  std::uint64_t removal_turns_ = 0;
  std::uint64_t rate_removals_ = 0;
};

}  // namespace prequal
