#pragma once

#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "prequal/metrics.hpp"
#include "prequal/probe_pool.hpp"
#include "prequal/random.hpp"
#include "prequal/selection.hpp"
#include "prequal/signals.hpp"
#include "prequal/types.hpp"
#include "prequal/workload.hpp"

namespace prequal {

// CPU quantities are in cores; work is in core-seconds.
struct Machine {
  double capacity = 1.0;
  double replica_allocation = 0.1;
  double antagonist_demand = 0.0;
  // Multiplier on the allocation while the machine is saturated. 1.0 is pure
  // capping at the allocation.
  double hobble_penalty = 1.0;
};

double spare_capacity(const Machine& m);
bool saturated(const Machine& m);
// CPU the replica receives for a given demand: its allocation plus whatever
// the antagonists leave unused.
double replica_service_rate(const Machine& m, double demand);
// Antagonist usage after isolation guarantees the replica its rate.
double antagonist_usage(const Machine& m, double replica_rate);

struct AntagonistConfig {
  Duration period = std::chrono::milliseconds(100);
  double base_min = 0.2;
  double base_max = 0.7;
  double burst_probability = 0.2;
  // Bursts reach up to capacity - base - allocation + headroom.
  double burst_headroom = 0.1;
  // Zero: bursts are independent every period. Otherwise a burst lasts this
  // long on average (same long-run burst probability) and keeps its level.
  Duration burst_mean_duration{0};
  double epsilon = 1e-3;

  void validate() const;
};

// Time-varying CPU demand of the other tenants on one machine.
class AntagonistProcess {
 public:
  AntagonistProcess(const AntagonistConfig& cfg, const Machine& machine,
                    Rng& rng);

  // Demand for the next period.
  double step(const Machine& machine, Rng& rng);

  double base() const { return base_; }
  bool bursting() const { return bursting_; }

 private:
  double draw_level(const Machine& machine, Rng& rng) const;

  AntagonistConfig cfg_;
  double base_ = 0.0;
  bool bursting_ = false;
  double level_ = 0.0;
};

using QueryId = std::uint32_t;

// Egalitarian processor sharing via a virtual clock: every active query has
// received the same service since it joined.
class ProcessorSharingQueue {
 public:
  struct Finished {
    QueryId id;
    double work;
    double attained;
  };

  // Returns a ticket used to cancel the query.
  std::uint64_t add(QueryId id, double work);
  void cancel(std::uint64_t ticket);

  // Distributes core-seconds equally over the active queries.
  void serve(double core_seconds);
  // CPU spent on something else (probes) while queries were active.
  void charge_overhead(double core_seconds);

  // Total core-seconds of service before the next completion.
  std::optional<double> work_to_next_finish();
  std::vector<Finished> pop_finished();

  int active() const { return active_; }

 private:
  struct Entry {
    double finish;
    std::uint64_t ticket;
    QueryId id;
    double work;
    bool operator>(const Entry& o) const {
      return finish > o.finish || (finish == o.finish && ticket > o.ticket);
    }
  };
  void drop_cancelled();

  std::vector<Entry> heap_;
  std::unordered_set<std::uint64_t> cancelled_;
  double virtual_time_ = 0.0;
  std::uint64_t next_ticket_ = 0;
  int active_ = 0;
};

struct SimConfig {
  int n_clients = 100;
  int n_servers = 100;
  double capacity = 1.0;
  double allocation = 0.1;
  double hobble_penalty = 1.0;
  int threads_cap = 4;
  double probe_cpu_cost = 10e-6;  // core-seconds per probe
  Duration wire_min = std::chrono::microseconds(200);
  Duration wire_max = std::chrono::microseconds(500);
  Duration probe_timeout = std::chrono::milliseconds(3);
  Duration query_deadline = std::chrono::seconds(5);
  Duration metric_tick = std::chrono::milliseconds(20);
  AntagonistConfig antagonist;
  ServerLoadTracker::Options tracker;

  void validate() const;
};

struct RunSpec {
  SimConfig sim;
  WorkloadConfig workload;
  PrequalConfig prequal;
  PolicyParams params;
  std::vector<Phase> phases;
  Duration warmup = std::chrono::seconds(20);
  std::uint64_t master_seed = 1;
  std::uint64_t run_index = 0;
  // Re-check per-event invariants (slow; for tests).
  bool check_invariants = false;
};

struct PhaseResult {
  Phase phase;
  Timestamp start{};
  Timestamp end{};
  // Measurement covers queries sent in [start + warmup, measured_until).
  Timestamp measured_until{};
  std::int64_t measured_seconds = 0;
  double target_qps = 0.0;
  LogHistogram latency;  // microseconds; errors count as the deadline
  IntHistogram rif;      // server-side RIF sampled every metric tick
  std::uint64_t sent = 0;
  std::uint64_t completed = 0;
  std::uint64_t errors = 0;
  std::uint64_t probes_sent = 0;
  std::uint64_t probes_dropped = 0;
  std::vector<double> cpu_1s;   // utilization of every replica-second
  std::vector<double> cpu_60s;  // utilization of every replica-minute
  std::vector<double> replica_utilization;  // mean per replica
  double theta_sum = 0.0;
  std::uint64_t theta_count = 0;
  std::uint64_t theta_infinite = 0;
};

struct RunResult {
  std::vector<PhaseResult> phases;
  std::uint64_t events = 0;
  std::uint64_t trace_hash = 0;
  // Per-query |attained - work| maximum, for the work-conservation check.
  double max_work_error = 0.0;
};

// Runs one schedule end to end. Single-threaded and deterministic for a
// given RunSpec.
RunResult simulate(const RunSpec& spec);

}  // namespace prequal
