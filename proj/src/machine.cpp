#include <algorithm>
#include <functional>

#include "prequal/sim_engine.hpp"

namespace prequal {

double spare_capacity(const Machine& m) {
  return std::max(0.0, m.capacity - m.antagonist_demand - m.replica_allocation);
}

bool saturated(const Machine& m) {
  return m.antagonist_demand + m.replica_allocation > m.capacity;
}

double replica_service_rate(const Machine& m, double demand) {
  if (demand <= 0.0) return 0.0;
  double ceiling = m.replica_allocation + spare_capacity(m);
  if (saturated(m)) ceiling = m.replica_allocation * m.hobble_penalty;
  return std::min(demand, ceiling);
}

double antagonist_usage(const Machine& m, double replica_rate) {
  return std::max(0.0, std::min(m.antagonist_demand, m.capacity - replica_rate));
}

void AntagonistConfig::validate() const {
  if (period <= Duration::zero()) throw ConfigError("antagonist.period must be > 0");
  if (!(base_min >= 0 && base_max >= base_min)) {
    throw ConfigError("antagonist.base_min/base_max must satisfy 0 <= min <= max");
  }
  if (!(burst_probability >= 0 && burst_probability < 1)) {
    throw ConfigError("antagonist.burst_probability must be in [0, 1)");
  }
  if (burst_mean_duration < Duration::zero()) {
    throw ConfigError("antagonist.burst_mean_duration must be >= 0");
  }
  if (burst_mean_duration > Duration::zero() && burst_mean_duration < period) {
    throw ConfigError("antagonist.burst_mean_duration must be 0 or >= period");
  }
  if (!(epsilon > 0)) throw ConfigError("antagonist.epsilon must be > 0");
}

AntagonistProcess::AntagonistProcess(const AntagonistConfig& cfg,
                                     const Machine& machine, Rng& rng)
    : cfg_(cfg) {
  std::uniform_real_distribution<double> base(cfg.base_min, cfg.base_max);
  base_ = std::min(base(rng), machine.capacity - cfg.epsilon);
}

double AntagonistProcess::draw_level(const Machine& machine, Rng& rng) const {
  const double top = machine.capacity - base_ - machine.replica_allocation +
                     cfg_.burst_headroom;
  if (top <= 0.0) return 0.0;
  return std::uniform_real_distribution<double>(0.0, top)(rng);
}

double AntagonistProcess::step(const Machine& machine, Rng& rng) {
  const double p = cfg_.burst_probability;
  if (cfg_.burst_mean_duration == Duration::zero()) {
    bursting_ = uniform01(rng) < p;
    level_ = bursting_ ? draw_level(machine, rng) : 0.0;
  } else {
    // Two-state chain whose stationary burst fraction is p.
    const double exit = to_seconds(cfg_.period) /
                        to_seconds(cfg_.burst_mean_duration);
    const double enter = p * exit / (1.0 - p);
    const double u = uniform01(rng);
    if (bursting_) {
      if (u < exit) {
        bursting_ = false;
        level_ = 0.0;
      }
    } else if (u < enter) {
      bursting_ = true;
      level_ = draw_level(machine, rng);
    }
  }
  return std::min(base_ + level_, machine.capacity - cfg_.epsilon);
}

std::uint64_t ProcessorSharingQueue::add(QueryId id, double work) {
  PREQUAL_CHECK(work > 0.0, "query work must be positive");
  const std::uint64_t ticket = next_ticket_++;
  heap_.push_back(Entry{virtual_time_ + work, ticket, id, work});
  std::push_heap(heap_.begin(), heap_.end(), std::greater<>{});
  ++active_;
  return ticket;
}

void ProcessorSharingQueue::cancel(std::uint64_t ticket) {
  PREQUAL_CHECK(active_ > 0, "cancel on an empty queue");
  cancelled_.insert(ticket);
  --active_;
  drop_cancelled();
}

void ProcessorSharingQueue::serve(double core_seconds) {
  if (active_ == 0) return;
  virtual_time_ += core_seconds / active_;
}

void ProcessorSharingQueue::charge_overhead(double core_seconds) {
  if (active_ == 0) return;
  virtual_time_ -= core_seconds / active_;
}

void ProcessorSharingQueue::drop_cancelled() {
  while (!heap_.empty() && cancelled_.count(heap_.front().ticket)) {
    cancelled_.erase(heap_.front().ticket);
    std::pop_heap(heap_.begin(), heap_.end(), std::greater<>{});
    heap_.pop_back();
  }
  if (active_ == 0) {
    // Only cancelled entries remain; rebase the clock.
    heap_.clear();
    cancelled_.clear();
    virtual_time_ = 0.0;
  }
}

std::optional<double> ProcessorSharingQueue::work_to_next_finish() {
  drop_cancelled();
  if (active_ == 0) return std::nullopt;
  return std::max(0.0, heap_.front().finish - virtual_time_) * active_;
}

std::vector<ProcessorSharingQueue::Finished> ProcessorSharingQueue::pop_finished() {
  constexpr double kTolerance = 1e-12;
  std::vector<Finished> done;
  drop_cancelled();
  while (active_ > 0 && heap_.front().finish <= virtual_time_ + kTolerance) {
    const Entry e = heap_.front();
    std::pop_heap(heap_.begin(), heap_.end(), std::greater<>{});
    heap_.pop_back();
    --active_;
    done.push_back(Finished{e.id, e.work, virtual_time_ - (e.finish - e.work)});
    drop_cancelled();
  }
  return done;
}

void SimConfig::validate() const {
  if (n_clients < 1) throw ConfigError("sim.n_clients must be >= 1");
  if (n_servers < 1) throw ConfigError("sim.n_servers must be >= 1");
  if (!(capacity > 0)) throw ConfigError("sim.capacity must be > 0");
  if (!(allocation > 0 && allocation <= capacity)) {
    throw ConfigError("sim.allocation must be in (0, capacity]");
  }
  if (!(hobble_penalty > 0 && hobble_penalty <= 1)) {
    throw ConfigError("sim.hobble_penalty must be in (0, 1]");
  }
  if (threads_cap < 1) throw ConfigError("sim.threads_cap must be >= 1");
  if (!(probe_cpu_cost >= 0)) throw ConfigError("sim.probe_cpu_cost must be >= 0");
  if (wire_min < Duration::zero() || wire_max < wire_min) {
    throw ConfigError("sim.wire_min/wire_max must satisfy 0 <= min <= max");
  }
  if (probe_timeout <= Duration::zero()) {
    throw ConfigError("sim.probe_timeout must be > 0");
  }
  if (query_deadline <= Duration::zero()) {
    throw ConfigError("sim.query_deadline must be > 0");
  }
  if (metric_tick <= Duration::zero()) {
    throw ConfigError("sim.metric_tick must be > 0");
  }
  antagonist.validate();
}

}  // namespace prequal
