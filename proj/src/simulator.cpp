#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <numeric>
#include <queue>

#include "prequal/sim_engine.hpp"

namespace prequal {

namespace {

// Declaration order is the processing order for events at the same instant.
enum class EventKind : std::uint8_t {
  kPhaseStart,
  kAntagonistTick,
  kQueryFinish,
  kQueryArrival,
  kProbeArrival,
  kProbeResponse,
  kQueryResponse,
  kClientQuery,
  kIdleProbe,
  kYarpPoll,
  kWrrRecompute,
  kMetricTick,
};

struct Event {
  Timestamp time;
  EventKind kind;
  std::uint64_t seq;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::int64_t c = 0;
  std::int64_t d = 0;
  Timestamp sent{};

  bool operator>(const Event& o) const {
    if (time != o.time) return time > o.time;
    if (kind != o.kind) return kind > o.kind;
    return seq > o.seq;
  }
};

struct Deadline {
  Timestamp time;
  QueryId id;
  std::uint32_t generation;
};

enum class QueryState : std::uint8_t { kFree, kToServer, kAtServer, kToClient };

struct Query {
  std::uint32_t generation = 0;
  QueryState state = QueryState::kFree;
  std::uint32_t client = 0;
  std::uint32_t server = 0;
  int arrival_rif = 0;
  int phase = 0;
  bool measured = false;
  Timestamp sent{};
  Timestamp server_arrival{};
  std::uint64_t ticket = 0;
  double work = 0.0;
};

struct Server {
  Machine machine;
  AntagonistProcess antagonist;
  ProcessorSharingQueue queue;
  ServerLoadTracker tracker;
  Timestamp last_advance{};
  double rate = 0.0;
  std::uint64_t version = 0;
  std::vector<double> cpu;                 // core-seconds per second
  std::vector<std::uint32_t> completions;  // per second
};

struct Client {
  ClientPolicyState state;
  ProbePool pool;
  Rng arrival_rng;
  Rng work_rng;
  std::uint32_t arrival_generation = 0;
  double qps = 0.0;
  Timestamp last_probe{};
};

std::int64_t micros(Timestamp t) { return t.time_since_epoch().count(); }

class Simulator {
 public:
  explicit Simulator(const RunSpec& spec);
  RunResult run();

 private:
  void loop(const char*& what, std::uint32_t& a, std::uint32_t& b);
  void push(Event e);
  void dispatch(const Event& e);
  void hash_event(Timestamp t, std::uint64_t kind, std::uint64_t a,
                  std::uint64_t b);

  Duration wire();
  void advance(std::uint32_t s);
  void account_cpu(std::uint32_t s, Timestamp from, Timestamp to, double rate);
  void account_cpu_at(std::uint32_t s, Timestamp at, double core_seconds);
  void reschedule(std::uint32_t s);
  void check_server(std::uint32_t s) const;

  void on_phase_start(std::size_t index);
  void on_client_query(std::uint32_t c, std::uint32_t generation);
  void send_probes(std::uint32_t c, int count, PhaseResult* result);
  void schedule_next_arrival(std::uint32_t c);
  void on_query_arrival(QueryId id);
  void on_query_finish(std::uint32_t s, std::uint64_t version);
  void on_deadline(const Deadline& d);
  void on_probe_arrival(const Event& e);
  void on_probe_response(const Event& e);
  void on_query_response(const Event& e);
  void on_antagonist_tick();
  void on_metric_tick();
  void on_yarp_poll(std::uint32_t c);
  void on_idle_probe(std::uint32_t c, std::uint32_t generation);
  void on_wrr_recompute();

  QueryId allocate_query();
  void free_query(QueryId id);
  std::size_t second_of(Timestamp t) const;
  void finalize_phase(std::size_t i);
  bool measuring(std::size_t pi) const {
    return now_ >= phase_start_[pi] + spec_.warmup && now_ < measure_end_[pi];
  }
  void check_drained() const;

  const RunSpec& spec_;
  const SimConfig& sim_;
  std::uint32_t n_servers_;
  std::uint32_t n_clients_;

  std::vector<Phase> phases_;
  std::vector<Timestamp> phase_start_;
  // Queries sent after this point could still be in flight when the next
  // phase begins, so they are not measured.
  std::vector<Timestamp> measure_end_;
  std::vector<PrequalConfig> phase_prequal_;
  std::vector<double> phase_budget_;
  std::vector<PolicyParams> phase_params_;
  std::vector<WorkloadConfig> phase_workload_;
  Timestamp schedule_end_{};
  Timestamp horizon_{};
  int current_ = -1;

  std::vector<Server> servers_;
  std::vector<Client> clients_;
  std::vector<ReplicaId> available_;
  std::vector<Query> queries_;
  std::vector<QueryId> free_queries_;

  Rng antagonist_rng_;
  Rng network_rng_;
  Rng policy_rng_;
  Rng probe_rng_;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::deque<Deadline> deadlines_;
  std::uint64_t seq_ = 0;
  Timestamp now_{};

  RunResult result_;
};

Simulator::Simulator(const RunSpec& spec)
    : spec_(spec),
      sim_(spec.sim),
      n_servers_(static_cast<std::uint32_t>(spec.sim.n_servers)),
      n_clients_(static_cast<std::uint32_t>(spec.sim.n_clients)),
      phases_(spec.phases),
      antagonist_rng_(make_rng(spec.master_seed, spec.run_index,
                               Stream::kAntagonist)),
      network_rng_(make_rng(spec.master_seed, spec.run_index, Stream::kNetwork)),
      policy_rng_(make_rng(spec.master_seed, spec.run_index, Stream::kPolicy)),
      probe_rng_(make_rng(spec.master_seed, spec.run_index,
                          Stream::kProbeTargets)) {
  sim_.validate();
  if (phases_.empty()) throw ConfigError("schedule: at least one phase required");
  if (spec.warmup < Duration::zero()) throw ConfigError("warmup must be >= 0");

  const auto tail = std::chrono::ceil<std::chrono::seconds>(
      sim_.query_deadline + 2 * sim_.wire_max);
  Duration t{0};
  for (std::size_t i = 0; i < phases_.size(); ++i) {
    const Phase& p = phases_[i];
    const Duration cut = i + 1 < phases_.size() ? Duration(tail) : Duration{0};
    if (p.duration % std::chrono::seconds(1) != Duration::zero() ||
        p.duration <= spec.warmup + cut) {
      throw ConfigError(
          "phase duration must be a whole number of seconds longer than the "
          "warmup (plus the query deadline when another phase follows)");
    }
    if (!(p.load > 0)) throw ConfigError("phase load must be > 0");
    phase_start_.push_back(at(t));
    t += p.duration;
    measure_end_.push_back(at(t - cut));

    PrequalConfig pc = spec.prequal;
    pc.num_replicas = sim_.n_servers;
    if (p.r_probe) pc.r_probe = *p.r_probe;
    if (p.r_remove) pc.r_remove = *p.r_remove;
    if (p.q_rif) pc.q_rif = *p.q_rif;
    pc.validate();
    phase_prequal_.push_back(pc);
    phase_budget_.push_back(compute_reuse_budget(pc));

    PolicyParams pp = spec.params;
    if (p.linear_lambda) pp.linear_lambda = *p.linear_lambda;
    phase_params_.push_back(pp);

    WorkloadConfig wl = spec.workload;
    wl.n_clients = sim_.n_clients;
    wl.n_servers = sim_.n_servers;
    wl.slow_even_replicas = wl.slow_even_replicas || p.slow_even_replicas;
    wl.validate();
    phase_workload_.push_back(wl);
  }
  schedule_end_ = at(t);
  horizon_ = schedule_end_ + sim_.query_deadline + std::chrono::seconds(1);
  const std::size_t seconds =
      static_cast<std::size_t>(std::ceil(to_seconds(horizon_.time_since_epoch()))) +
      1;

  servers_.reserve(n_servers_);
  for (std::uint32_t s = 0; s < n_servers_; ++s) {
    Machine m;
    m.capacity = sim_.capacity;
    m.replica_allocation = sim_.allocation;
    m.hobble_penalty = sim_.hobble_penalty;
    AntagonistProcess ant(sim_.antagonist, m, antagonist_rng_);
    servers_.push_back(Server{m, ant, ProcessorSharingQueue{},
                              ServerLoadTracker(sim_.tracker), Timestamp{}, 0.0,
                              0, std::vector<double>(seconds, 0.0),
                              std::vector<std::uint32_t>(seconds, 0)});
    available_.push_back(replica(s));
  }
  clients_.reserve(n_clients_);
  for (std::uint32_t c = 0; c < n_clients_; ++c) {
    ClientPolicyState state(n_servers_, sim_.n_clients, spec.params.c3_ewma_alpha);
    // Round-robin clients start at independent positions.
    state.last_chosen = replica(std::uniform_int_distribution<std::uint32_t>(
        0, n_servers_ - 1)(policy_rng_));
    clients_.push_back(Client{
        std::move(state), ProbePool{},
        make_rng(spec.master_seed, spec.run_index, Stream::kArrivals, c + 1),
        make_rng(spec.master_seed, spec.run_index, Stream::kWork, c + 1), 0, 0.0,
        Timestamp{}});
  }

  for (std::size_t i = 0; i <= phases_.size(); ++i) {
    push(Event{i < phases_.size() ? phase_start_[i] : schedule_end_,
               EventKind::kPhaseStart, 0, static_cast<std::uint32_t>(i)});
  }
  push(Event{Timestamp{}, EventKind::kAntagonistTick, 0});
  push(Event{at(sim_.metric_tick), EventKind::kMetricTick, 0});
  push(Event{at(spec.params.wrr_period), EventKind::kWrrRecompute, 0});
  for (std::uint32_t c = 0; c < n_clients_; ++c) {
    const auto offset = std::uniform_int_distribution<std::int64_t>(
        0, spec.params.yarp_poll_period.count() - 1)(policy_rng_);
    push(Event{at(Duration(offset)), EventKind::kYarpPoll, 0, c});
  }

  for (std::size_t i = 0; i < phases_.size(); ++i) {
    PhaseResult r;
    r.phase = phases_[i];
    r.start = phase_start_[i];
    r.end = phase_start_[i] + phases_[i].duration;
    r.measured_until = measure_end_[i];
    r.measured_seconds = std::chrono::duration_cast<std::chrono::seconds>(
                             r.measured_until - r.start - spec.warmup)
                             .count();
    result_.phases.push_back(std::move(r));
  }
  result_.trace_hash = 1469598103934665603ULL;
}

void Simulator::push(Event e) {
  e.seq = seq_++;
  events_.push(e);
}

void Simulator::hash_event(Timestamp t, std::uint64_t kind, std::uint64_t a,
                           std::uint64_t b) {
  for (std::uint64_t v : {static_cast<std::uint64_t>(micros(t)), kind, a, b}) {
    result_.trace_hash ^= v;
    result_.trace_hash *= 1099511628211ULL;
  }
}

Duration Simulator::wire() {
  return Duration(std::uniform_int_distribution<std::int64_t>(
      sim_.wire_min.count(), sim_.wire_max.count())(network_rng_));
}

std::size_t Simulator::second_of(Timestamp t) const {
  return static_cast<std::size_t>(micros(t) / 1'000'000);
}

void Simulator::account_cpu(std::uint32_t s, Timestamp from, Timestamp to,
                            double rate) {
  auto& cpu = servers_[s].cpu;
  std::int64_t t = micros(from);
  const std::int64_t end = micros(to);
  while (t < end) {
    const std::int64_t boundary = (t / 1'000'000 + 1) * 1'000'000;
    const std::int64_t stop = std::min(boundary, end);
    const auto sec = static_cast<std::size_t>(t / 1'000'000);
    if (sec < cpu.size()) cpu[sec] += rate * static_cast<double>(stop - t) * 1e-6;
    t = stop;
  }
}

void Simulator::account_cpu_at(std::uint32_t s, Timestamp t, double core_seconds) {
  const std::size_t sec = second_of(t);
  if (sec < servers_[s].cpu.size()) servers_[s].cpu[sec] += core_seconds;
}

void Simulator::advance(std::uint32_t s) {
  Server& srv = servers_[s];
  if (now_ > srv.last_advance && srv.queue.active() > 0) {
    const double dt = to_seconds(now_ - srv.last_advance);
    srv.queue.serve(srv.rate * dt);
    account_cpu(s, srv.last_advance, now_, srv.rate);
  }
  srv.last_advance = now_;
}

void Simulator::reschedule(std::uint32_t s) {
  Server& srv = servers_[s];
  const int k = srv.queue.active();
  srv.rate = replica_service_rate(
      srv.machine, static_cast<double>(std::min(k, sim_.threads_cap)));
  ++srv.version;
  const auto work = srv.queue.work_to_next_finish();
  if (!work) return;
  std::int64_t dt = 0;
  if (*work > 1e-12) {
    const double us = *work / srv.rate * 1e6;
    dt = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(us - 1e-7)));
  }
  push(Event{now_ + Duration(dt), EventKind::kQueryFinish, 0, s, 0,
             static_cast<std::int64_t>(srv.version)});
}

void Simulator::check_server(std::uint32_t s) const {
  if (!spec_.check_invariants) return;
  const Server& srv = servers_[s];
  PREQUAL_CHECK(srv.tracker.rif() == srv.queue.active(),
                "server RIF differs from active queries");
  PREQUAL_CHECK(srv.rate <= srv.machine.capacity + 1e-12,
                "replica rate above machine capacity");
  PREQUAL_CHECK(srv.machine.antagonist_demand < srv.machine.capacity,
                "antagonist demand reached capacity");
}

QueryId Simulator::allocate_query() {
  if (free_queries_.empty()) {
    queries_.emplace_back();
    return static_cast<QueryId>(queries_.size() - 1);
  }
  const QueryId id = free_queries_.back();
  free_queries_.pop_back();
  return id;
}

void Simulator::free_query(QueryId id) {
  Query& q = queries_[id];
  q.state = QueryState::kFree;
  ++q.generation;
  free_queries_.push_back(id);
}

void Simulator::schedule_next_arrival(std::uint32_t c) {
  Client& cl = clients_[c];
  double gap = 0.0;
  if (phase_workload_[static_cast<std::size_t>(current_)].arrivals ==
      ArrivalProcess::kPoisson) {
    gap = std::exponential_distribution<double>(cl.qps)(cl.arrival_rng);
  } else {
    gap = 1.0 / cl.qps;
  }
  const auto step = std::max<std::int64_t>(1, std::llround(gap * 1e6));
  push(Event{now_ + Duration(step), EventKind::kClientQuery, 0, c,
             cl.arrival_generation});
}

void Simulator::on_phase_start(std::size_t index) {
  if (index == phases_.size()) {
    current_ = -1;
    for (auto& cl : clients_) ++cl.arrival_generation;
    return;
  }
  current_ = static_cast<int>(index);
  const Phase& p = phases_[index];
  const WorkloadConfig& wl = phase_workload_[index];
  const double qps = qps_for_load(p.load, sim_.n_servers, sim_.allocation, wl);
  result_.phases[index].target_qps = qps;
  const PrequalConfig& pc = phase_prequal_[index];
  for (std::uint32_t c = 0; c < n_clients_; ++c) {
    Client& cl = clients_[c];
    cl.qps = qps / n_clients_;
    ++cl.arrival_generation;
    if (wl.arrivals == ArrivalProcess::kDeterministic) {
      const double offset = uniform01(cl.arrival_rng) / cl.qps;
      push(Event{now_ + Duration(std::llround(offset * 1e6)),
                 EventKind::kClientQuery, 0, c, cl.arrival_generation});
    } else {
      schedule_next_arrival(c);
    }
    if (uses_probe_pool(p.policy) && pc.idle_probe_interval) {
      cl.last_probe = now_;
      push(Event{now_ + *pc.idle_probe_interval, EventKind::kIdleProbe, 0, c,
                 cl.arrival_generation});
    }
  }
}

void Simulator::send_probes(std::uint32_t c, int count, PhaseResult* result) {
  const auto targets = pick_probe_targets(count, available_, probe_rng_);
  for (ReplicaId t : targets) {
    push(Event{now_ + wire(), EventKind::kProbeArrival, 0,
               static_cast<std::uint32_t>(index_of(t)), c, 0, 0, now_});
  }
  if (result) result->probes_sent += targets.size();
  clients_[c].last_probe = now_;
}

void Simulator::on_client_query(std::uint32_t c, std::uint32_t generation) {
  Client& cl = clients_[c];
  if (current_ < 0 || generation != cl.arrival_generation) return;
  const auto pi = static_cast<std::size_t>(current_);
  const Phase& phase = phases_[pi];
  const PrequalConfig& pc = phase_prequal_[pi];
  const WorkloadConfig& wl = phase_workload_[pi];
  PhaseResult& res = result_.phases[pi];
  const bool measured = measuring(pi);

  const double base_work = draw_base_work(wl, cl.work_rng);
  ReplicaId chosen{};
  const bool pooled = uses_probe_pool(phase.policy);
  if (pooled) {
    cl.pool.expire_and_maintain(now_, pc);
    if (phase.policy == Policy::kPrequal && measured) {
      const RifThreshold theta = cl.pool.rif_threshold(pc);
      ++res.theta_count;
      if (theta.is_infinite()) {
        ++res.theta_infinite;
      } else {
        res.theta_sum += theta.value();
      }
    }
    chosen = pool_select(phase.policy, cl.pool, pc, phase_params_[pi], cl.state,
                         policy_rng_);
  } else {
    chosen = baseline_select(phase.policy, cl.state, available_, policy_rng_);
  }
  cl.state.on_sent(chosen);
  if (pooled) cl.pool.on_query_sent(chosen, pc);

  const QueryId id = allocate_query();
  Query& q = queries_[id];
  q.state = QueryState::kToServer;
  q.client = c;
  q.server = static_cast<std::uint32_t>(index_of(chosen));
  q.phase = current_;
  q.measured = measured;
  q.sent = now_;
  q.work = inflate_for_replica(wl, base_work, chosen);
  if (measured) ++res.sent;
  push(Event{now_ + wire(), EventKind::kQueryArrival, 0, id, q.generation});

  if (pooled) {
    const int k = cl.pool.probes_for_query(pc);
    if (k > 0) send_probes(c, k, measured ? &res : nullptr);
  }
  schedule_next_arrival(c);
}

void Simulator::on_idle_probe(std::uint32_t c, std::uint32_t generation) {
  Client& cl = clients_[c];
  if (current_ < 0 || generation != cl.arrival_generation) return;
  const auto pi = static_cast<std::size_t>(current_);
  const PrequalConfig& pc = phase_prequal_[pi];
  if (!pc.idle_probe_interval) return;
  if (now_ - cl.last_probe >= *pc.idle_probe_interval) {
    const int count = std::max(1, static_cast<int>(std::lround(pc.r_probe)));
    const bool measured = measuring(pi);
    send_probes(c, count, measured ? &result_.phases[pi] : nullptr);
  }
  push(Event{cl.last_probe + *pc.idle_probe_interval, EventKind::kIdleProbe, 0,
             c, generation});
}

void Simulator::on_query_arrival(QueryId id) {
  Query& q = queries_[id];
  PREQUAL_CHECK(q.state == QueryState::kToServer, "query arrived twice");
  const std::uint32_t s = q.server;
  Server& srv = servers_[s];
  advance(s);
  q.state = QueryState::kAtServer;
  q.arrival_rif = srv.tracker.on_query_arrive(now_);
  q.server_arrival = now_;
  q.ticket = srv.queue.add(id, q.work);
  deadlines_.push_back(Deadline{now_ + sim_.query_deadline, id, q.generation});
  reschedule(s);
  check_server(s);
}

void Simulator::on_query_finish(std::uint32_t s, std::uint64_t version) {
  Server& srv = servers_[s];
  if (version != srv.version) return;
  advance(s);
  for (const auto& f : srv.queue.pop_finished()) {
    Query& q = queries_[f.id];
    PREQUAL_CHECK(q.state == QueryState::kAtServer && q.server == s,
                  "finished query not at this server");
    result_.max_work_error =
        std::max(result_.max_work_error, std::abs(f.attained - f.work));
    const Duration latency = now_ - q.server_arrival;
    srv.tracker.on_query_finish(q.arrival_rif, latency, now_);
    const std::size_t sec = second_of(now_);
    if (sec < srv.completions.size()) ++srv.completions[sec];
    q.state = QueryState::kToClient;
    push(Event{now_ + wire(), EventKind::kQueryResponse, 0, f.id, q.generation,
               1, latency.count()});
  }
  reschedule(s);
  check_server(s);
}

void Simulator::on_deadline(const Deadline& d) {
  Query& q = queries_[d.id];
  if (q.generation != d.generation || q.state != QueryState::kAtServer) return;
  const std::uint32_t s = q.server;
  Server& srv = servers_[s];
  advance(s);
  srv.queue.cancel(q.ticket);
  srv.tracker.on_query_abandon();
  q.state = QueryState::kToClient;
  push(Event{now_ + wire(), EventKind::kQueryResponse, 0, d.id, q.generation, 0,
             0});
  reschedule(s);
  check_server(s);
}

void Simulator::on_probe_arrival(const Event& e) {
  const std::uint32_t s = e.a;
  Server& srv = servers_[s];
  advance(s);
  if (sim_.probe_cpu_cost > 0.0) {
    if (srv.queue.active() > 0) {
      // The probe's CPU comes out of the replica's running share.
      srv.queue.charge_overhead(sim_.probe_cpu_cost);
      reschedule(s);
    } else {
      account_cpu_at(s, now_, sim_.probe_cpu_cost);
    }
  }
  const LoadReport report = srv.tracker.answer_probe(now_);
  push(Event{now_ + wire(), EventKind::kProbeResponse, 0, e.b, s, report.rif,
             report.latency_estimate.count(), e.sent});
}

void Simulator::on_probe_response(const Event& e) {
  const std::uint32_t c = e.a;
  const std::uint32_t s = e.b;
  Client& cl = clients_[c];
  if (now_ - e.sent > sim_.probe_timeout) {
    for (auto& r : result_.phases) {
      if (e.sent >= r.start + spec_.warmup && e.sent < r.measured_until) ++r.probes_dropped;
    }
    return;
  }
  const int rif = static_cast<int>(e.c);
  const Duration latency(e.d);
  auto& est = cl.state.c3[s];
  est.queue_size.observe(rif);
  est.service_time.observe(static_cast<double>(latency.count()));
  if (current_ < 0) return;
  const auto pi = static_cast<std::size_t>(current_);
  if (!uses_probe_pool(phases_[pi].policy)) return;
  cl.pool.add_probe(ProbeResponse{replica(s), rif, latency, now_},
                    phase_prequal_[pi], phase_budget_[pi], policy_rng_);
}

void Simulator::on_query_response(const Event& e) {
  const QueryId id = e.a;
  Query& q = queries_[id];
  PREQUAL_CHECK(q.generation == e.b && q.state == QueryState::kToClient,
                "stale query response");
  Client& cl = clients_[q.client];
  cl.state.on_done(replica(q.server));
  const bool ok = e.c != 0;
  const Duration rtt = now_ - q.sent;
  if (ok) {
    auto& est = cl.state.c3[q.server];
    est.response_time.observe(static_cast<double>(rtt.count()));
    est.service_time.observe(static_cast<double>(e.d));
  }
  if (q.measured) {
    PhaseResult& r = result_.phases[static_cast<std::size_t>(q.phase)];
    if (ok) {
      ++r.completed;
      r.latency.record(static_cast<double>(rtt.count()));
    } else {
      ++r.errors;
      r.latency.record(static_cast<double>(sim_.query_deadline.count()));
    }
  }
  free_query(id);
}

void Simulator::on_antagonist_tick() {
  for (std::uint32_t s = 0; s < n_servers_; ++s) {
    Server& srv = servers_[s];
    const double demand = srv.antagonist.step(srv.machine, antagonist_rng_);
    if (demand == srv.machine.antagonist_demand) continue;
    advance(s);
    srv.machine.antagonist_demand = demand;
    reschedule(s);
    check_server(s);
  }
  if (now_ + sim_.antagonist.period < horizon_) {
    push(Event{now_ + sim_.antagonist.period, EventKind::kAntagonistTick, 0});
  }
}

void Simulator::on_metric_tick() {
  if (current_ >= 0) {
    const auto pi = static_cast<std::size_t>(current_);
    if (measuring(pi)) {
      for (const Server& srv : servers_) {
        result_.phases[pi].rif.record(srv.tracker.rif());
      }
    }
  }
  if (now_ + sim_.metric_tick < schedule_end_) {
    push(Event{now_ + sim_.metric_tick, EventKind::kMetricTick, 0});
  }
}

void Simulator::on_yarp_poll(std::uint32_t c) {
  if (current_ >= 0 &&
      phases_[static_cast<std::size_t>(current_)].policy == Policy::kYarpPo2C) {
    auto& polled = clients_[c].state.polled_rif;
    for (std::uint32_t s = 0; s < n_servers_; ++s) {
      polled[s] = servers_[s].tracker.rif();
    }
  }
  if (now_ + spec_.params.yarp_poll_period < schedule_end_) {
    push(Event{now_ + spec_.params.yarp_poll_period, EventKind::kYarpPoll, 0, c});
  }
}

void Simulator::on_wrr_recompute() {
  const std::size_t end = second_of(now_);
  const auto window = static_cast<std::size_t>(
      std::chrono::duration_cast<std::chrono::seconds>(spec_.params.wrr_window)
          .count());
  const std::size_t begin = end > window ? end - window : 0;
  if (end > begin) {
    const double span = static_cast<double>(end - begin);
    std::vector<double> qps(n_servers_);
    std::vector<double> util(n_servers_);
    auto has_data = std::make_unique<bool[]>(n_servers_);
    for (std::uint32_t s = 0; s < n_servers_; ++s) {
      const Server& srv = servers_[s];
      double done = 0.0;
      double cpu = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        done += srv.completions[i];
        cpu += srv.cpu[i];
      }
      qps[s] = done / span;
      util[s] = cpu / (sim_.allocation * span);
      has_data[s] = cpu > 0.0;
    }
    auto weights = std::make_shared<const WrrWeights>(WrrWeights::from_load(
        qps, util, std::span<const bool>(has_data.get(), n_servers_),
        spec_.params.wrr_min_utilization, spec_.params.wrr_relative_floor));
    for (auto& cl : clients_) cl.state.wrr = weights;
  }
  if (now_ + spec_.params.wrr_period < schedule_end_) {
    push(Event{now_ + spec_.params.wrr_period, EventKind::kWrrRecompute, 0});
  }
}

void Simulator::dispatch(const Event& e) {
  hash_event(e.time, static_cast<std::uint64_t>(e.kind), e.a, e.b);
  switch (e.kind) {
    case EventKind::kPhaseStart:
      on_phase_start(e.a);
      break;
    case EventKind::kAntagonistTick:
      on_antagonist_tick();
      break;
    case EventKind::kQueryFinish:
      on_query_finish(e.a, static_cast<std::uint64_t>(e.c));
      break;
    case EventKind::kQueryArrival:
      on_query_arrival(e.a);
      break;
    case EventKind::kProbeArrival:
      on_probe_arrival(e);
      break;
    case EventKind::kProbeResponse:
      on_probe_response(e);
      break;
    case EventKind::kQueryResponse:
      on_query_response(e);
      break;
    case EventKind::kClientQuery:
      on_client_query(e.a, e.b);
      break;
    case EventKind::kIdleProbe:
      on_idle_probe(e.a, e.b);
      break;
    case EventKind::kYarpPoll:
      on_yarp_poll(e.a);
      break;
    case EventKind::kWrrRecompute:
      on_wrr_recompute();
      break;
    case EventKind::kMetricTick:
      on_metric_tick();
      break;
  }
}

void Simulator::finalize_phase(std::size_t i) {
  PhaseResult& r = result_.phases[i];
  const auto first = static_cast<std::size_t>(
      (micros(r.start + spec_.warmup) + 999'999) / 1'000'000);
  const auto last = second_of(r.measured_until);
  r.replica_utilization.assign(n_servers_, 0.0);
  if (last <= first) return;
  for (std::uint32_t s = 0; s < n_servers_; ++s) {
    const std::span<const double> slice(servers_[s].cpu.data() + first,
                                        last - first);
    for (double u : cpu_windows(slice, sim_.allocation, 1)) r.cpu_1s.push_back(u);
    for (double u : cpu_windows(slice, sim_.allocation, 60)) r.cpu_60s.push_back(u);
    r.replica_utilization[s] =
        std::accumulate(slice.begin(), slice.end(), 0.0) /
        (sim_.allocation * static_cast<double>(slice.size()));
  }
}

void Simulator::check_drained() const {
  for (const Query& q : queries_) {
    PREQUAL_CHECK(q.state == QueryState::kFree, "query still in flight at end");
  }
  for (const Server& srv : servers_) {
    PREQUAL_CHECK(srv.tracker.rif() == 0 && srv.queue.active() == 0,
                  "server RIF not zero after drain");
  }
  for (const Client& cl : clients_) {
    for (int rif : cl.state.client_rif) {
      PREQUAL_CHECK(rif == 0, "client RIF not zero after drain");
    }
  }
}

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::kPhaseStart: return "phase_start";
    case EventKind::kAntagonistTick: return "antagonist_tick";
    case EventKind::kQueryFinish: return "query_finish";
    case EventKind::kQueryArrival: return "query_arrival";
    case EventKind::kProbeArrival: return "probe_arrival";
    case EventKind::kProbeResponse: return "probe_response";
    case EventKind::kQueryResponse: return "query_response";
    case EventKind::kClientQuery: return "client_query";
    case EventKind::kIdleProbe: return "idle_probe";
    case EventKind::kYarpPoll: return "yarp_poll";
    case EventKind::kWrrRecompute: return "wrr_recompute";
    case EventKind::kMetricTick: return "metric_tick";
  }
  return "unknown";
}

RunResult Simulator::run() {
  const char* what = "none";
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  try {
    loop(what, a, b);
  } catch (const InvariantViolation& e) {
    throw InvariantViolation(std::string(e.what()) + " [event " +
                             std::to_string(result_.events) + " at t=" +
                             std::to_string(micros(now_)) + "us, kind=" + what +
                             ", a=" + std::to_string(a) +
                             ", b=" + std::to_string(b) + "]");
  }
  for (std::size_t i = 0; i < phases_.size(); ++i) finalize_phase(i);
  check_drained();
  return std::move(result_);
}

void Simulator::loop(const char*& what, std::uint32_t& a, std::uint32_t& b) {
  while (true) {
    const bool have_event = !events_.empty();
    const bool have_deadline = !deadlines_.empty();
    if (!have_event && !have_deadline) break;
    // Heap events win ties, so a query finishing exactly at its deadline
    // succeeds.
    if (have_deadline &&
        (!have_event || deadlines_.front().time < events_.top().time)) {
      const Deadline d = deadlines_.front();
      deadlines_.pop_front();
      if (d.time > horizon_) break;
      now_ = d.time;
      what = "deadline";
      a = d.id;
      b = d.generation;
      hash_event(now_, 255, d.id, d.generation);
      on_deadline(d);
    } else {
      const Event e = events_.top();
      events_.pop();
      if (e.time > horizon_) break;
      now_ = e.time;
      what = kind_name(e.kind);
      a = e.a;
      b = e.b;
      dispatch(e);
    }
    ++result_.events;
  }
}

}  // namespace

RunResult simulate(const RunSpec& spec) { return Simulator(spec).run(); }

}  // namespace prequal
