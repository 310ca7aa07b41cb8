#include "prequal/experiment.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

namespace prequal {

namespace {

using nlohmann::json;

// Reads typed fields out of one JSON object and rejects keys nobody read.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where("") + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
      } else {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError(where(key) + ": wrong type");
    }
  }

  // Durations are written as integers in the unit named by the key suffix.
  template <typename Unit>
  void read_duration(const char* key, Duration& out) {
    std::int64_t count = std::chrono::duration_cast<Unit>(out).count();
    read(key, count);
    out = std::chrono::duration_cast<Duration>(Unit(count));
  }

  template <typename Unit>
  void read_optional_duration(const char* key, std::optional<Duration>& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return;
    Duration d{0};
    read_duration<Unit>(key, d);
    out = d;
  }

  void read_optional(const char* key, std::optional<double>& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return;
    double v = 0.0;
    read(key, v);
    out = v;
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!obj_.contains(key)) return std::nullopt;
    return Section(obj_.at(key), where(key));
  }

  void mark(const char* key) { seen_.insert(key); }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError(where(key) + ": unknown key");
    }
  }

  std::string where(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? path_ : path_ + "." + key;
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

using std::chrono::microseconds;
using std::chrono::milliseconds;
using std::chrono::seconds;

template <typename Unit>
std::int64_t count_in(Duration d) {
  return std::chrono::duration_cast<Unit>(d).count();
}

const char* step_mode_name(StepMode m) {
  return m == StepMode::kContinuous ? "continuous" : "isolated";
}

void parse_sim(Section& s, SimConfig& sim) {
  s.read("n_clients", sim.n_clients);
  s.read("n_servers", sim.n_servers);
  s.read("capacity", sim.capacity);
  s.read("allocation", sim.allocation);
  s.read("hobble_penalty", sim.hobble_penalty);
  s.read("threads_cap", sim.threads_cap);
  s.read("probe_cpu_cost", sim.probe_cpu_cost);
  s.read_duration<microseconds>("wire_min_us", sim.wire_min);
  s.read_duration<microseconds>("wire_max_us", sim.wire_max);
  s.read_duration<microseconds>("probe_timeout_us", sim.probe_timeout);
  s.read_duration<milliseconds>("query_deadline_ms", sim.query_deadline);
  s.read_duration<milliseconds>("metric_tick_ms", sim.metric_tick);
  if (auto a = s.child("antagonist")) {
    auto& ant = sim.antagonist;
    a->read_duration<milliseconds>("period_ms", ant.period);
    a->read("base_min", ant.base_min);
    a->read("base_max", ant.base_max);
    a->read("burst_probability", ant.burst_probability);
    a->read("burst_headroom", ant.burst_headroom);
    a->read_duration<milliseconds>("burst_mean_duration_ms",
                                   ant.burst_mean_duration);
    a->read("epsilon", ant.epsilon);
    a->finish();
  }
  if (auto t = s.child("tracker")) {
    auto& tr = sim.tracker;
    t->read("bucket_capacity", tr.bucket_capacity);
    t->read_duration<milliseconds>("sample_window_ms", tr.sample_window);
    t->read("min_samples", tr.min_samples);
    t->read("max_radius", tr.max_radius);
    t->read_duration<microseconds>("default_latency_us", tr.default_latency);
    t->finish();
  }
  s.finish();
}

void parse_workload(Section& s, WorkloadConfig& wl) {
  s.read("work_mean", wl.work_mean);
  s.read_optional("work_sd", wl.work_sd);
  s.read("slow_even_replicas", wl.slow_even_replicas);
  std::string arrivals =
      wl.arrivals == ArrivalProcess::kPoisson ? "poisson" : "deterministic";
  s.read("arrivals", arrivals);
  if (arrivals == "poisson") {
    wl.arrivals = ArrivalProcess::kPoisson;
  } else if (arrivals == "deterministic") {
    wl.arrivals = ArrivalProcess::kDeterministic;
  } else {
    throw ConfigError(s.where("arrivals") +
                      ": expected \"poisson\" or \"deterministic\"");
  }
  s.finish();
}

void parse_prequal(Section& s, PrequalConfig& pc) {
  s.read("r_probe", pc.r_probe);
  s.read("r_remove", pc.r_remove);
  s.read("delta", pc.delta);
  s.read("pool_size", pc.pool_size);
  s.read("q_rif", pc.q_rif);
  s.read_duration<milliseconds>("age_limit_ms", pc.age_limit);
  s.read("min_occupancy", pc.min_occupancy);
  s.read_optional_duration<milliseconds>("idle_probe_interval_ms",
                                         pc.idle_probe_interval);
  s.read("rif_window", pc.rif_window);
  s.finish();
}

void parse_policies(Section& s, PolicyParams& pp) {
  s.read("linear_lambda", pp.linear_lambda);
  s.read_duration<microseconds>("linear_alpha_us", pp.linear_alpha);
  s.read("c3_ewma_alpha", pp.c3_ewma_alpha);
  s.read_duration<milliseconds>("yarp_poll_ms", pp.yarp_poll_period);
  s.read_duration<seconds>("wrr_period_s", pp.wrr_period);
  s.read_duration<seconds>("wrr_window_s", pp.wrr_window);
  s.read("wrr_min_utilization", pp.wrr_min_utilization);
  s.read("wrr_relative_floor", pp.wrr_relative_floor);
  s.finish();
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (cfg.step_duration <= cfg.base.warmup) {
    throw ConfigError("step_seconds must exceed warmup_seconds");
  }
  if (cfg.experiment == Experiment::kLoadRamp &&
      (cfg.step_duration / 2) <= cfg.base.warmup) {
    throw ConfigError("load_ramp needs step_seconds / 2 > warmup_seconds");
  }
  if (cfg.step_mode == StepMode::kContinuous) {
    // Each phase also gives up its last deadline's worth of sends.
    const auto tail = std::chrono::ceil<std::chrono::seconds>(
        cfg.base.sim.query_deadline + 2 * cfg.base.sim.wire_max);
    const Duration phase = cfg.experiment == Experiment::kLoadRamp
                               ? cfg.step_duration / 2
                               : cfg.step_duration;
    if (phase <= cfg.base.warmup + tail) {
      throw ConfigError(fmt::format(
          "step_seconds: continuous phases must exceed warmup_seconds + {} s",
          tail.count()));
    }
  }
  if (cfg.base.params.linear_alpha <= Duration::zero()) {
    throw ConfigError("policies.linear_alpha_us must be > 0");
  }
  if (!(cfg.base.params.linear_lambda >= 0 && cfg.base.params.linear_lambda <= 1)) {
    throw ConfigError("policies.linear_lambda must be in [0, 1]");
  }
  if (!(cfg.base.params.c3_ewma_alpha > 0 && cfg.base.params.c3_ewma_alpha <= 1)) {
    throw ConfigError("policies.c3_ewma_alpha must be in (0, 1]");
  }
  if (cfg.base.params.yarp_poll_period <= Duration::zero() ||
      cfg.base.params.wrr_period <= Duration::zero() ||
      cfg.base.params.wrr_window <= Duration::zero()) {
    throw ConfigError("policies: periods and windows must be > 0");
  }
  cfg.base.sim.validate();
  cfg.base.prequal.validate();
  WorkloadConfig wl = cfg.base.workload;
  wl.n_clients = cfg.base.sim.n_clients;
  wl.n_servers = cfg.base.sim.n_servers;
  wl.validate();
  const auto count = build_schedule(cfg.experiment).size();
  for (int s : cfg.steps) {
    if (s < 0 || static_cast<std::size_t>(s) >= count) {
      throw ConfigError(fmt::format("steps: index {} out of range", s));
    }
  }
}

}  // namespace

RunSpec testbed_defaults() {
  RunSpec spec;
  spec.sim.hobble_penalty = 0.3;
  spec.sim.antagonist.burst_probability = 0.3;
  spec.sim.antagonist.burst_headroom = 0.2;
  spec.sim.antagonist.burst_mean_duration = std::chrono::milliseconds(5000);
  // Median latency of a query running alone under this antagonist model.
  spec.params.linear_alpha = std::chrono::microseconds(2700);
  return spec;
}

ExperimentConfig default_config(Experiment experiment) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.base = testbed_defaults();
  cfg.step_mode = experiment == Experiment::kLoadRamp ? StepMode::kContinuous
                                                      : StepMode::kIsolated;
  return cfg;
}

ExperimentConfig parse_config(const json& doc,
                              std::optional<Experiment> experiment_override) {
  Section root(doc, "");
  std::string name;
  root.read("experiment", name);
  std::optional<Experiment> experiment = experiment_override;
  if (!experiment) {
    if (name.empty()) throw ConfigError("experiment: required");
    experiment = parse_experiment(name);
  }
  ExperimentConfig cfg = default_config(*experiment);

  root.read("seed", cfg.seed);
  root.read("repetitions", cfg.repetitions);
  root.read_duration<seconds>("step_seconds", cfg.step_duration);
  root.read_duration<seconds>("warmup_seconds", cfg.base.warmup);
  root.read("check_invariants", cfg.base.check_invariants);
  std::string mode = step_mode_name(cfg.step_mode);
  root.read("step_mode", mode);
  if (mode == "continuous") {
    cfg.step_mode = StepMode::kContinuous;
  } else if (mode == "isolated") {
    cfg.step_mode = StepMode::kIsolated;
  } else {
    throw ConfigError("step_mode: expected \"continuous\" or \"isolated\"");
  }
  std::string policy;
  root.read("policy", policy);
  if (!policy.empty()) {
    cfg.policy = parse_policy(policy);
    if (!cfg.policy) throw ConfigError("policy: unknown name '" + policy + "'");
  }
  if (doc.contains("steps")) {
    const json& steps = doc.at("steps");
    if (!steps.is_array()) throw ConfigError("steps: expected an array");
    for (const json& s : steps) {
      if (!s.is_number_integer()) throw ConfigError("steps: expected integers");
      cfg.steps.push_back(s.get<int>());
    }
  }
  root.mark("steps");
  if (auto s = root.child("sim")) parse_sim(*s, cfg.base.sim);
  if (auto s = root.child("workload")) parse_workload(*s, cfg.base.workload);
  if (auto s = root.child("prequal")) parse_prequal(*s, cfg.base.prequal);
  if (auto s = root.child("policies")) parse_policies(*s, cfg.base.params);
  root.finish();
  validate(cfg);
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  const RunSpec& b = cfg.base;
  const auto& ant = b.sim.antagonist;
  const auto& tr = b.sim.tracker;
  json doc;
  doc["experiment"] = std::string(experiment_name(cfg.experiment));
  doc["seed"] = cfg.seed;
  doc["repetitions"] = cfg.repetitions;
  doc["step_seconds"] = count_in<seconds>(cfg.step_duration);
  doc["warmup_seconds"] = count_in<seconds>(b.warmup);
  doc["step_mode"] = step_mode_name(cfg.step_mode);
  doc["check_invariants"] = b.check_invariants;
  if (cfg.policy) doc["policy"] = std::string(policy_name(*cfg.policy));
  doc["steps"] = cfg.steps;
  doc["sim"] = {
      {"n_clients", b.sim.n_clients},
      {"n_servers", b.sim.n_servers},
      {"capacity", b.sim.capacity},
      {"allocation", b.sim.allocation},
      {"hobble_penalty", b.sim.hobble_penalty},
      {"threads_cap", b.sim.threads_cap},
      {"probe_cpu_cost", b.sim.probe_cpu_cost},
      {"wire_min_us", count_in<microseconds>(b.sim.wire_min)},
      {"wire_max_us", count_in<microseconds>(b.sim.wire_max)},
      {"probe_timeout_us", count_in<microseconds>(b.sim.probe_timeout)},
      {"query_deadline_ms", count_in<milliseconds>(b.sim.query_deadline)},
      {"metric_tick_ms", count_in<milliseconds>(b.sim.metric_tick)},
      {"antagonist",
       {{"period_ms", count_in<milliseconds>(ant.period)},
        {"base_min", ant.base_min},
        {"base_max", ant.base_max},
        {"burst_probability", ant.burst_probability},
        {"burst_headroom", ant.burst_headroom},
        {"burst_mean_duration_ms", count_in<milliseconds>(ant.burst_mean_duration)},
        {"epsilon", ant.epsilon}}},
      {"tracker",
       {{"bucket_capacity", tr.bucket_capacity},
        {"sample_window_ms", count_in<milliseconds>(tr.sample_window)},
        {"min_samples", tr.min_samples},
        {"max_radius", tr.max_radius},
        {"default_latency_us", count_in<microseconds>(tr.default_latency)}}},
  };
  doc["workload"] = {
      {"work_mean", b.workload.work_mean},
      {"work_sd", b.workload.work_sd ? json(*b.workload.work_sd) : json(nullptr)},
      {"slow_even_replicas", b.workload.slow_even_replicas},
      {"arrivals", b.workload.arrivals == ArrivalProcess::kPoisson
                       ? "poisson"
                       : "deterministic"},
  };
  doc["prequal"] = {
      {"r_probe", b.prequal.r_probe},
      {"r_remove", b.prequal.r_remove},
      {"delta", b.prequal.delta},
      {"pool_size", b.prequal.pool_size},
      {"q_rif", b.prequal.q_rif},
      {"age_limit_ms", count_in<milliseconds>(b.prequal.age_limit)},
      {"min_occupancy", b.prequal.min_occupancy},
      {"idle_probe_interval_ms",
       b.prequal.idle_probe_interval
           ? json(count_in<milliseconds>(*b.prequal.idle_probe_interval))
           : json(nullptr)},
      {"rif_window", b.prequal.rif_window},
  };
  doc["policies"] = {
      {"linear_lambda", b.params.linear_lambda},
      {"linear_alpha_us", count_in<microseconds>(b.params.linear_alpha)},
      {"c3_ewma_alpha", b.params.c3_ewma_alpha},
      {"yarp_poll_ms", count_in<milliseconds>(b.params.yarp_poll_period)},
      {"wrr_period_s", count_in<seconds>(b.params.wrr_period)},
      {"wrr_window_s", count_in<seconds>(b.params.wrr_window)},
      {"wrr_min_utilization", b.params.wrr_min_utilization},
      {"wrr_relative_floor", b.params.wrr_relative_floor},
  };
  return doc;
}

std::vector<PlannedRun> plan_runs(const ExperimentConfig& cfg) {
  ScheduleOptions options;
  options.step_duration = cfg.step_duration;
  std::vector<Phase> phases;
  for (Phase p : build_schedule(cfg.experiment, options)) {
    if (!cfg.steps.empty() &&
        std::find(cfg.steps.begin(), cfg.steps.end(), p.step) == cfg.steps.end()) {
      continue;
    }
    if (cfg.policy) {
      if (cfg.experiment == Experiment::kSelectionRules ||
          cfg.experiment == Experiment::kLoadRamp) {
        if (p.policy != *cfg.policy) continue;
      } else {
        p.policy = *cfg.policy;
      }
    }
    phases.push_back(p);
  }
  if (phases.empty()) throw ConfigError("policy/steps: no phase left to run");

  std::vector<PlannedRun> plan;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    RunSpec spec = cfg.base;
    spec.master_seed = cfg.seed;
    spec.run_index = static_cast<std::uint64_t>(rep);
    const std::string id = fmt::format("{}-seed{}-rep{}",
                                       experiment_name(cfg.experiment), cfg.seed,
                                       rep);
    if (cfg.step_mode == StepMode::kContinuous) {
      spec.phases = phases;
      plan.push_back(PlannedRun{id, spec});
    } else {
      for (const Phase& p : phases) {
        spec.phases = {p};
        plan.push_back(PlannedRun{id, spec});
      }
    }
  }
  return plan;
}

std::vector<RunOutput> execute(const std::vector<PlannedRun>& plan,
                               int parallel) {
  std::vector<RunOutput> out(plan.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plan.size()) return;
      try {
        out[i] = RunOutput{plan[i].run_id, simulate(plan[i].spec)};
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = plan.size();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, parallel));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, plan.size()); ++t) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<MetricRow> metric_rows(const std::string& run_id,
                                   const RunResult& result) {
  std::vector<MetricRow> rows;
  for (const PhaseResult& r : result.phases) {
    const std::string policy(policy_name(r.phase.policy));
    auto add = [&](std::string metric, std::string key, double value,
                   std::string unit) {
      rows.push_back(MetricRow{run_id, r.phase.step, policy, std::move(metric),
                               std::move(key), value, std::move(unit)});
    };
    add("parameter", r.phase.parameter, r.phase.parameter_value, "value");
    add("load", "target", r.phase.load, "fraction_of_allocation");
    add("offered_qps", "target", r.target_qps, "qps");
    const double secs = static_cast<double>(r.measured_seconds);
    add("goodput", "mean", static_cast<double>(r.completed) / secs, "qps");
    add("errors", "per_second", errors_per_second(r.errors, r.measured_seconds),
        "1/s");
    const double finished = static_cast<double>(r.completed + r.errors);
    add("errors", "fraction",
        finished > 0 ? static_cast<double>(r.errors) / finished : 0.0,
        "fraction");
    for (double q : {0.5, 0.9, 0.99, 0.999}) {
      const std::string key = fmt::format("p{:g}", q * 100);
      if (auto v = r.latency.quantile(q)) add("latency", key, *v / 1000.0, "ms");
      if (auto v = r.rif.quantile(q)) add("rif", key, *v, "requests");
    }
    for (auto [name, windows] :
         {std::pair{"1s", &r.cpu_1s}, std::pair{"60s", &r.cpu_60s}}) {
      std::vector<double> w = *windows;
      for (double q : {0.25, 0.5, 0.75, 0.99}) {
        if (auto v = sample_quantile(w, q)) {
          add("cpu_utilization", fmt::format("{}_p{:g}", name, q * 100), *v,
              "fraction_of_allocation");
        }
      }
    }
    double even = 0.0, odd = 0.0;
    std::size_t n_even = 0, n_odd = 0;
    for (std::size_t s = 0; s < r.replica_utilization.size(); ++s) {
      (s % 2 == 0 ? even : odd) += r.replica_utilization[s];
      ++(s % 2 == 0 ? n_even : n_odd);
    }
    if (n_even) add("cpu_utilization", "even_mean", even / n_even, "fraction_of_allocation");
    if (n_odd) add("cpu_utilization", "odd_mean", odd / n_odd, "fraction_of_allocation");
    if (r.theta_count > r.theta_infinite) {
      add("theta_rif", "mean",
          r.theta_sum / static_cast<double>(r.theta_count - r.theta_infinite),
          "requests");
    }
    if (r.sent > 0) {
      add("probes", "per_query",
          static_cast<double>(r.probes_sent) / static_cast<double>(r.sent),
          "probes");
    }
  }
  return rows;
}

std::string summarize(const std::vector<MetricRow>& rows) {
  struct Cell {
    double sum = 0.0;
    int n = 0;
  };
  // (step, policy) -> column -> mean over runs.
  std::map<std::pair<int, std::string>, std::map<std::string, Cell>> table;
  std::map<std::pair<int, std::string>, std::string> param;
  for (const MetricRow& r : rows) {
    const auto key = std::make_pair(r.step, r.policy);
    std::string column;
    if (r.metric == "latency" && r.quantile_or_window == "p50") column = "p50_ms";
    if (r.metric == "latency" && r.quantile_or_window == "p99") column = "p99_ms";
    if (r.metric == "rif" && r.quantile_or_window == "p99") column = "rif_p99";
    if (r.metric == "errors" && r.quantile_or_window == "per_second") column = "err_s";
    if (r.metric == "parameter") {
      column = "param";
      param[key] = r.quantile_or_window;
    }
    if (column.empty()) continue;
    auto& cell = table[key][column];
    cell.sum += r.value;
    ++cell.n;
  }
  auto mean = [](const std::map<std::string, Cell>& cols, const char* c) {
    auto it = cols.find(c);
    return it == cols.end() || it->second.n == 0 ? NAN : it->second.sum / it->second.n;
  };
  std::string out = fmt::format("{:>4} {:<12} {:>10} {:>10} {:>10} {:>9} {:>9}\n",
                                "step", "policy", "param", "p50_ms", "p99_ms",
                                "rif_p99", "err/s");
  for (const auto& [key, cols] : table) {
    out += fmt::format("{:>4} {:<12} {:>10.4g} {:>10.3f} {:>10.3f} {:>9.2f} {:>9.3f}\n",
                       key.first, key.second, mean(cols, "param"),
                       mean(cols, "p50_ms"), mean(cols, "p99_ms"),
                       mean(cols, "rif_p99"), mean(cols, "err_s"));
  }
  return out;
}

}  // namespace prequal
