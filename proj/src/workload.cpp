#include "prequal/workload.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace prequal {

namespace {

constexpr std::array<std::string_view, 5> kExperimentNames = {
    "load_ramp", "selection_rules", "probe_rate", "rif_quantile",
    "linear_sweep"};

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

void WorkloadConfig::validate() const {
  if (n_clients < 1) throw ConfigError("n_clients must be >= 1");
  if (n_servers < 1) throw ConfigError("n_servers must be >= 1");
  if (!(aggregate_qps > 0)) throw ConfigError("aggregate_qps must be > 0");
  if (!(work_mean > 0)) throw ConfigError("work_mean must be > 0");
  if (work_sd && !(*work_sd >= 0)) throw ConfigError("work_sd must be >= 0");
}

double draw_base_work(const WorkloadConfig& cfg, Rng& rng) {
  std::normal_distribution<double> normal(cfg.work_mean, cfg.sd());
  double work = normal(rng);
  while (work <= 0.0) work = normal(rng);
  return work;
}

double inflate_for_replica(const WorkloadConfig& cfg, double base_work,
                           ReplicaId target) {
  if (cfg.slow_even_replicas && index_of(target) % 2 == 0) {
    return 2.0 * base_work;
  }
  return base_work;
}

double draw_query_work(const WorkloadConfig& cfg, Rng& rng, ReplicaId target) {
  return inflate_for_replica(cfg, draw_base_work(cfg, rng), target);
}

double truncated_normal_mean(double mean, double sd) {
  if (sd <= 0.0) return mean;
  const double z = mean / sd;
  return mean + sd * normal_pdf(z) / normal_cdf(z);
}

double expected_query_work(const WorkloadConfig& cfg) {
  const double base = truncated_normal_mean(cfg.work_mean, cfg.sd());
  if (!cfg.slow_even_replicas) return base;
  const double evens = std::ceil(cfg.n_servers / 2.0);
  return base * (1.0 + evens / cfg.n_servers);
}

std::string_view experiment_name(Experiment e) {
  return kExperimentNames[static_cast<std::size_t>(e)];
}

Experiment parse_experiment(std::string_view name) {
  for (std::size_t i = 0; i < kExperimentNames.size(); ++i) {
    if (kExperimentNames[i] == name) return static_cast<Experiment>(i);
  }
  throw ConfigError("experiment: unknown name '" + std::string(name) +
                    "' (expected load_ramp, selection_rules, probe_rate, "
                    "rif_quantile or linear_sweep)");
}

std::vector<double> load_ramp_levels() {
  std::vector<double> levels;
  for (int i = 0; i < 9; ++i) levels.push_back(0.75 * std::pow(10.0 / 9.0, i));
  return levels;
}

std::vector<double> probe_rate_levels() {
  std::vector<double> rates;
  for (int i = 0; i < 7; ++i) rates.push_back(4.0 * std::pow(std::sqrt(0.5), i));
  return rates;
}

std::vector<double> rif_quantile_levels() {
  std::vector<double> q{0.0};
  for (int k = 10; k >= 1; --k) q.push_back(std::pow(0.9, k));
  q.insert(q.end(), {0.99, 0.999, 1.0});
  return q;
}

std::vector<double> linear_lambda_levels() {
  return {.769, .785, .801, .817, .834, .868, .886,
          .904, .922, .941, .960, .980, 1.0};
}

std::vector<double> selection_rule_loads() { return {0.70, 0.90}; }

std::vector<Phase> build_schedule(Experiment experiment,
                                  const ScheduleOptions& options) {
  const Duration step = options.step_duration;
  std::vector<Phase> phases;
  switch (experiment) {
    case Experiment::kLoadRamp: {
      const auto levels = load_ramp_levels();
      for (std::size_t i = 0; i < levels.size(); ++i) {
        for (Policy p : {Policy::kWrr, Policy::kPrequal}) {
          Phase phase;
          phase.step = static_cast<int>(i);
          phase.policy = p;
          phase.duration = step / 2;
          phase.load = levels[i];
          phase.parameter = "load";
          phase.parameter_value = levels[i];
          phases.push_back(phase);
        }
      }
      break;
    }
    case Experiment::kSelectionRules: {
      const auto loads = selection_rule_loads();
      for (std::size_t i = 0; i < loads.size(); ++i) {
        for (Policy p : kAllPolicies) {
          Phase phase;
          phase.step = static_cast<int>(i);
          phase.policy = p;
          phase.duration = step;
          phase.load = loads[i];
          if (p == Policy::kPrequal) phase.q_rif = 0.75;
          phase.parameter = "load";
          phase.parameter_value = loads[i];
          phases.push_back(phase);
        }
      }
      break;
    }
    case Experiment::kProbeRate: {
      const auto rates = probe_rate_levels();
      for (std::size_t i = 0; i < rates.size(); ++i) {
        Phase phase;
        phase.step = static_cast<int>(i);
        phase.duration = step;
        phase.load = 1.5;
        phase.r_probe = rates[i];
        phase.r_remove = 0.25;
        phase.parameter = "r_probe";
        phase.parameter_value = rates[i];
        phases.push_back(phase);
      }
      break;
    }
    case Experiment::kRifQuantile: {
      const auto qs = rif_quantile_levels();
      for (std::size_t i = 0; i < qs.size(); ++i) {
        Phase phase;
        phase.step = static_cast<int>(i);
        phase.duration = step;
        phase.load = 0.75;
        phase.q_rif = qs[i];
        phase.slow_even_replicas = true;
        phase.parameter = "q_rif";
        phase.parameter_value = qs[i];
        phases.push_back(phase);
      }
      break;
    }
    case Experiment::kLinearSweep: {
      const auto lambdas = linear_lambda_levels();
      for (std::size_t i = 0; i < lambdas.size(); ++i) {
        Phase phase;
        phase.step = static_cast<int>(i);
        phase.policy = Policy::kLinear;
        phase.duration = step;
        phase.load = 0.94;
        phase.linear_lambda = lambdas[i];
        phase.slow_even_replicas = true;
        phase.parameter = "lambda";
        phase.parameter_value = lambdas[i];
        phases.push_back(phase);
      }
      break;
    }
  }
  return phases;
}

double qps_for_load(double load, int n_servers, double allocation,
                    const WorkloadConfig& cfg) {
  return load * n_servers * allocation / expected_query_work(cfg);
}

}  // namespace prequal
