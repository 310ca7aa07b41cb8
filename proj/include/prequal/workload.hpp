#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prequal/random.hpp"
#include "prequal/selection.hpp"
#include "prequal/types.hpp"

namespace prequal {

enum class ArrivalProcess { kPoisson, kDeterministic };

struct WorkloadConfig {
  int n_clients = 100;
  int n_servers = 100;
  double aggregate_qps = 1000.0;
  // Core-seconds per query before truncation; sd defaults to the mean.
  double work_mean = 1e-3;
  std::optional<double> work_sd;
  bool slow_even_replicas = false;
  ArrivalProcess arrivals = ArrivalProcess::kPoisson;

  double sd() const { return work_sd.value_or(work_mean); }
  void validate() const;
};

// Normal(mean, sd) redrawn until positive.
double draw_base_work(const WorkloadConfig& cfg, Rng& rng);
// Doubles `base_work` on even replicas when slow_even_replicas is set.
double inflate_for_replica(const WorkloadConfig& cfg, double base_work,
                           ReplicaId target);
double draw_query_work(const WorkloadConfig& cfg, Rng& rng, ReplicaId target);

// E[X | X > 0] for X ~ Normal(mean, sd).
double truncated_normal_mean(double mean, double sd);

// Mean work per query assuming queries spread evenly over replicas.
double expected_query_work(const WorkloadConfig& cfg);

enum class Experiment {
  kLoadRamp,
  kSelectionRules,
  kProbeRate,
  kRifQuantile,
  kLinearSweep,
};

std::string_view experiment_name(Experiment e);
// Throws ConfigError for unknown names.
Experiment parse_experiment(std::string_view name);

// One contiguous stretch of a run under a single policy and parameter set.
struct Phase {
  int step = 0;
  Policy policy = Policy::kPrequal;
  Duration duration{};
  // Target aggregate CPU demand as a multiple of the total allocation.
  double load = 1.0;
  std::optional<double> r_probe;
  std::optional<double> r_remove;
  std::optional<double> q_rif;
  std::optional<double> linear_lambda;
  bool slow_even_replicas = false;
  // The swept quantity for this step, for reporting.
  std::string parameter;
  double parameter_value = 0.0;
};

struct ScheduleOptions {
  Duration step_duration = std::chrono::seconds(120);
};

std::vector<Phase> build_schedule(Experiment experiment,
                                  const ScheduleOptions& options = {});

// Step values, in schedule order.
std::vector<double> load_ramp_levels();
std::vector<double> probe_rate_levels();
std::vector<double> rif_quantile_levels();
std::vector<double> linear_lambda_levels();
std::vector<double> selection_rule_loads();

// qps that makes the expected CPU demand equal `load` times the total
// allocation.
double qps_for_load(double load, int n_servers, double allocation,
                    const WorkloadConfig& cfg);

}  // namespace prequal
