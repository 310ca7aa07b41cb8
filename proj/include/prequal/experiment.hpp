#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prequal/metrics.hpp"
#include "prequal/sim_engine.hpp"
#include "prequal/workload.hpp"

namespace prequal {

// Continuous: the whole schedule is one run and state carries across steps.
// Isolated: every phase is its own run from the same seed, so all steps see
// the same antagonist trajectory and arrival streams.
enum class StepMode { kContinuous, kIsolated };

struct ExperimentConfig {
  Experiment experiment = Experiment::kSelectionRules;
  std::uint64_t seed = 1;
  int repetitions = 1;
  Duration step_duration = std::chrono::seconds(120);
  StepMode step_mode = StepMode::kIsolated;
  // Replaces the policy of every phase, or for selection_rules keeps only
  // the phases of this policy.
  std::optional<Policy> policy;
  // Restricts the schedule to these step indices (empty: all steps).
  std::vector<int> steps;
  // Everything except phases, seed and run index.
  RunSpec base;
};

// Calibrated testbed: the simulator defaults plus the antagonist, isolation
// and Linear settings used by the experiments.
RunSpec testbed_defaults();

// Defaults for `experiment` before any overrides.
ExperimentConfig default_config(Experiment experiment);

// Parses a config document. Unknown keys and bad values throw ConfigError
// naming the key. The experiment may come from `experiment_override`.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              std::optional<Experiment> experiment_override = {});

// Every field, including defaults, in the same layout parse_config reads.
nlohmann::json to_json(const ExperimentConfig& cfg);

struct PlannedRun {
  std::string run_id;
  RunSpec spec;
};

std::vector<PlannedRun> plan_runs(const ExperimentConfig& cfg);

struct RunOutput {
  std::string run_id;
  RunResult result;
};

// Runs the plan on up to `parallel` threads; output order follows the plan.
std::vector<RunOutput> execute(const std::vector<PlannedRun>& plan,
                               int parallel);

std::vector<MetricRow> metric_rows(const std::string& run_id,
                                   const RunResult& result);

// Per step and policy: p50/p99 latency, p99 RIF and error rate, averaged
// over runs, computed from CSV rows.
std::string summarize(const std::vector<MetricRow>& rows);

}  // namespace prequal
