// Command-line experiment runner.
//
//   prequal_sim run --experiment load_ramp --seed 7 --out results/
//   prequal_sim run --config my.json --parallel 4
//   prequal_sim config --experiment probe_rate   (print resolved defaults)
//
// Exit status: 0 success, 2 configuration error, 3 invariant violation,
// 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "prequal/experiment.hpp"

namespace {

using prequal::ConfigError;
using prequal::ExperimentConfig;
using nlohmann::json;

struct Options {
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "results";
  int parallel = 1;
  std::string policy;
  std::optional<int> repetitions;
};

ExperimentConfig resolve(const Options& opt) {
  json doc = json::object();
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("config: cannot open " + opt.config_path);
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  if (!opt.experiment.empty()) doc["experiment"] = opt.experiment;
  if (opt.seed) doc["seed"] = *opt.seed;
  if (!opt.policy.empty()) doc["policy"] = opt.policy;
  if (opt.repetitions) doc["repetitions"] = *opt.repetitions;
  return prequal::parse_config(doc);
}

int run(const Options& opt) {
  const ExperimentConfig cfg = resolve(opt);
  if (opt.parallel < 1) throw ConfigError("parallel: must be >= 1");
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);
  const std::string name(prequal::experiment_name(cfg.experiment));

  std::ofstream(fs::path(opt.out_dir) / "resolved_config.json")
      << prequal::to_json(cfg).dump(2) << "\n";

  const auto plan = prequal::plan_runs(cfg);
  std::cerr << fmt::format("{}: {} run(s), {} thread(s)\n", name, plan.size(),
                           opt.parallel);
  const auto outputs = prequal::execute(plan, opt.parallel);

  std::vector<prequal::MetricRow> rows;
  for (const auto& o : outputs) {
    for (auto& r : prequal::metric_rows(o.run_id, o.result)) rows.push_back(r);
  }
  const fs::path csv = fs::path(opt.out_dir) / (name + ".csv");
  std::ofstream out(csv);
  out << prequal::csv_header() << "\n";
  for (const auto& r : rows) out << prequal::to_csv_line(r) << "\n";
  out.close();
  if (!out) throw std::runtime_error("failed writing " + csv.string());

  // Summarize what was written, so the table is recomputable from the file.
  std::ifstream back(csv);
  std::string line;
  std::getline(back, line);
  std::vector<prequal::MetricRow> reread;
  while (std::getline(back, line)) reread.push_back(prequal::parse_csv_line(line));
  std::cout << prequal::summarize(reread);
  std::cerr << "wrote " << csv.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prequal load-balancing testbed simulator"};
  app.require_subcommand(1);
  Options opt;

  auto* run_cmd = app.add_subcommand("run", "run an experiment");
  run_cmd->add_option("--experiment", opt.experiment,
                      "load_ramp | selection_rules | probe_rate | "
                      "rif_quantile | linear_sweep");
  run_cmd->add_option("--config", opt.config_path, "JSON config file");
  run_cmd->add_option("--seed", opt.seed, "master seed");
  run_cmd->add_option("--out", opt.out_dir, "output directory")
      ->capture_default_str();
  run_cmd->add_option("--parallel", opt.parallel, "concurrent runs")
      ->capture_default_str();
  run_cmd->add_option("--policy", opt.policy, "policy filter or override");
  run_cmd->add_option("--repetitions", opt.repetitions, "runs per step");

  auto* config_cmd =
      app.add_subcommand("config", "print the resolved configuration");
  config_cmd->add_option("--experiment", opt.experiment, "experiment name");
  config_cmd->add_option("--config", opt.config_path, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*config_cmd) {
      std::cout << prequal::to_json(resolve(opt)).dump(2) << "\n";
      return 0;
    }
    return run(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const prequal::InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
