#include <cmath>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "psmatch/dataset.hpp"
#include "psmatch/pipeline.hpp"

namespace {

struct CliState {
  psmatch::RunConfig cfg;
  std::string estimand = "ate";
  std::string format = "csv";
  double caliper = 0.0;
  bool no_replacement = false;
  bool no_ties = false;
  CLI::Option* caliper_opt = nullptr;
};

void add_pipeline_options(CLI::App* cmd, CliState& st, bool with_estimation) {
  cmd->add_option("--data", st.cfg.data_path, "input table (CSV)")->required();
  cmd->add_option("--schema", st.cfg.schema_path, "variable schema file")
      ->required();
  cmd->add_option("--estimand", st.estimand, "target estimand")
      ->check(CLI::IsMember({"ate", "att", "atnt"}))
      ->capture_default_str();
  cmd->add_flag("--no-replacement", st.no_replacement,
                "greedy matching without replacement");
  cmd->add_flag("--no-ties", st.no_ties,
                "single nearest neighbor instead of weighted ties");
  cmd->add_option("--tie-tol", st.cfg.match.tie_tolerance,
                  "absolute tolerance for tied score distances")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  st.caliper_opt = cmd->add_option("--caliper", st.caliper,
                                   "maximum score distance for a match")
                       ->check(CLI::PositiveNumber);
  cmd->add_option("--out", st.cfg.out_dir, "output directory")
      ->envname(psmatch::kOutDirEnvVar);
  cmd->add_option("--format", st.format, "artifact format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  if (with_estimation) {
    cmd->add_option("--bootstrap", st.cfg.bootstrap,
                    "bootstrap replicate count (0 = off)");
    cmd->add_option("--seed", st.cfg.seed, "random seed for the bootstrap")
        ->capture_default_str();
    cmd->add_option("--workers", st.cfg.workers,
                    "bootstrap worker threads (0 = hardware)");
  }
}

int run_stage(CliState& st, psmatch::PipelineStage stage) {
  st.cfg.estimand = psmatch::parse_estimand(st.estimand);
  st.cfg.format = psmatch::parse_format(st.format);
  st.cfg.match.with_replacement = !st.no_replacement;
  st.cfg.match.allow_ties = !st.no_ties;
  if (st.caliper_opt->count() > 0) st.cfg.match.caliper = st.caliper;
  return psmatch::run_pipeline(st.cfg, stage).exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"propensity-score matching for causal effect estimation"};
  app.require_subcommand(1);

  CliState fit_st, match_st, balance_st, estimate_st;
  CLI::App* fit = app.add_subcommand(
      "fit", "fit the propensity model and report score overlap");
  add_pipeline_options(fit, fit_st, false);
  CLI::App* match = app.add_subcommand(
      "match", "fit, then build the nearest-neighbor match");
  add_pipeline_options(match, match_st, false);
  CLI::App* balance = app.add_subcommand(
      "balance", "fit, match, and write balance tables and histograms");
  add_pipeline_options(balance, balance_st, false);
  CLI::App* estimate = app.add_subcommand(
      "estimate", "full pipeline through the effect estimate");
  add_pipeline_options(estimate, estimate_st, true);

  std::string desc_data, desc_schema;
  CLI::App* describe =
      app.add_subcommand("describe", "per-arm descriptive statistics");
  describe->add_option("--data", desc_data, "input table (CSV)")->required();
  describe->add_option("--schema", desc_schema, "variable schema file")
      ->required();

  std::string scenario, sim_out;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "generate a synthetic dataset with known truths");
  simulate->add_option("--scenario", scenario,
                       "suite scenario name or scenario file path")
      ->required();
  simulate->add_option("--out", sim_out, "output directory")
      ->envname(psmatch::kOutDirEnvVar);

  std::string report_dir;
  CLI::App* report = app.add_subcommand(
      "report", "render a finished run directory as a text report");
  report->add_option("--dir", report_dir, "artifacts directory")
      ->envname(psmatch::kOutDirEnvVar);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return run_stage(fit_st, psmatch::PipelineStage::fit);
    if (match->parsed())
      return run_stage(match_st, psmatch::PipelineStage::match);
    if (balance->parsed())
      return run_stage(balance_st, psmatch::PipelineStage::balance);
    if (estimate->parsed())
      return run_stage(estimate_st, psmatch::PipelineStage::estimate);
    if (describe->parsed()) {
      psmatch::Schema schema = psmatch::load_schema(desc_schema);
      psmatch::ObservationTable table = psmatch::load_table(desc_data, schema);
      std::cout << psmatch::describe_render(table);
      return 0;
    }
    if (simulate->parsed()) {
      psmatch::simulate_command(scenario, sim_out);
      return 0;
    }
    if (report->parsed()) {
      std::cout << psmatch::report_render(report_dir.empty() ? "." : report_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
