#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psmatch/dataset.hpp"
#include "psmatch/effects.hpp"
#include "psmatch/matching.hpp"

namespace psmatch {

enum class OutputFormat { csv, json };

OutputFormat parse_format(const std::string& text);

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnvVar = "PSMATCH_OUT";

struct RunConfig {
  std::string data_path;
  std::string schema_path;
  Estimand estimand = Estimand::ate;
  MatchSpec match;
  std::size_t bootstrap = 0;  // replicates; 0 = skip the bootstrap
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0 = hardware concurrency
  std::string out_dir;
  OutputFormat format = OutputFormat::csv;
};

/// How far the pipeline runs: each stage writes a prefix of the full
/// artifact list (fit: coefficients + overlap; match: + pre-match balance +
/// match result; balance: + post-match balance + histograms; estimate: all
/// seven).
enum class PipelineStage { fit, match, balance, estimate };

struct PipelineOutcome {
  int exit_code = 0;
  std::vector<std::string> artifacts;  // completed artifact names, in order
  std::vector<std::string> warnings;
  std::string error;  // empty on success
};

/// Runs the pipeline, writing artifacts into config.out_dir followed by a
/// manifest of what completed. Warnings (poor overlap, residual imbalance)
/// go to warnings.txt and the outcome, never the exit code.
PipelineOutcome run_pipeline(const RunConfig& config,
                             PipelineStage stage = PipelineStage::estimate);

/// Writes the generated table, its schema, the counterfactual sidecar and a
/// truth JSON for a suite scenario name or a scenario file path.
void simulate_command(const std::string& name_or_path,
                      const std::string& out_dir);

/// Renders a finished run directory (complete manifest required) as one
/// plain-text report: pre-match balance, model coefficients, match summary,
/// post-match balance, estimate.
std::string report_render(const std::string& artifacts_dir);

/// Text table of per-arm descriptive statistics and imbalance for raw data.
std::string describe_render(const ObservationTable& table);

}  // namespace psmatch
