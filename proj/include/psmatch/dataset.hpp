#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace psmatch {

enum class VariableKind { continuous, binary, categorical };

std::string to_string(VariableKind kind);

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::continuous;
  std::vector<std::string> levels;  // categorical only; reference level first
};

struct Schema {
  std::string treatment;
  std::string outcome;
  std::vector<VariableSpec> covariates;
};

/// Throws when names collide, a categorical has fewer than two levels, or
/// level labels repeat.
void check_schema(const Schema& schema);

/// Reads a key=value schema file: `treatment = z`, `outcome = y`, then one
/// line per covariate in declaration order, e.g.
///   dist_defender = continuous
///   ten_minute = binary
///   position = categorical(Forward, Midfielder, Defender)
Schema load_schema(const std::string& path);
void write_schema(const Schema& schema, const std::string& path);

struct CovariateColumn {
  VariableSpec spec;
  std::vector<double> numeric;  // continuous and binary (0/1) values
  std::vector<int> level;       // categorical level indices
};

/// Validated observational data. Treated as immutable once built; row order
/// is meaningful (unit_id == row index).
struct ObservationTable {
  Schema schema;
  std::vector<int> z;
  std::vector<double> y;
  std::vector<CovariateColumn> covariates;  // schema order

  std::size_t n() const { return z.size(); }
  std::size_t arm_count(int arm) const;
};

struct Violation {
  long row = -1;  // -1 for table-level findings
  std::string column;
  std::string reason;
};

/// Invariant check; empty result means the table is valid. Violations are
/// data, not errors.
std::vector<Violation> validate_schema(const ObservationTable& table);

/// Loads and validates a comma-separated file against the schema. Throws on
/// any violation (missing column, unparseable value, treatment outside {0,1},
/// categorical value outside the declared levels, empty arm).
ObservationTable load_table(const std::string& path, const Schema& schema);

void write_table(const ObservationTable& table, const std::string& path);

/// Row subset/bootstrap helper: new table whose row i is `rows[i]` of `table`.
ObservationTable resample_rows(const ObservationTable& table,
                               std::span<const std::size_t> rows);

struct LevelStat {
  double count = 0.0;  // weighted count
  double percent = 0.0;
};

struct ArmSummary {
  double n = 0.0;  // total weight
  double mean = 0.0;
  double sd = 0.0;
  std::vector<LevelStat> levels;  // binary ({0,1}) and categorical kinds
};

struct VariableSummary {
  std::string name;
  VariableKind kind = VariableKind::continuous;
  std::vector<std::string> levels;
  ArmSummary overall, control, treated;
};

struct TableSummary {
  double n_overall = 0.0, n_control = 0.0, n_treated = 0.0;
  std::vector<VariableSummary> variables;
};

/// Per-variable weighted statistics stratified by arm and overall. Empty
/// `weights` means unit weights. SD uses denominator (sum of weights - 1), so
/// unit weights reproduce the sample SD. Throws when an arm's weight is zero.
TableSummary descriptive_summary(const ObservationTable& table,
                                 std::span<const double> weights = {});

}  // namespace psmatch
