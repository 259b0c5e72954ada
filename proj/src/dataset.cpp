#include "psmatch/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "psmatch/csv.hpp"
#include "psmatch/stats.hpp"

namespace psmatch {

std::string to_string(VariableKind kind) {
  switch (kind) {
    case VariableKind::continuous: return "continuous";
    case VariableKind::binary: return "binary";
    case VariableKind::categorical: return "categorical";
  }
  return "?";
}

void check_schema(const Schema& schema) {
  if (schema.treatment.empty() || schema.outcome.empty())
    throw std::invalid_argument("schema needs treatment and outcome names");
  if (schema.treatment == schema.outcome)
    throw std::invalid_argument("treatment and outcome must be distinct columns");
  std::set<std::string> names{schema.treatment, schema.outcome};
  for (const auto& v : schema.covariates) {
    if (!names.insert(v.name).second)
      throw std::invalid_argument("duplicate variable name in schema: " + v.name);
    if (v.kind == VariableKind::categorical) {
      if (v.levels.size() < 2)
        throw std::invalid_argument("categorical " + v.name + " needs at least 2 levels");
      std::set<std::string> ls(v.levels.begin(), v.levels.end());
      if (ls.size() != v.levels.size())
        throw std::invalid_argument("categorical " + v.name + " has duplicate levels");
    } else if (!v.levels.empty()) {
      throw std::invalid_argument(v.name + ": levels are only valid for categorical kind");
    }
  }
}

namespace {

VariableSpec parse_variable_value(const std::string& name, const std::string& value) {
  VariableSpec spec;
  spec.name = name;
  const std::string v = trim(value);
  if (v == "continuous") {
    spec.kind = VariableKind::continuous;
  } else if (v == "binary") {
    spec.kind = VariableKind::binary;
  } else if (v.rfind("categorical(", 0) == 0 && v.back() == ')') {
    spec.kind = VariableKind::categorical;
    const std::string inner = v.substr(12, v.size() - 13);
    for (const auto& part : split(inner, ',')) {
      const std::string level = trim(part);
      if (level.empty())
        throw std::runtime_error("empty level label for covariate " + name);
      spec.levels.push_back(level);
    }
  } else {
    throw std::runtime_error("unknown kind '" + v + "' for covariate " + name);
  }
  return spec;
}

}  // namespace

Schema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schema file: " + path);
  Schema schema;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key == "treatment") {
      schema.treatment = value;
    } else if (key == "outcome") {
      schema.outcome = value;
    } else {
      schema.covariates.push_back(parse_variable_value(key, value));
    }
  }
  check_schema(schema);
  return schema;
}

void write_schema(const Schema& schema, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write schema file: " + path);
  out << "treatment = " << schema.treatment << "\n";
  out << "outcome = " << schema.outcome << "\n";
  for (const auto& v : schema.covariates) {
    out << v.name << " = ";
    if (v.kind == VariableKind::categorical) {
      out << "categorical(";
      for (std::size_t i = 0; i < v.levels.size(); ++i)
        out << (i ? ", " : "") << v.levels[i];
      out << ")";
    } else {
      out << to_string(v.kind);
    }
    out << "\n";
  }
}

std::size_t ObservationTable::arm_count(int arm) const {
  return static_cast<std::size_t>(std::count(z.begin(), z.end(), arm));
}

std::vector<Violation> validate_schema(const ObservationTable& table) {
  std::vector<Violation> out;
  const std::size_t n = table.n();
  if (table.y.size() != n)
    out.push_back({-1, table.schema.outcome, "outcome length differs from treatment length"});
  if (n < 2) out.push_back({-1, "", "table needs at least 2 rows"});

  std::size_t n1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (table.z[i] != 0 && table.z[i] != 1)
      out.push_back({static_cast<long>(i), table.schema.treatment, "treatment not binary"});
    else
      n1 += static_cast<std::size_t>(table.z[i]);
  }
  if (n >= 1 && n1 == 0) out.push_back({-1, table.schema.treatment, "arm 1 empty"});
  if (n >= 1 && n1 == n) out.push_back({-1, table.schema.treatment, "arm 0 empty"});

  for (std::size_t i = 0; i < table.y.size(); ++i)
    if (!std::isfinite(table.y[i]))
      out.push_back({static_cast<long>(i), table.schema.outcome, "missing or non-finite outcome"});

  if (table.covariates.size() != table.schema.covariates.size())
    out.push_back({-1, "", "covariate column count differs from schema"});

  for (const auto& col : table.covariates) {
    const auto& spec = col.spec;
    if (spec.kind == VariableKind::categorical) {
      if (col.level.size() != n) {
        out.push_back({-1, spec.name, "column length differs from table length"});
        continue;
      }
      for (std::size_t i = 0; i < n; ++i)
        if (col.level[i] < 0 || col.level[i] >= static_cast<int>(spec.levels.size()))
          out.push_back({static_cast<long>(i), spec.name, "value outside declared levels"});
    } else {
      if (col.numeric.size() != n) {
        out.push_back({-1, spec.name, "column length differs from table length"});
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double v = col.numeric[i];
        if (!std::isfinite(v))
          out.push_back({static_cast<long>(i), spec.name, "missing or non-finite value"});
        else if (spec.kind == VariableKind::binary && v != 0.0 && v != 1.0)
          out.push_back({static_cast<long>(i), spec.name, "binary value not in {0,1}"});
      }
    }
  }
  return out;
}

ObservationTable load_table(const std::string& path, const Schema& schema) {
  check_schema(schema);
  const CsvTable csv = read_csv(path);

  auto require_column = [&](const std::string& name) {
    const int j = csv.column(name);
    if (j < 0) throw std::runtime_error(path + ": missing column '" + name + "'");
    return static_cast<std::size_t>(j);
  };

  const std::size_t zcol = require_column(schema.treatment);
  const std::size_t ycol = require_column(schema.outcome);
  std::vector<std::size_t> xcols;
  for (const auto& v : schema.covariates) xcols.push_back(require_column(v.name));

  ObservationTable table;
  table.schema = schema;
  const std::size_t n = csv.rows.size();
  table.z.reserve(n);
  table.y.reserve(n);
  for (const auto& v : schema.covariates) {
    CovariateColumn col;
    col.spec = v;
    if (v.kind == VariableKind::categorical)
      col.level.reserve(n);
    else
      col.numeric.reserve(n);
    table.covariates.push_back(std::move(col));
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = csv.rows[i];
    auto cell = [&](std::size_t j) -> const std::string& {
      if (j >= row.size())
        throw std::runtime_error(path + ": row " + std::to_string(i) + " is short");
      return row[j];
    };
    const std::string where = path + ": row " + std::to_string(i);

    const double zv = parse_double(cell(zcol), where + ", column " + schema.treatment);
    if (zv != 0.0 && zv != 1.0)
      throw std::runtime_error(where + ": treatment not binary (got '" + cell(zcol) + "')");
    table.z.push_back(static_cast<int>(zv));

    const double yv = parse_double(cell(ycol), where + ", column " + schema.outcome);
    if (!std::isfinite(yv))
      throw std::runtime_error(where + ": non-finite outcome");
    table.y.push_back(yv);

    for (std::size_t k = 0; k < schema.covariates.size(); ++k) {
      const auto& spec = schema.covariates[k];
      const std::string& raw = cell(xcols[k]);
      if (spec.kind == VariableKind::categorical) {
        const std::string value = trim(raw);
        const auto it = std::find(spec.levels.begin(), spec.levels.end(), value);
        if (it == spec.levels.end())
          throw std::runtime_error(where + ": value '" + value +
                                   "' outside declared levels of " + spec.name);
        table.covariates[k].level.push_back(
            static_cast<int>(it - spec.levels.begin()));
      } else {
        const double v = parse_double(raw, where + ", column " + spec.name);
        if (!std::isfinite(v))
          throw std::runtime_error(where + ": non-finite value in " + spec.name);
        if (spec.kind == VariableKind::binary && v != 0.0 && v != 1.0)
          throw std::runtime_error(where + ": binary value not in {0,1} in " + spec.name);
        table.covariates[k].numeric.push_back(v);
      }
    }
  }

  const auto violations = validate_schema(table);
  if (!violations.empty()) {
    std::string msg = path + ": invalid table:";
    for (const auto& v : violations) {
      msg += "\n  ";
      if (v.row >= 0) msg += "row " + std::to_string(v.row) + " ";
      if (!v.column.empty()) msg += "[" + v.column + "] ";
      msg += v.reason;
    }
    throw std::runtime_error(msg);
  }
  return table;
}

void write_table(const ObservationTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  std::vector<std::string> header{table.schema.treatment, table.schema.outcome};
  for (const auto& v : table.schema.covariates) header.push_back(v.name);
  out << csv_line(header);
  for (std::size_t i = 0; i < table.n(); ++i) {
    std::vector<std::string> row;
    row.push_back(std::to_string(table.z[i]));
    row.push_back(format_double(table.y[i]));
    for (const auto& col : table.covariates) {
      if (col.spec.kind == VariableKind::categorical)
        row.push_back(col.spec.levels[static_cast<std::size_t>(col.level[i])]);
      else
        row.push_back(format_double(col.numeric[i]));
    }
    out << csv_line(row);
  }
}

ObservationTable resample_rows(const ObservationTable& table,
                               std::span<const std::size_t> rows) {
  ObservationTable out;
  out.schema = table.schema;
  out.z.reserve(rows.size());
  out.y.reserve(rows.size());
  for (const auto& col : table.covariates) {
    CovariateColumn c;
    c.spec = col.spec;
    out.covariates.push_back(std::move(c));
  }
  for (std::size_t i : rows) {
    if (i >= table.n()) throw std::out_of_range("resample_rows: row index out of range");
    out.z.push_back(table.z[i]);
    out.y.push_back(table.y[i]);
    for (std::size_t k = 0; k < table.covariates.size(); ++k) {
      const auto& src = table.covariates[k];
      if (src.spec.kind == VariableKind::categorical)
        out.covariates[k].level.push_back(src.level[i]);
      else
        out.covariates[k].numeric.push_back(src.numeric[i]);
    }
  }
  return out;
}

namespace {

ArmSummary summarize_one(const CovariateColumn& col,
                         std::span<const double> weights,
                         std::span<const std::size_t> select) {
  ArmSummary s;
  for (std::size_t i : select) s.n += weights[i];
  const auto& spec = col.spec;
  if (spec.kind == VariableKind::continuous) {
    const auto m = weighted_moments(col.numeric, weights, select);
    s.mean = m.mean;
    s.sd = m.sd;
    return s;
  }
  const std::size_t n_levels =
      spec.kind == VariableKind::binary ? 2 : spec.levels.size();
  s.levels.assign(n_levels, LevelStat{});
  for (std::size_t i : select) {
    const std::size_t k = spec.kind == VariableKind::binary
                              ? static_cast<std::size_t>(col.numeric[i])
                              : static_cast<std::size_t>(col.level[i]);
    s.levels[k].count += weights[i];
  }
  for (auto& ls : s.levels) ls.percent = s.n > 0 ? 100.0 * ls.count / s.n : 0.0;
  if (spec.kind == VariableKind::binary && s.n > 0)
    s.mean = s.levels[1].count / s.n;  // proportion of ones
  return s;
}

}  // namespace

TableSummary descriptive_summary(const ObservationTable& table,
                                 std::span<const double> weights) {
  const std::size_t n = table.n();
  std::vector<double> unit;
  if (weights.empty()) {
    unit.assign(n, 1.0);
    weights = unit;
  }
  if (weights.size() != n)
    throw std::invalid_argument("weights length differs from table length");
  for (double w : weights)
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be nonnegative");

  std::vector<std::size_t> all, arm0, arm1;
  for (std::size_t i = 0; i < n; ++i) {
    all.push_back(i);
    (table.z[i] == 1 ? arm1 : arm0).push_back(i);
  }
  auto arm_weight = [&](const std::vector<std::size_t>& sel) {
    double t = 0;
    for (std::size_t i : sel) t += weights[i];
    return t;
  };

  TableSummary out;
  out.n_overall = arm_weight(all);
  out.n_control = arm_weight(arm0);
  out.n_treated = arm_weight(arm1);
  if (out.n_control <= 0.0 || out.n_treated <= 0.0)
    throw std::runtime_error("degenerate arm: total weight is zero");

  for (const auto& col : table.covariates) {
    VariableSummary vs;
    vs.name = col.spec.name;
    vs.kind = col.spec.kind;
    if (col.spec.kind == VariableKind::binary)
      vs.levels = {"0", "1"};
    else
      vs.levels = col.spec.levels;
    vs.overall = summarize_one(col, weights, all);
    vs.control = summarize_one(col, weights, arm0);
    vs.treated = summarize_one(col, weights, arm1);
    out.variables.push_back(std::move(vs));
  }
  return out;
}

}  // namespace psmatch
