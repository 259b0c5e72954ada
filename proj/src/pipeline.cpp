#include "psmatch/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "psmatch/balance.hpp"
#include "psmatch/csv.hpp"
#include "psmatch/propensity.hpp"
#include "psmatch/synthlab.hpp"

namespace psmatch {

OutputFormat parse_format(const std::string& text) {
  if (text == "csv") return OutputFormat::csv;
  if (text == "json") return OutputFormat::json;
  throw std::invalid_argument("unknown format '" + text +
                              "' (expected csv or json)");
}

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

json load_json(const fs::path& path) { return json::parse(read_text(path)); }

std::string ext(OutputFormat f) { return f == OutputFormat::csv ? ".csv" : ".json"; }

json smd_json(double v) {
  return std::isinf(v) ? json("inf") : json(v);
}

double smd_from_json(const json& j) {
  return j.is_string() ? std::numeric_limits<double>::infinity()
                       : j.get<double>();
}

VariableKind parse_kind(const std::string& s) {
  if (s == "continuous") return VariableKind::continuous;
  if (s == "binary") return VariableKind::binary;
  if (s == "categorical") return VariableKind::categorical;
  throw std::runtime_error("unknown variable kind '" + s + "'");
}

// ---- artifact writers -----------------------------------------------------

json arm_to_json(const ArmSummary& a) {
  json j{{"n", a.n}, {"mean", a.mean}, {"sd", a.sd}};
  json levels = json::array();
  for (const auto& lv : a.levels)
    levels.push_back({{"count", lv.count}, {"percent", lv.percent}});
  j["levels"] = levels;
  return j;
}

ArmSummary arm_from_json(const json& j) {
  ArmSummary a;
  a.n = j.at("n").get<double>();
  a.mean = j.at("mean").get<double>();
  a.sd = j.at("sd").get<double>();
  for (const auto& lv : j.at("levels"))
    a.levels.push_back(
        {lv.at("count").get<double>(), lv.at("percent").get<double>()});
  return a;
}

void write_balance(const fs::path& path, OutputFormat format,
                   const BalanceTable& table) {
  if (format == OutputFormat::json) {
    json rows = json::array();
    for (const auto& r : table.rows) {
      json row{{"variable", r.variable},
               {"kind", to_string(r.kind)},
               {"smd_percent", smd_json(r.smd_percent)},
               {"flagged", r.flagged},
               {"control", arm_to_json(r.control)},
               {"treated", arm_to_json(r.treated)},
               {"levels", r.level_names}};
      rows.push_back(row);
    }
    write_json(path, json{{"n_control", table.n_control},
                          {"n_treated", table.n_treated},
                          {"rows", rows}});
    return;
  }

  std::string out =
      csv_line({"variable", "level", "kind", "mean_control", "sd_control",
                "mean_treated", "sd_treated", "count_control",
                "percent_control", "count_treated", "percent_treated",
                "smd_percent", "flagged"}) +
      "\n";
  auto fd = format_double;
  out += csv_line({"(sample size)", "", "", "", "", "", "",
                   fd(table.n_control), "", fd(table.n_treated), "", "", ""}) +
         "\n";
  for (const auto& r : table.rows) {
    switch (r.kind) {
      case VariableKind::continuous:
        out += csv_line({r.variable, "", "continuous", fd(r.control.mean),
                         fd(r.control.sd), fd(r.treated.mean), fd(r.treated.sd),
                         "", "", "", "", fd(r.smd_percent),
                         r.flagged ? "1" : "0"}) +
               "\n";
        break;
      case VariableKind::binary: {
        const LevelStat& c1 = r.control.levels[1];
        const LevelStat& t1 = r.treated.levels[1];
        out += csv_line({r.variable, "", "binary", fd(r.control.mean), "",
                         fd(r.treated.mean), "", fd(c1.count), fd(c1.percent),
                         fd(t1.count), fd(t1.percent), fd(r.smd_percent),
                         r.flagged ? "1" : "0"}) +
               "\n";
        break;
      }
      case VariableKind::categorical:
        out += csv_line({r.variable, "", "categorical", "", "", "", "", "", "",
                         "", "", fd(r.smd_percent), r.flagged ? "1" : "0"}) +
               "\n";
        for (std::size_t k = 0; k < r.level_names.size(); ++k) {
          const LevelStat& c = r.control.levels[k];
          const LevelStat& t = r.treated.levels[k];
          out += csv_line({r.variable, r.level_names[k], "categorical", "", "",
                           "", "", fd(c.count), fd(c.percent), fd(t.count),
                           fd(t.percent), "", ""}) +
                 "\n";
        }
        break;
    }
  }
  write_text(path, out);
}

BalanceTable read_balance(const fs::path& path, OutputFormat format) {
  BalanceTable table;
  if (format == OutputFormat::json) {
    json j = load_json(path);
    table.n_control = j.at("n_control").get<double>();
    table.n_treated = j.at("n_treated").get<double>();
    for (const auto& row : j.at("rows")) {
      BalanceRow r;
      r.variable = row.at("variable").get<std::string>();
      r.kind = parse_kind(row.at("kind").get<std::string>());
      r.smd_percent = smd_from_json(row.at("smd_percent"));
      r.flagged = row.at("flagged").get<bool>();
      r.control = arm_from_json(row.at("control"));
      r.treated = arm_from_json(row.at("treated"));
      r.level_names = row.at("levels").get<std::vector<std::string>>();
      table.rows.push_back(std::move(r));
    }
    return table;
  }

  CsvTable csv = read_csv(path.string());
  auto col = [&](const char* name) {
    int c = csv.column(name);
    if (c < 0)
      throw std::runtime_error(path.string() + ": missing column " + name);
    return static_cast<std::size_t>(c);
  };
  std::size_t c_var = col("variable"), c_level = col("level"),
              c_kind = col("kind"), c_m0 = col("mean_control"),
              c_s0 = col("sd_control"), c_m1 = col("mean_treated"),
              c_s1 = col("sd_treated"), c_n0 = col("count_control"),
              c_p0 = col("percent_control"), c_n1 = col("count_treated"),
              c_p1 = col("percent_treated"), c_smd = col("smd_percent"),
              c_flag = col("flagged");
  auto num = [&](const std::string& s) {
    return s.empty() ? 0.0 : parse_double(s, path.string());
  };
  for (const auto& row : csv.rows) {
    if (row[c_var] == "(sample size)") {
      table.n_control = num(row[c_n0]);
      table.n_treated = num(row[c_n1]);
      continue;
    }
    if (!row[c_level].empty()) {  // per-level line of the preceding row
      BalanceRow& r = table.rows.back();
      r.level_names.push_back(row[c_level]);
      r.control.levels.push_back({num(row[c_n0]), num(row[c_p0])});
      r.treated.levels.push_back({num(row[c_n1]), num(row[c_p1])});
      continue;
    }
    BalanceRow r;
    r.variable = row[c_var];
    r.kind = parse_kind(row[c_kind]);
    r.smd_percent = num(row[c_smd]);
    r.flagged = row[c_flag] == "1";
    r.control.n = table.n_control;
    r.treated.n = table.n_treated;
    r.control.mean = num(row[c_m0]);
    r.control.sd = num(row[c_s0]);
    r.treated.mean = num(row[c_m1]);
    r.treated.sd = num(row[c_s1]);
    if (r.kind == VariableKind::binary) {
      r.level_names = {"0", "1"};
      r.control.levels = {{table.n_control - num(row[c_n0]), 0.0},
                          {num(row[c_n0]), num(row[c_p0])}};
      r.treated.levels = {{table.n_treated - num(row[c_n1]), 0.0},
                          {num(row[c_n1]), num(row[c_p1])}};
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

void write_coefficients(const fs::path& path, OutputFormat format,
                        const PropensityModel& model,
                        const std::vector<CoefficientStat>& stats) {
  if (format == OutputFormat::json) {
    json terms = json::array();
    for (const auto& s : stats)
      terms.push_back({{"term", s.term},
                       {"estimate", s.estimate},
                       {"std_error", s.std_error},
                       {"p_value", s.p_value}});
    write_json(path, json{{"terms", terms},
                          {"deviance", model.deviance},
                          {"iterations", model.iterations},
                          {"converged", model.converged}});
    return;
  }
  std::string out = csv_line({"term", "estimate", "std_error", "p_value"}) + "\n";
  for (const auto& s : stats)
    out += csv_line({s.term, format_double(s.estimate),
                     format_double(s.std_error), format_double(s.p_value)}) +
           "\n";
  write_text(path, out);
}

std::vector<CoefficientStat> read_coefficients(const fs::path& path,
                                               OutputFormat format) {
  std::vector<CoefficientStat> stats;
  if (format == OutputFormat::json) {
    json j = load_json(path);
    for (const auto& t : j.at("terms"))
      stats.push_back({t.at("term").get<std::string>(),
                       t.at("estimate").get<double>(),
                       t.at("std_error").get<double>(),
                       t.at("p_value").get<double>()});
    return stats;
  }
  CsvTable csv = read_csv(path.string());
  for (const auto& row : csv.rows)
    stats.push_back({row[0], parse_double(row[1], "estimate"),
                     parse_double(row[2], "std_error"),
                     parse_double(row[3], "p_value")});
  return stats;
}

void write_overlap(const fs::path& path, OutputFormat format,
                   const OverlapReport& rep) {
  if (format == OutputFormat::json) {
    auto arm = [](const ArmOverlap& a) {
      return json{{"n", a.n},           {"below_lo", a.below_lo},
                  {"above_hi", a.above_hi}, {"min", a.score_min},
                  {"q25", a.q25},       {"median", a.median},
                  {"q75", a.q75},       {"max", a.score_max}};
    };
    write_json(path, json{{"lo", rep.lo},
                          {"hi", rep.hi},
                          {"poor_overlap", rep.poor_overlap},
                          {"control", arm(rep.control)},
                          {"treated", arm(rep.treated)}});
    return;
  }
  std::string out =
      csv_line({"arm", "n", "below_lo", "above_hi", "min", "q25", "median",
                "q75", "max", "lo", "hi", "poor_overlap"}) +
      "\n";
  auto line = [&](const char* name, const ArmOverlap& a) {
    return csv_line({name, std::to_string(a.n), std::to_string(a.below_lo),
                     std::to_string(a.above_hi), format_double(a.score_min),
                     format_double(a.q25), format_double(a.median),
                     format_double(a.q75), format_double(a.score_max),
                     format_double(rep.lo), format_double(rep.hi),
                     rep.poor_overlap ? "1" : "0"}) +
           "\n";
  };
  out += line("control", rep.control);
  out += line("treated", rep.treated);
  write_text(path, out);
}

std::vector<std::string> write_match(const fs::path& dir, OutputFormat format,
                                     const MatchResult& match) {
  if (format == OutputFormat::json) {
    json pairs = json::array();
    for (const auto& p : match.pairs)
      pairs.push_back({{"focal_id", p.focal_id},
                       {"match_id", p.match_id},
                       {"weight", p.weight},
                       {"distance", p.distance}});
    write_json(dir / "matches.json",
               json{{"estimand", to_string(match.estimand)},
                    {"with_replacement", match.with_replacement},
                    {"n_units", match.n_units},
                    {"n_focal", match.n_focal},
                    {"pairs", pairs},
                    {"k_counts", match.k_counts},
                    {"unmatched", match.unmatched}});
    return {"matches.json"};
  }
  std::string out = csv_line({"focal_id", "match_id", "weight"}) + "\n";
  for (const auto& p : match.pairs)
    out += csv_line({std::to_string(p.focal_id), std::to_string(p.match_id),
                     format_double(p.weight)}) +
           "\n";
  write_text(dir / "matches.csv", out);

  std::string kout = csv_line({"unit_id", "k_count"}) + "\n";
  for (std::size_t i = 0; i < match.k_counts.size(); ++i)
    kout += csv_line({std::to_string(i), format_double(match.k_counts[i])}) +
            "\n";
  write_text(dir / "k_counts.csv", kout);
  return {"matches.csv", "k_counts.csv"};
}

struct MatchDigest {
  std::size_t pairs = 0;
  std::size_t matched_focal = 0;
  std::size_t unmatched = 0;
  double max_k = 0.0;
  std::size_t reused_units = 0;  // K > 1
};

MatchDigest read_match_digest(const fs::path& dir, OutputFormat format,
                              const std::vector<std::string>& files) {
  MatchDigest d;
  if (format == OutputFormat::json) {
    json j = load_json(dir / files.at(0));
    d.pairs = j.at("pairs").size();
    d.unmatched = j.at("unmatched").size();
    std::set<std::size_t> focal;
    for (const auto& p : j.at("pairs"))
      focal.insert(p.at("focal_id").get<std::size_t>());
    d.matched_focal = focal.size();
    for (const auto& k : j.at("k_counts")) {
      double v = k.get<double>();
      d.max_k = std::max(d.max_k, v);
      if (v > 1.0) ++d.reused_units;
    }
    return d;
  }
  CsvTable pairs = read_csv((dir / files.at(0)).string());
  d.pairs = pairs.rows.size();
  std::set<std::string> focal;
  for (const auto& row : pairs.rows) focal.insert(row[0]);
  d.matched_focal = focal.size();
  CsvTable ks = read_csv((dir / files.at(1)).string());
  for (const auto& row : ks.rows) {
    double v = parse_double(row[1], "k_count");
    d.max_k = std::max(d.max_k, v);
    if (v > 1.0) ++d.reused_units;
  }
  return d;
}

std::vector<std::string> write_histograms(const fs::path& dir,
                                          OutputFormat format,
                                          const HistogramSeries& pre,
                                          const HistogramSeries& post) {
  auto write_one = [&](const fs::path& path, const HistogramSeries& h) {
    if (format == OutputFormat::json) {
      write_json(path, json{{"bin_edges", h.bin_edges},
                            {"control", h.counts_control},
                            {"treated", h.counts_treated}});
      return;
    }
    std::string out =
        csv_line({"bin_lo", "bin_hi", "count_control", "count_treated"}) + "\n";
    for (std::size_t b = 0; b + 1 < h.bin_edges.size(); ++b)
      out += csv_line({format_double(h.bin_edges[b]),
                       format_double(h.bin_edges[b + 1]),
                       format_double(h.counts_control[b]),
                       format_double(h.counts_treated[b])}) +
             "\n";
    write_text(path, out);
  };
  std::string pre_name = "histogram_pre" + ext(format);
  std::string post_name = "histogram_post" + ext(format);
  write_one(dir / pre_name, pre);
  write_one(dir / post_name, post);
  return {pre_name, post_name};
}

void write_estimate(const fs::path& path, const EffectEstimate& est) {
  json j{{"estimand", to_string(est.estimand)},
         {"tau_hat", est.tau_hat},
         {"ai_se", est.ai_se},
         {"n_focal", est.n_focal},
         {"B", est.bootstrap_replicates},
         {"seed", est.seed},
         {"dropped_replicates", est.dropped_replicates}};
  if (est.bootstrap_se) j["bootstrap_se"] = *est.bootstrap_se;
  write_json(path, j);
}

EffectEstimate read_estimate(const fs::path& path) {
  json j = load_json(path);
  EffectEstimate est;
  est.estimand = parse_estimand(j.at("estimand").get<std::string>());
  est.tau_hat = j.at("tau_hat").get<double>();
  est.ai_se = j.at("ai_se").get<double>();
  est.n_focal = j.at("n_focal").get<std::size_t>();
  est.bootstrap_replicates = j.at("B").get<std::size_t>();
  est.seed = j.at("seed").get<std::uint64_t>();
  est.dropped_replicates = j.at("dropped_replicates").get<std::size_t>();
  if (j.contains("bootstrap_se"))
    est.bootstrap_se = j.at("bootstrap_se").get<double>();
  return est;
}

// ---- text rendering ---------------------------------------------------------

std::string fmt(double v, int decimals = 2) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string fmt_count(double v) {
  if (std::abs(v - std::round(v)) < 1e-9)
    return std::to_string(static_cast<long long>(std::llround(v)));
  return fmt(v, 1);
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string render_balance_text(const BalanceTable& table) {
  constexpr std::size_t label_w = 40, col_w = 18;
  std::ostringstream out;
  out << pad("", label_w) << pad("control", col_w) << pad("treated", col_w)
      << "SMD%\n";
  out << pad("sample size (n)", label_w)
      << pad(fmt_count(table.n_control), col_w)
      << pad(fmt_count(table.n_treated), col_w) << "\n";
  for (const auto& r : table.rows) {
    std::string flag = r.flagged ? " *" : "";
    switch (r.kind) {
      case VariableKind::continuous:
        out << pad(r.variable + " (mean (SD))", label_w)
            << pad(fmt(r.control.mean) + " (" + fmt(r.control.sd) + ")", col_w)
            << pad(fmt(r.treated.mean) + " (" + fmt(r.treated.sd) + ")", col_w)
            << fmt(r.smd_percent) << flag << "\n";
        break;
      case VariableKind::binary: {
        const LevelStat& c = r.control.levels[1];
        const LevelStat& t = r.treated.levels[1];
        out << pad(r.variable + " (=1) (%)", label_w)
            << pad(fmt_count(c.count) + " (" + fmt(c.percent, 1) + ")", col_w)
            << pad(fmt_count(t.count) + " (" + fmt(t.percent, 1) + ")", col_w)
            << fmt(r.smd_percent) << flag << "\n";
        break;
      }
      case VariableKind::categorical:
        out << pad(r.variable + " (%)", label_w) << pad("", col_w)
            << pad("", col_w) << fmt(r.smd_percent) << flag << "\n";
        for (std::size_t k = 0; k < r.level_names.size(); ++k) {
          const LevelStat& c = r.control.levels[k];
          const LevelStat& t = r.treated.levels[k];
          out << pad("  " + r.level_names[k], label_w)
              << pad(fmt_count(c.count) + " (" + fmt(c.percent, 1) + ")", col_w)
              << pad(fmt_count(t.count) + " (" + fmt(t.percent, 1) + ")", col_w)
              << "\n";
        }
        break;
    }
  }
  return out.str();
}

std::string render_coefficients_text(const std::vector<CoefficientStat>& stats) {
  std::ostringstream out;
  out << pad("term", 28) << pad("estimate", 12) << pad("std_error", 12)
      << "p_value\n";
  for (const auto& s : stats)
    out << pad(s.term, 28) << pad(fmt(s.estimate, 4), 12)
        << pad(fmt(s.std_error, 4), 12) << fmt(s.p_value, 4) << "\n";
  return out.str();
}

// ---- manifest ---------------------------------------------------------------

constexpr const char* kAllArtifacts[] = {
    "propensity_coefficients", "overlap",    "balance_pre", "match",
    "balance_post",            "histograms", "estimate"};

const char* stage_name(PipelineStage stage) {
  switch (stage) {
    case PipelineStage::fit: return "fit";
    case PipelineStage::match: return "match";
    case PipelineStage::balance: return "balance";
    case PipelineStage::estimate: return "estimate";
  }
  return "?";
}

int stage_rank(PipelineStage stage) {
  switch (stage) {
    case PipelineStage::fit: return 0;
    case PipelineStage::match: return 1;
    case PipelineStage::balance: return 2;
    case PipelineStage::estimate: return 3;
  }
  return 0;
}

}  // namespace

PipelineOutcome run_pipeline(const RunConfig& config, PipelineStage stage) {
  PipelineOutcome outcome;
  json entries = json::array();
  auto add_entry = [&](const char* name, std::vector<std::string> files) {
    entries.push_back({{"name", name}, {"files", files}});
    outcome.artifacts.push_back(name);
  };
  const fs::path dir = config.out_dir.empty() ? fs::path(".")
                                              : fs::path(config.out_dir);
  const int rank = stage_rank(stage);

  try {
    fs::create_directories(dir);
    if (config.bootstrap == 1)
      throw std::invalid_argument("bootstrap needs at least 2 replicates");

    Schema schema = load_schema(config.schema_path);
    ObservationTable table = load_table(config.data_path, schema);

    DesignMatrix design = encode_design(table);
    for (const auto& flag : design.flags)
      outcome.warnings.push_back("design: " + flag);
    PropensityModel model = fit_logistic(design, table.z);
    if (!model.converged)
      throw std::runtime_error("propensity fit did not converge (" +
                               model.note + ")");

    std::vector<CoefficientStat> stats = wald_inference(model);
    write_coefficients(dir / ("propensity_coefficients" + ext(config.format)),
                       config.format, model, stats);
    add_entry("propensity_coefficients",
              {"propensity_coefficients" + ext(config.format)});

    OverlapReport ov = overlap_report(model.scores, table.z);
    write_overlap(dir / ("overlap" + ext(config.format)), config.format, ov);
    add_entry("overlap", {"overlap" + ext(config.format)});
    if (ov.poor_overlap)
      outcome.warnings.push_back(
          "poor overlap: more than 5% of an arm has scores outside [" +
          format_double(ov.lo) + ", " + format_double(ov.hi) + "]");

    if (rank >= stage_rank(PipelineStage::match)) {
      BalanceTable pre = balance_table(table, nullptr, model.scores);
      write_balance(dir / ("balance_pre" + ext(config.format)), config.format,
                    pre);
      add_entry("balance_pre", {"balance_pre" + ext(config.format)});

      MatchResult match = nearest_neighbor_match(model.scores, table.z,
                                                 config.match, config.estimand);
      add_entry("match", write_match(dir, config.format, match));
      if (!match.unmatched.empty())
        outcome.warnings.push_back(
            std::to_string(match.unmatched.size()) +
            " focal units had no candidate inside the caliper");

      if (rank >= stage_rank(PipelineStage::balance)) {
        BalanceTable post = balance_table(table, &match, model.scores);
        write_balance(dir / ("balance_post" + ext(config.format)),
                      config.format, post);
        add_entry("balance_post", {"balance_post" + ext(config.format)});
        for (const auto& r : post.rows)
          if (r.flagged)
            outcome.warnings.push_back(
                "residual imbalance after matching: " + r.variable + " SMD " +
                fmt(r.smd_percent) + "%");

        HistogramSeries pre_h = ps_histogram(model.scores, table.z);
        std::vector<double> post_w = expand_matched_sample(match);
        HistogramSeries post_h = ps_histogram(model.scores, table.z, post_w);
        add_entry("histograms",
                  write_histograms(dir, config.format, pre_h, post_h));

        if (rank >= stage_rank(PipelineStage::estimate)) {
          EffectEstimate est = estimate_with_scores(
              model.scores, table.y, table.z, config.match, config.estimand);
          est.seed = config.seed;
          if (config.bootstrap > 0) {
            BootstrapOptions bo;
            bo.replicates = config.bootstrap;
            bo.seed = config.seed;
            bo.workers = config.workers;
            BootstrapResult br = bootstrap_standard_error(
                table, config.match, config.estimand, bo);
            est.bootstrap_se = br.se;
            est.bootstrap_replicates = config.bootstrap;
            est.dropped_replicates = br.dropped;
          }
          write_estimate(dir / "estimate.json", est);
          add_entry("estimate", {"estimate.json"});
        }
      }
    }
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }

  if (!outcome.warnings.empty()) {
    std::string all;
    for (const auto& w : outcome.warnings) {
      all += w + "\n";
      std::cerr << "warning: " << w << "\n";
    }
    try {
      write_text(dir / "warnings.txt", all);
    } catch (const std::exception& e) {
      if (outcome.error.empty()) outcome.error = e.what();
    }
  }

  bool complete = outcome.artifacts.size() == std::size(kAllArtifacts);
  json manifest{{"command", stage_name(stage)},
                {"format", config.format == OutputFormat::csv ? "csv" : "json"},
                {"estimand", to_string(config.estimand)},
                {"data", config.data_path},
                {"schema", config.schema_path},
                {"seed", config.seed},
                {"bootstrap", config.bootstrap},
                {"complete", complete},
                {"artifacts", entries}};
  if (!outcome.error.empty()) manifest["error"] = outcome.error;
  try {
    write_json(dir / "manifest.json", manifest);
  } catch (const std::exception& e) {
    if (outcome.error.empty()) outcome.error = e.what();
  }

  if (!outcome.error.empty()) {
    std::cerr << "error: " << outcome.error << "\n";
    outcome.exit_code = 1;
  }
  return outcome;
}

void simulate_command(const std::string& name_or_path,
                      const std::string& out_dir) {
  Scenario scenario = fs::exists(name_or_path) && fs::is_regular_file(name_or_path)
                          ? load_scenario(name_or_path)
                          : find_scenario(name_or_path);
  SyntheticData data = generate(scenario);

  fs::path dir(out_dir.empty() ? "." : out_dir);
  fs::create_directories(dir);
  write_table(data.table, (dir / "table.csv").string());
  write_schema(data.table.schema, (dir / "schema.txt").string());

  std::string cf = csv_line({"unit_id", "y0", "y1", "e_true"}) + "\n";
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    const auto& u = data.units[i];
    cf += csv_line({std::to_string(i), format_double(u.y0),
                    format_double(u.y1), format_double(u.e_true)}) +
          "\n";
  }
  write_text(dir / "counterfactuals.csv", cf);

  TrueEstimands truth = true_estimands(data.units);
  write_json(dir / "truth.json", json{{"ate", truth.ate},
                                      {"att", truth.att},
                                      {"atnt", truth.atnt},
                                      {"clamped", data.clamped}});
}

std::string report_render(const std::string& artifacts_dir) {
  fs::path dir(artifacts_dir);
  if (!fs::exists(dir / "manifest.json"))
    throw std::runtime_error("no manifest.json in " + artifacts_dir);
  json manifest = load_json(dir / "manifest.json");

  std::map<std::string, std::vector<std::string>> files;
  for (const auto& entry : manifest.at("artifacts"))
    files[entry.at("name").get<std::string>()] =
        entry.at("files").get<std::vector<std::string>>();
  for (const char* name : kAllArtifacts)
    if (!files.count(name))
      throw std::runtime_error("incomplete manifest: missing artifact '" +
                               std::string(name) + "'");

  OutputFormat format = parse_format(manifest.at("format").get<std::string>());

  std::ostringstream out;
  out << "matching analysis report\n";
  out << "estimand: " << manifest.at("estimand").get<std::string>() << "\n\n";

  out << "== balance before matching ==\n";
  BalanceTable pre = read_balance(dir / files["balance_pre"].at(0), format);
  out << render_balance_text(pre);
  out << "(* marks SMD >= 10%)\n\n";

  out << "== propensity model ==\n";
  out << render_coefficients_text(
      read_coefficients(dir / files["propensity_coefficients"].at(0), format));
  out << "\n";

  out << "== match summary ==\n";
  MatchDigest digest = read_match_digest(dir, format, files["match"]);
  out << "matched focal units: " << digest.matched_focal << "\n";
  out << "pairs: " << digest.pairs << "\n";
  out << "unmatched focal units: " << digest.unmatched << "\n";
  out << "units reused as matches (K > 1): " << digest.reused_units
      << " (max K " << fmt_count(digest.max_k) << ")\n\n";

  out << "== balance after matching ==\n";
  BalanceTable post = read_balance(dir / files["balance_post"].at(0), format);
  out << render_balance_text(post);
  std::size_t flagged = 0;
  for (const auto& r : post.rows) flagged += r.flagged ? 1 : 0;
  if (flagged > 0)
    out << "warning: residual imbalance in " << flagged
        << " variable(s) with SMD >= 10%\n";
  out << "\n";

  out << "== effect estimate ==\n";
  EffectEstimate est = read_estimate(dir / files["estimate"].at(0));
  out << "estimand: " << to_string(est.estimand) << "\n";
  out << "tau_hat: " << fmt(est.tau_hat, 4) << "\n";
  out << "matching se: " << fmt(est.ai_se, 4) << " (95% CI "
      << fmt(est.tau_hat - 1.96 * est.ai_se, 4) << " .. "
      << fmt(est.tau_hat + 1.96 * est.ai_se, 4) << ")\n";
  if (est.bootstrap_se) {
    out << "bootstrap se: " << fmt(*est.bootstrap_se, 4) << " (B "
        << est.bootstrap_replicates << ", dropped " << est.dropped_replicates
        << ", seed " << est.seed << ")\n";
  }
  return out.str();
}

std::string describe_render(const ObservationTable& table) {
  BalanceTable bt = balance_table(table);
  std::ostringstream out;
  out << "descriptive statistics by treatment arm\n";
  out << render_balance_text(bt);
  out << "(* marks SMD >= 10%)\n";
  return out.str();
}

}  // namespace psmatch
