#include "psmatch/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "psmatch/csv.hpp"
#include "psmatch/rng.hpp"

namespace psmatch {
namespace {

std::size_t design_width(const Scenario& s) {
  std::size_t w = 1;
  for (const auto& g : s.covariates)
    w += g.kind == VariableKind::categorical ? g.labels.size() - 1 : 1;
  return w;
}

double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  double e = std::exp(eta);
  return e / (1.0 + e);
}

}  // namespace

void check_scenario(const Scenario& scenario) {
  if (scenario.n < 2) throw std::invalid_argument("scenario needs n >= 2");
  if (scenario.covariates.empty())
    throw std::invalid_argument("scenario needs at least one covariate");
  std::set<std::string> names;
  for (const auto& g : scenario.covariates) {
    if (g.name.empty() || !names.insert(g.name).second)
      throw std::invalid_argument("covariate names must be distinct and non-empty");
    switch (g.kind) {
      case VariableKind::continuous:
        if (!(g.sigma >= 0) || !std::isfinite(g.mu) || !std::isfinite(g.sigma))
          throw std::invalid_argument(g.name + ": invalid normal parameters");
        break;
      case VariableKind::binary:
        if (!(g.p >= 0 && g.p <= 1))
          throw std::invalid_argument(g.name + ": bernoulli p outside [0, 1]");
        break;
      case VariableKind::categorical: {
        if (g.labels.size() < 2 || g.labels.size() != g.probs.size())
          throw std::invalid_argument(g.name +
                                      ": categorical needs matching labels and "
                                      "probabilities (at least two)");
        double total = 0.0;
        for (double p : g.probs) {
          if (!(p >= 0 && p <= 1))
            throw std::invalid_argument(g.name + ": probability outside [0, 1]");
          total += p;
        }
        if (std::abs(total - 1.0) > 1e-9)
          throw std::invalid_argument(g.name + ": probabilities must sum to 1");
        std::set<std::string> ls(g.labels.begin(), g.labels.end());
        if (ls.size() != g.labels.size())
          throw std::invalid_argument(g.name + ": duplicate level labels");
        break;
      }
    }
  }
  const std::size_t w = design_width(scenario);
  if (scenario.ps_coefficients.size() != w)
    throw std::invalid_argument("ps_coefficients must have " +
                                std::to_string(w) + " entries (got " +
                                std::to_string(scenario.ps_coefficients.size()) +
                                ")");
  if (scenario.outcome_baseline.size() != w)
    throw std::invalid_argument("outcome_baseline must have " +
                                std::to_string(w) + " entries (got " +
                                std::to_string(scenario.outcome_baseline.size()) +
                                ")");
  if (scenario.noise == NoiseKind::gaussian && !(scenario.noise_sigma >= 0))
    throw std::invalid_argument("gaussian noise needs sigma >= 0");
  if (!std::isfinite(scenario.tau0) || !std::isfinite(scenario.tau1))
    throw std::invalid_argument("tau0/tau1 must be finite");
}

SyntheticData generate(const Scenario& scenario) {
  check_scenario(scenario);
  const std::size_t n = scenario.n;
  const std::size_t w = design_width(scenario);

  SyntheticData data;
  data.table.schema.treatment = "z";
  data.table.schema.outcome = "y";
  for (const auto& g : scenario.covariates) {
    VariableSpec spec;
    spec.name = g.name;
    spec.kind = g.kind;
    spec.levels = g.labels;
    data.table.schema.covariates.push_back(spec);

    CovariateColumn col;
    col.spec = spec;
    if (g.kind == VariableKind::categorical)
      col.level.reserve(n);
    else
      col.numeric.reserve(n);
    data.table.covariates.push_back(std::move(col));
  }
  data.table.z.reserve(n);
  data.table.y.reserve(n);
  data.units.reserve(n);

  Rng rng(scenario.seed);
  std::vector<double> x(w);

  // Fixed per-unit draw order (covariates, assignment, noise) keeps the
  // stream reproducible no matter how results are consumed.
  for (std::size_t i = 0; i < n; ++i) {
    x.assign(w, 0.0);
    x[0] = 1.0;
    std::size_t j = 1;
    for (std::size_t c = 0; c < scenario.covariates.size(); ++c) {
      const auto& g = scenario.covariates[c];
      auto& col = data.table.covariates[c];
      switch (g.kind) {
        case VariableKind::continuous: {
          double v = rng.normal(g.mu, g.sigma);
          col.numeric.push_back(v);
          x[j++] = v;
          break;
        }
        case VariableKind::binary: {
          double v = rng.bernoulli(g.p);
          col.numeric.push_back(v);
          x[j++] = v;
          break;
        }
        case VariableKind::categorical: {
          int lvl = rng.categorical(g.probs);
          col.level.push_back(lvl);
          for (std::size_t k = 1; k < g.labels.size(); ++k, ++j)
            x[j] = static_cast<int>(k) == lvl ? 1.0 : 0.0;
          break;
        }
      }
    }

    double eta = 0.0, base = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
      eta += scenario.ps_coefficients[k] * x[k];
      base += scenario.outcome_baseline[k] * x[k];
    }
    SyntheticUnit u;
    u.e_true = logistic(eta);
    u.z = rng.bernoulli(u.e_true);
    double tau = scenario.tau0 + scenario.tau1 * u.e_true;

    if (scenario.noise == NoiseKind::gaussian) {
      double eps = rng.normal(0.0, scenario.noise_sigma);
      u.y0 = base + eps;
      u.y1 = base + tau + eps;
    } else {
      double p0 = base, p1 = base + tau;
      if (p0 < 0 || p0 > 1) {
        p0 = std::clamp(p0, 0.0, 1.0);
        ++data.clamped;
      }
      if (p1 < 0 || p1 > 1) {
        p1 = std::clamp(p1, 0.0, 1.0);
        ++data.clamped;
      }
      u.y0 = rng.bernoulli(p0);
      u.y1 = rng.bernoulli(p1);
    }
    u.y = u.z ? u.y1 : u.y0;

    data.table.z.push_back(u.z);
    data.table.y.push_back(u.y);
    data.units.push_back(u);
  }
  return data;
}

TrueEstimands true_estimands(std::span<const SyntheticUnit> units) {
  double sum = 0.0, sum1 = 0.0, sum0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (const auto& u : units) {
    double d = u.y1 - u.y0;
    sum += d;
    if (u.z) {
      sum1 += d;
      ++n1;
    } else {
      sum0 += d;
      ++n0;
    }
  }
  if (units.empty() || n1 == 0 || n0 == 0)
    throw std::runtime_error("true estimands need units in both arms");
  return {sum / static_cast<double>(units.size()),
          sum1 / static_cast<double>(n1), sum0 / static_cast<double>(n0)};
}

std::vector<Scenario> scenario_suite() {
  std::vector<Scenario> suite;

  {
    Scenario s;
    s.name = "tiny";
    s.n = 50;
    s.seed = 101;
    s.covariates = {{"x", VariableKind::continuous, 0.0, 1.0, 0, {}, {}},
                    {"flag", VariableKind::binary, 0, 1, 0.4, {}, {}}};
    s.ps_coefficients = {-0.2, 0.8, 0.6};
    s.outcome_baseline = {0.5, 1.0, 0.6};
    s.tau0 = 1.0;
    s.tau1 = 0.0;
    s.noise = NoiseKind::gaussian;
    s.noise_sigma = 1.0;
    suite.push_back(s);
  }
  {
    Scenario s;
    s.name = "null_effect";
    s.n = 2000;
    s.seed = 202;
    s.covariates = {{"x1", VariableKind::continuous, 0.0, 1.0, 0, {}, {}},
                    {"x2", VariableKind::continuous, 1.0, 0.5, 0, {}, {}},
                    {"flag", VariableKind::binary, 0, 1, 0.3, {}, {}}};
    s.ps_coefficients = {-0.3, 0.7, -0.5, 0.4};
    s.outcome_baseline = {0.2, 0.8, 0.5, -0.3};
    s.tau0 = 0.0;
    s.tau1 = 0.0;
    s.noise = NoiseKind::gaussian;
    s.noise_sigma = 1.0;
    suite.push_back(s);
  }
  {
    Scenario s;
    s.name = "homogeneous";
    s.n = 2000;
    s.seed = 303;
    s.covariates = {
        {"x", VariableKind::continuous, 0.0, 1.0, 0, {}, {}},
        {"warn", VariableKind::binary, 0, 1, 0.3, {}, {}},
        {"pos", VariableKind::categorical, 0, 1, 0,
         {"fwd", "mid", "def"}, {0.4, 0.35, 0.25}}};
    s.ps_coefficients = {-0.4, 0.8, 0.5, 0.4, -0.3};
    s.outcome_baseline = {0.3, 0.6, 0.4, 0.2, 0.1};
    s.tau0 = 0.5;
    s.tau1 = 0.0;
    s.noise = NoiseKind::gaussian;
    s.noise_sigma = 1.0;
    suite.push_back(s);
  }
  {
    Scenario s;
    s.name = "heterogeneous";
    s.n = 5000;
    s.seed = 404;
    s.covariates = {{"x", VariableKind::continuous, 0.0, 1.0, 0, {}, {}},
                    {"warn", VariableKind::binary, 0, 1, 0.25, {}, {}}};
    s.ps_coefficients = {-0.3, 1.0, 0.5};
    s.outcome_baseline = {0.2, 0.5, 0.3};
    s.tau0 = 0.1;
    s.tau1 = 0.6;
    s.noise = NoiseKind::gaussian;
    s.noise_sigma = 0.25;
    suite.push_back(s);
  }
  {
    Scenario s;
    s.name = "strong_confounding";
    s.n = 2000;
    s.seed = 505;
    s.covariates = {{"x", VariableKind::continuous, 0.0, 1.0, 0, {}, {}},
                    {"d", VariableKind::binary, 0, 1, 0.5, {}, {}}};
    s.ps_coefficients = {-0.5, 1.6, 1.0};
    s.outcome_baseline = {0.2, 1.0, 0.5};
    s.tau0 = 0.3;
    s.tau1 = 0.0;
    s.noise = NoiseKind::gaussian;
    s.noise_sigma = 0.5;
    suite.push_back(s);
  }
  {
    Scenario s;
    s.name = "weak_overlap";
    s.n = 2000;
    s.seed = 606;
    s.covariates = {{"x", VariableKind::continuous, 0.0, 1.0, 0, {}, {}}};
    s.ps_coefficients = {0.0, 3.5};
    s.outcome_baseline = {0.2, 0.5};
    s.tau0 = 0.2;
    s.tau1 = 0.0;
    s.noise = NoiseKind::gaussian;
    s.noise_sigma = 0.5;
    suite.push_back(s);
  }
  return suite;
}

Scenario find_scenario(const std::string& name) {
  for (auto& s : scenario_suite())
    if (s.name == name) return s;
  std::string known;
  for (const auto& s : scenario_suite())
    known += (known.empty() ? "" : ", ") + s.name;
  throw std::runtime_error("unknown scenario '" + name + "' (known: " + known +
                           ")");
}

namespace {

std::vector<double> parse_number_list(const std::string& value,
                                      const std::string& key) {
  std::vector<double> out;
  for (const auto& part : split(value, ','))
    out.push_back(parse_double(trim(part), key));
  return out;
}

CovariateGen parse_covariate_gen(const std::string& name,
                                 const std::string& value) {
  CovariateGen g;
  g.name = name;
  const std::string v = trim(value);
  auto args_of = [&](const std::string& head) -> std::string {
    return v.substr(head.size(), v.size() - head.size() - 1);
  };
  if (v.rfind("normal(", 0) == 0 && v.back() == ')') {
    g.kind = VariableKind::continuous;
    auto parts = split(args_of("normal("), ',');
    if (parts.size() != 2)
      throw std::runtime_error(name + ": normal needs (mu, sigma)");
    g.mu = parse_double(trim(parts[0]), name);
    g.sigma = parse_double(trim(parts[1]), name);
  } else if (v.rfind("bernoulli(", 0) == 0 && v.back() == ')') {
    g.kind = VariableKind::binary;
    g.p = parse_double(trim(args_of("bernoulli(")), name);
  } else if (v.rfind("categorical(", 0) == 0 && v.back() == ')') {
    g.kind = VariableKind::categorical;
    for (const auto& part : split(args_of("categorical("), ',')) {
      auto colon = part.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error(name + ": categorical entries are label: prob");
      g.labels.push_back(trim(part.substr(0, colon)));
      g.probs.push_back(parse_double(trim(part.substr(colon + 1)), name));
    }
  } else {
    throw std::runtime_error(name + ": unknown distribution '" + v + "'");
  }
  return g;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  Scenario s;
  s.name = "custom";
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
    if (key == "name") {
      s.name = value;
    } else if (key == "n") {
      s.n = static_cast<std::size_t>(parse_double(value, "n"));
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(parse_double(value, "seed"));
    } else if (key == "tau0") {
      s.tau0 = parse_double(value, "tau0");
    } else if (key == "tau1") {
      s.tau1 = parse_double(value, "tau1");
    } else if (key == "ps_coefficients") {
      s.ps_coefficients = parse_number_list(value, "ps_coefficients");
    } else if (key == "outcome_baseline") {
      s.outcome_baseline = parse_number_list(value, "outcome_baseline");
    } else if (key == "noise") {
      if (value == "bernoulli") {
        s.noise = NoiseKind::bernoulli;
      } else if (value.rfind("gaussian(", 0) == 0 && value.back() == ')') {
        s.noise = NoiseKind::gaussian;
        s.noise_sigma = parse_double(
            trim(value.substr(9, value.size() - 10)), "noise");
      } else {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": noise must be gaussian(sigma) or bernoulli");
      }
    } else if (key.rfind("covariate ", 0) == 0) {
      s.covariates.push_back(
          parse_covariate_gen(trim(key.substr(10)), value));
    } else {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown key '" + key + "'");
    }
  }
  check_scenario(s);
  return s;
}

}  // namespace psmatch
