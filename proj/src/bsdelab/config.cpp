#include "bsdelab/config.hpp"

#include <fstream>
#include <set>

#include "bsdelab/errors.hpp"
#include "bsdelab/gallery.hpp"

namespace bsdelab {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad value for \"") + key + "\": " + e.what());
    }
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (generator.empty() && !expression.has_value()) {
    throw ConfigError("config: either generator or expression must be given");
  }
  if (!generator.empty() && expression.has_value()) {
    throw ConfigError("config: generator and expression are mutually exclusive");
  }
  if (!(t_max > 0.0)) throw ConfigError("config: t_max must be positive");
  if (n_steps < 1) throw ConfigError("config: n_steps must be >= 1");
  if (n_paths < 1) throw ConfigError("config: n_paths must be >= 1");
  if (spacing != "uniform" && spacing != "geometric") {
    throw ConfigError("config: spacing must be uniform or geometric");
  }
  weights.validate();
  static const std::set<std::string> schemes = {"auto", "zfree", "picard", "subdivided",
                                                "truncation"};
  if (!schemes.count(solver.scheme)) {
    throw ConfigError("config: unknown solver scheme " + solver.scheme);
  }
  for (const auto& e : checks.estimates) {
    if (e != "P2.1-(2.1)" && e != "P2.1-(2.2)" && e != "P2.2-(2.8)") {
      throw ConfigError("config: unknown estimate id " + e);
    }
  }
  if (checks.comparison && checks.comparison->side != "i" &&
      checks.comparison->side != "ii") {
    throw ConfigError("config: comparison side must be i or ii");
  }
  if (checks.estimate_seeds < 1) {
    throw ConfigError("config: estimate_seeds must be >= 1");
  }
}

json stopping_to_json(const StoppingTimeSpec& s) {
  json j;
  switch (s.kind) {
    case StoppingTimeSpec::Kind::Deterministic:
      j["kind"] = "deterministic";
      j["T"] = s.T;
      break;
    case StoppingTimeSpec::Kind::Hitting:
      j["kind"] = "hitting";
      j["level"] = s.level;
      j["functional"] = s.functional;
      break;
    case StoppingTimeSpec::Kind::CappedIntegral:
      j["kind"] = "capped_integral";
      j["threshold"] = s.threshold;
      j["integrand"] = s.integrand;
      break;
    case StoppingTimeSpec::Kind::Infinite:
      j["kind"] = "infinite";
      break;
  }
  return j;
}

StoppingTimeSpec stopping_from_json(const json& j) {
  StoppingTimeSpec s;
  std::string kind;
  if (!j.contains("kind")) throw ConfigError("config: stopping needs a kind");
  kind = j.at("kind").get<std::string>();
  if (kind == "deterministic") {
    reject_unknown(j, {"kind", "T"}, "stopping");
    s.kind = StoppingTimeSpec::Kind::Deterministic;
    read(j, "T", s.T);
  } else if (kind == "hitting") {
    reject_unknown(j, {"kind", "level", "functional"}, "stopping");
    s.kind = StoppingTimeSpec::Kind::Hitting;
    read(j, "level", s.level);
    read(j, "functional", s.functional);
  } else if (kind == "capped_integral") {
    reject_unknown(j, {"kind", "threshold", "integrand"}, "stopping");
    s.kind = StoppingTimeSpec::Kind::CappedIntegral;
    read(j, "threshold", s.threshold);
    read(j, "integrand", s.integrand);
  } else if (kind == "infinite") {
    reject_unknown(j, {"kind"}, "stopping");
    s.kind = StoppingTimeSpec::Kind::Infinite;
  } else {
    throw ConfigError("config: unknown stopping kind " + kind);
  }
  return s;
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  reject_unknown(j,
                 {"generator", "expression", "stopping", "grid", "n_paths", "seed",
                  "weights", "solver", "checks", "out_dir"},
                 "top level");
  read(j, "generator", cfg.generator);
  if (j.contains("expression")) {
    const json& e = j.at("expression");
    reject_unknown(e,
                   {"name", "k", "d", "driver", "terminal", "coefficients",
                    "assumptions", "l"},
                   "expression");
    ExprGeneratorSpec spec;
    read(e, "name", spec.name);
    read(e, "k", spec.k);
    read(e, "d", spec.d);
    read(e, "driver", spec.driver);
    read(e, "terminal", spec.terminal);
    if (e.contains("coefficients")) {
      for (auto it = e.at("coefficients").begin(); it != e.at("coefficients").end(); ++it) {
        spec.coefficients[it.key()] = it.value().get<std::string>();
      }
    }
    if (e.contains("assumptions")) {
      for (const auto& a : e.at("assumptions")) {
        spec.assumptions.insert(a.get<std::string>());
      }
    }
    read(e, "l", spec.l);
    cfg.expression = std::move(spec);
  }
  if (j.contains("stopping")) cfg.stopping = stopping_from_json(j.at("stopping"));
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    reject_unknown(g, {"t_max", "n_steps", "spacing", "ratio"}, "grid");
    read(g, "t_max", cfg.t_max);
    read(g, "n_steps", cfg.n_steps);
    read(g, "spacing", cfg.spacing);
    read(g, "ratio", cfg.grid_ratio);
  }
  read(j, "n_paths", cfg.n_paths);
  read(j, "seed", cfg.seed);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    reject_unknown(w, {"p", "beta", "rho", "M", "l"}, "weights");
    read(w, "p", cfg.weights.p);
    read(w, "beta", cfg.weights.beta);
    read(w, "rho", cfg.weights.rho);
    read(w, "M", cfg.weights.M);
    read(w, "l", cfg.weights.l);
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    reject_unknown(s,
                   {"scheme", "basis_degree", "ridge", "picard_max_iters", "picard_tol",
                    "subdivision_N", "q", "truncation_schedule"},
                   "solver");
    read(s, "scheme", cfg.solver.scheme);
    read(s, "basis_degree", cfg.solver.basis_degree);
    read(s, "ridge", cfg.solver.ridge);
    read(s, "picard_max_iters", cfg.solver.picard_max_iters);
    read(s, "picard_tol", cfg.solver.picard_tol);
    read(s, "subdivision_N", cfg.solver.subdivision_N);
    read(s, "q", cfg.solver.q);
    read(s, "truncation_schedule", cfg.solver.truncation_schedule);
  }
  if (j.contains("checks")) {
    const json& c = j.at("checks");
    reject_unknown(c, {"assumptions", "estimates", "comparison", "probes", "estimate_seeds"},
                   "checks");
    read(c, "assumptions", cfg.checks.assumptions);
    read(c, "estimates", cfg.checks.estimates);
    if (c.contains("comparison") && !c.at("comparison").is_null()) {
      const json& cmp = c.at("comparison");
      reject_unknown(cmp, {"other", "side", "enforce_ordering"}, "comparison");
      ComparisonRequest req;
      read(cmp, "other", req.other);
      read(cmp, "side", req.side);
      read(cmp, "enforce_ordering", req.enforce_ordering);
      cfg.checks.comparison = req;
    }
    read(c, "probes", cfg.checks.probes);
    read(c, "estimate_seeds", cfg.checks.estimate_seeds);
  }
  read(j, "out_dir", cfg.out_dir);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  if (!cfg.generator.empty()) j["generator"] = cfg.generator;
  if (cfg.expression) {
    const auto& e = *cfg.expression;
    json je;
    je["name"] = e.name;
    je["k"] = e.k;
    je["d"] = e.d;
    je["driver"] = e.driver;
    if (!e.terminal.empty()) je["terminal"] = e.terminal;
    if (!e.coefficients.empty()) {
      json jc;
      for (const auto& [k2, v] : e.coefficients) jc[k2] = v;
      je["coefficients"] = jc;
    }
    if (!e.assumptions.empty()) {
      je["assumptions"] = std::vector<std::string>(e.assumptions.begin(),
                                                   e.assumptions.end());
    }
    if (e.l != 0.0) je["l"] = e.l;
    j["expression"] = je;
  }
  if (cfg.stopping) j["stopping"] = stopping_to_json(*cfg.stopping);
  j["grid"] = {{"t_max", cfg.t_max},
               {"n_steps", cfg.n_steps},
               {"spacing", cfg.spacing},
               {"ratio", cfg.grid_ratio}};
  j["n_paths"] = cfg.n_paths;
  j["seed"] = cfg.seed;
  j["weights"] = {{"p", cfg.weights.p},
                  {"beta", cfg.weights.beta},
                  {"rho", cfg.weights.rho},
                  {"M", cfg.weights.M},
                  {"l", cfg.weights.l}};
  j["solver"] = {{"scheme", cfg.solver.scheme},
                 {"basis_degree", cfg.solver.basis_degree},
                 {"ridge", cfg.solver.ridge},
                 {"picard_max_iters", cfg.solver.picard_max_iters},
                 {"picard_tol", cfg.solver.picard_tol},
                 {"subdivision_N", cfg.solver.subdivision_N},
                 {"q", cfg.solver.q},
                 {"truncation_schedule", cfg.solver.truncation_schedule}};
  json jc;
  jc["assumptions"] = cfg.checks.assumptions;
  jc["estimates"] = cfg.checks.estimates;
  if (cfg.checks.comparison) {
    jc["comparison"] = {{"other", cfg.checks.comparison->other},
                        {"side", cfg.checks.comparison->side},
                        {"enforce_ordering", cfg.checks.comparison->enforce_ordering}};
  }
  jc["probes"] = cfg.checks.probes;
  jc["estimate_seeds"] = cfg.checks.estimate_seeds;
  j["checks"] = jc;
  j["out_dir"] = cfg.out_dir;
  return j;
}

}  // namespace bsdelab
