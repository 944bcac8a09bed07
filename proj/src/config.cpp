#include "placeboiv/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "placeboiv/error.hpp"
#include "placeboiv/rng.hpp"

namespace placeboiv {

namespace {

std::string child(const std::string& pointer, const std::string& key) {
  return pointer + "/" + key;
}

void require_object(const Json& j, const std::string& pointer) {
  if (!j.is_object()) throw ConfigError(pointer.empty() ? "/" : pointer, "expected an object");
}

void reject_unknown(const Json& j, const std::string& pointer, const std::set<std::string>& known) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(child(pointer, key), "unknown field");
  }
}

bool get_bool(const Json& j, const std::string& key, const std::string& pointer, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw ConfigError(child(pointer, key), "expected true or false");
  return j[key].get<bool>();
}

double as_number(const Json& v, const std::string& pointer) {
  if (!v.is_number()) throw ConfigError(pointer, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(pointer, "expected a finite number");
  return x;
}

double get_number(const Json& j, const std::string& key, const std::string& pointer, double fallback) {
  return j.contains(key) ? as_number(j[key], child(pointer, key)) : fallback;
}

std::uint64_t as_count(const Json& v, const std::string& pointer) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  throw ConfigError(pointer, "expected a non-negative integer");
}

std::uint64_t get_count(const Json& j, const std::string& key, const std::string& pointer,
                        std::uint64_t fallback) {
  return j.contains(key) ? as_count(j[key], child(pointer, key)) : fallback;
}

std::string get_string(const Json& j, const std::string& key, const std::string& pointer,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw ConfigError(child(pointer, key), "expected a string");
  return j[key].get<std::string>();
}

std::vector<Method> methods_from_json(const Json& j, const std::string& pointer) {
  if (!j.is_array()) throw ConfigError(pointer, "expected an array of method names");
  std::vector<Method> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string p = child(pointer, std::to_string(k));
    if (!j[k].is_string()) throw ConfigError(p, "expected a method name");
    const auto m = parse_method(j[k].get<std::string>());
    if (!m) throw ConfigError(p, "unknown method " + j[k].get<std::string>());
    out.push_back(*m);
  }
  return out;
}

Json methods_to_json(const std::vector<Method>& methods) {
  Json out = Json::array();
  for (auto m : methods) out.push_back(std::string(to_string(m)));
  return out;
}

std::vector<double> numbers_from_json(const Json& j, const std::string& pointer) {
  if (!j.is_array()) throw ConfigError(pointer, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_number(j[k], child(pointer, std::to_string(k))));
  return out;
}

// Either an explicit list or {"from": a, "to": b, "step": s}.
std::vector<double> alpha_grid_from_json(const Json& j, const std::string& pointer) {
  if (j.is_array()) return numbers_from_json(j, pointer);
  require_object(j, pointer);
  reject_unknown(j, pointer, {"from", "to", "step"});
  const double from = get_number(j, "from", pointer, 0.002);
  const double to = get_number(j, "to", pointer, 0.2);
  const double step = get_number(j, "step", pointer, 0.002);
  if (!(step > 0.0)) throw ConfigError(child(pointer, "step"), "must be positive");
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((to - from) / step + 1e-9));
  for (long k = 0; k <= count; ++k) out.push_back(from + static_cast<double>(k) * step);
  return out;
}

Effect effect_from_string(const std::string& s, const std::string& pointer) {
  if (s == "psi") return Effect::psi;
  if (s == "beta") return Effect::beta;
  throw ConfigError(pointer, "expected \"psi\" or \"beta\"");
}

const std::set<std::string> kScenarioKeys{"blinded", "confounded", "psi_null", "beta_null",
                                          "extended_mediator"};

}  // namespace

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

ScenarioConfig scenario_from_json(const Json& j, const std::string& pointer) {
  require_object(j, pointer);
  reject_unknown(j, pointer, kScenarioKeys);
  ScenarioConfig c;
  c.blinded = get_bool(j, "blinded", pointer, c.blinded);
  c.confounded = get_bool(j, "confounded", pointer, c.confounded);
  c.psi_null = get_bool(j, "psi_null", pointer, c.psi_null);
  c.beta_null = get_bool(j, "beta_null", pointer, c.beta_null);
  c.extended_mediator = get_bool(j, "extended_mediator", pointer, c.extended_mediator);
  return c;
}

Json to_json(const ScenarioConfig& c) {
  return Json{{"blinded", c.blinded},
              {"confounded", c.confounded},
              {"psi_null", c.psi_null},
              {"beta_null", c.beta_null},
              {"extended_mediator", c.extended_mediator}};
}

ParameterPoint point_from_json(const Json& j, const ScenarioConfig& scenario,
                               const std::string& pointer) {
  require_object(j, pointer);
  ParameterPoint p;
  if (j.contains("fill")) {
    const double fill = as_number(j["fill"], child(pointer, "fill"));
    for (const auto& info : parameter_table()) {
      if (free_range(info.role, scenario)) p.*info.member = fill;
    }
  }
  for (const auto& [key, value] : j.items()) {
    const std::string p_key = child(pointer, key);
    if (key == "fill") continue;
    if (key == "n") {
      const auto n = as_count(value, p_key);
      if (n < kMinParticipants) throw ConfigError(p_key, "n must be at least 4");
      p.n = static_cast<std::size_t>(n);
      continue;
    }
    const auto* info = find_parameter(key);
    if (!info) throw ConfigError(p_key, "unknown parameter");
    p.*info->member = as_number(value, p_key);
  }
  try {
    check_constraints(scenario, p);
  } catch (const ConstraintViolation& e) {
    // Re-anchor "/point/<name>" under the caller's pointer.
    const std::string suffix = e.pointer().substr(std::string("/point").size());
    throw ConstraintViolation(pointer + suffix, "must be 0 under this scenario");
  }
  return p;
}

Json to_json(const ParameterPoint& p) {
  Json out{{"n", p.n}};
  for (const auto& info : parameter_table()) out[std::string(info.name)] = p.*info.member;
  return out;
}

SimulationConfig simulation_from_json(const Json& j) {
  require_object(j, "");
  reject_unknown(j, "", {"scenario", "point"});
  SimulationConfig c;
  c.scenario = scenario_from_json(j.contains("scenario") ? j["scenario"] : Json::object(), "/scenario");
  if (!j.contains("point")) throw ConfigError("/point", "missing parameter point");
  c.point = point_from_json(j["point"], c.scenario, "/point");
  return c;
}

Json to_json(const SimulationConfig& c) {
  return Json{{"scenario", to_json(c.scenario)}, {"point", to_json(c.point)}};
}

std::uint64_t PlanDocument::seed() const noexcept {
  switch (study) {
    case StudyKind::curves: return curves.master_seed;
    case StudyKind::consistency: return consistency.master_seed;
    case StudyKind::coverage: return coverage.master_seed;
  }
  return 0;
}

void PlanDocument::set_seed(std::uint64_t seed) noexcept {
  curves.master_seed = seed;
  consistency.master_seed = seed;
  coverage.master_seed = seed;
  has_seed = true;
}

PlanDocument plan_from_json(const Json& j) {
  require_object(j, "");
  PlanDocument doc;
  const std::string study = get_string(j, "study", "", "curves");
  doc.name = get_string(j, "name", "", "experiment");
  const ScenarioConfig scenario =
      scenario_from_json(j.contains("scenario") ? j["scenario"] : Json::object(), "/scenario");
  doc.has_seed = j.contains("seed");
  const std::uint64_t seed = get_count(j, "seed", "", 0);

  if (study == "curves") {
    doc.study = StudyKind::curves;
    reject_unknown(j, "", {"study", "name", "scenario", "design", "fixed", "methods",
                           "n_permutations", "alpha_grid", "pretest_alpha", "seed"});
    auto& plan = doc.curves;
    plan.name = doc.name;
    plan.scenario = scenario;
    plan.master_seed = seed;
    if (j.contains("design")) {
      const auto& d = j["design"];
      require_object(d, "/design");
      reject_unknown(d, "/design", {"n_points", "n_min", "n_max", "optimizer", "iterations"});
      plan.n_points = get_count(d, "n_points", "/design", plan.n_points);
      plan.n_min = get_count(d, "n_min", "/design", plan.n_min);
      plan.n_max = get_count(d, "n_max", "/design", plan.n_max);
      plan.design_iterations = get_count(d, "iterations", "/design", plan.design_iterations);
      const auto opt = get_string(d, "optimizer", "/design", "maximin_swap");
      if (opt == "maximin_swap") {
        plan.optimizer = DesignOptimizer::maximin_swap;
      } else if (opt == "none") {
        plan.optimizer = DesignOptimizer::none;
      } else {
        throw ConfigError("/design/optimizer", "expected \"none\" or \"maximin_swap\"");
      }
    }
    if (j.contains("fixed")) {
      require_object(j["fixed"], "/fixed");
      for (const auto& [key, value] : j["fixed"].items()) {
        plan.fixed.emplace_back(key, as_number(value, "/fixed/" + key));
      }
    }
    if (!j.contains("methods")) throw ConfigError("/methods", "missing method list");
    plan.methods = methods_from_json(j["methods"], "/methods");
    plan.n_permutations = get_count(j, "n_permutations", "", plan.n_permutations);
    if (j.contains("alpha_grid")) plan.alpha_grid = alpha_grid_from_json(j["alpha_grid"], "/alpha_grid");
    plan.pretest_alpha = get_number(j, "pretest_alpha", "", plan.pretest_alpha);
    validate_plan(plan);
  } else if (study == "consistency") {
    doc.study = StudyKind::consistency;
    reject_unknown(j, "", {"study", "name", "scenario", "n_grid", "replicates_per_n", "methods",
                           "n_permutations", "alpha", "seed"});
    auto& c = doc.consistency;
    c.scenario = scenario;
    c.master_seed = seed;
    if (j.contains("n_grid")) {
      c.n_grid.clear();
      const auto& g = j["n_grid"];
      if (!g.is_array()) throw ConfigError("/n_grid", "expected an array of sample sizes");
      for (std::size_t k = 0; k < g.size(); ++k) {
        const std::string p = "/n_grid/" + std::to_string(k);
        const auto n = as_count(g[k], p);
        if (n < kMinParticipants) throw ConfigError(p, "n must be at least 4");
        if (k > 0 && n <= c.n_grid.back()) throw ConfigError(p, "n_grid must be increasing");
        c.n_grid.push_back(static_cast<std::size_t>(n));
      }
    }
    c.replicates_per_n = get_count(j, "replicates_per_n", "", c.replicates_per_n);
    if (c.replicates_per_n < 2) throw ConfigError("/replicates_per_n", "must be at least 2");
    if (j.contains("methods")) c.methods = methods_from_json(j["methods"], "/methods");
    c.n_permutations = get_count(j, "n_permutations", "", c.n_permutations);
    c.alpha = get_number(j, "alpha", "", c.alpha);
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("/alpha", "must lie in (0, 1)");
    ExperimentPlan probe;
    probe.scenario = c.scenario;
    probe.methods = c.methods;
    probe.n_permutations = c.n_permutations;
    validate_plan(probe);
  } else if (study == "coverage") {
    doc.study = StudyKind::coverage;
    reject_unknown(j, "", {"study", "name", "scenario", "point", "replicates", "alphas", "effect",
                           "n_permutations", "grid_step", "seed"});
    auto& c = doc.coverage;
    c.scenario = scenario;
    c.master_seed = seed;
    if (!j.contains("point")) throw ConfigError("/point", "missing parameter point");
    c.point = point_from_json(j["point"], scenario, "/point");
    c.replicates = get_count(j, "replicates", "", c.replicates);
    if (j.contains("alphas")) c.alphas = numbers_from_json(j["alphas"], "/alphas");
    for (std::size_t k = 0; k < c.alphas.size(); ++k) {
      if (!(c.alphas[k] > 0.0 && c.alphas[k] < 0.5)) {
        throw ConfigError("/alphas/" + std::to_string(k), "alpha must lie in (0, 0.5)");
      }
    }
    c.effect = effect_from_string(get_string(j, "effect", "", "psi"), "/effect");
    c.n_permutations = get_count(j, "n_permutations", "", c.n_permutations);
    if (c.n_permutations < kMinTestPermutations) {
      throw ConfigError("/n_permutations", "must be at least " + std::to_string(kMinTestPermutations));
    }
    if (j.contains("grid_step")) {
      const double step = as_number(j["grid_step"], "/grid_step");
      if (!(step > 0.0)) throw ConfigError("/grid_step", "must be positive");
      c.grid_step = step;
    }
  } else {
    throw ConfigError("/study", "expected \"curves\", \"consistency\" or \"coverage\"");
  }
  return doc;
}

Json to_json(const PlanDocument& doc) {
  Json out{{"name", doc.name}};
  switch (doc.study) {
    case StudyKind::curves: {
      const auto& p = doc.curves;
      out["study"] = "curves";
      out["scenario"] = to_json(p.scenario);
      out["design"] = {{"n_points", p.n_points},
                       {"n_min", p.n_min},
                       {"n_max", p.n_max},
                       {"iterations", p.design_iterations},
                       {"optimizer", p.optimizer == DesignOptimizer::none ? "none" : "maximin_swap"}};
      Json fixed = Json::object();
      for (const auto& [k, v] : p.fixed) fixed[k] = v;
      out["fixed"] = fixed;
      out["methods"] = methods_to_json(p.methods);
      out["n_permutations"] = p.n_permutations;
      out["alpha_grid"] = p.alpha_grid;
      out["pretest_alpha"] = p.pretest_alpha;
      out["seed"] = p.master_seed;
      break;
    }
    case StudyKind::consistency: {
      const auto& c = doc.consistency;
      out["study"] = "consistency";
      out["scenario"] = to_json(c.scenario);
      out["n_grid"] = c.n_grid;
      out["replicates_per_n"] = c.replicates_per_n;
      out["methods"] = methods_to_json(c.methods);
      out["n_permutations"] = c.n_permutations;
      out["alpha"] = c.alpha;
      out["seed"] = c.master_seed;
      break;
    }
    case StudyKind::coverage: {
      const auto& c = doc.coverage;
      out["study"] = "coverage";
      out["scenario"] = to_json(c.scenario);
      out["point"] = to_json(c.point);
      out["replicates"] = c.replicates;
      out["alphas"] = c.alphas;
      out["effect"] = std::string(to_string(c.effect));
      out["n_permutations"] = c.n_permutations;
      if (c.grid_step) out["grid_step"] = *c.grid_step;
      out["seed"] = c.master_seed;
      break;
    }
  }
  return out;
}

std::vector<PlanDocument> paper_suite(std::uint64_t seed) {
  std::vector<PlanDocument> suite;
  std::uint64_t k = 0;
  for (const bool blinded : {true, false}) {
    for (const bool confounded : {true, false}) {
      for (const bool psi_null : {true, false}) {
        for (const bool beta_null : {true, false}) {
          PlanDocument doc;
          doc.study = StudyKind::curves;
          doc.name = std::string(blinded ? "blinded" : "unblinded") + "_" +
                     (confounded ? "confounded" : "unconfounded") + "_" +
                     (psi_null ? "psi_null" : "psi_alt") + "_" + (beta_null ? "beta_null" : "beta_alt");
          auto& p = doc.curves;
          p.name = doc.name;
          p.scenario = {blinded, confounded, psi_null, beta_null, false};
          p.methods = {Method::iv_placebo, Method::iv_two_step, Method::iv_unadjusted,
                       Method::iv_true_psi_adjusted, Method::ols, Method::pretest};
          p.n_points = 1000;
          p.n_permutations = 999;
          p.master_seed = derive_seed(seed, k++);
          doc.has_seed = true;
          suite.push_back(std::move(doc));
        }
      }
    }
  }
  return suite;
}

}  // namespace placeboiv
