#include "placeboiv/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "placeboiv/error.hpp"
#include "placeboiv/estimators.hpp"
#include "placeboiv/parallel.hpp"
#include "placeboiv/rng.hpp"
#include "placeboiv/stats.hpp"

namespace placeboiv {

namespace {

constexpr std::uint64_t kDesignTag = 0x64657369676eull;
constexpr std::uint64_t kDataTag = 0x64617461ull;
constexpr std::uint64_t kPermutationTag = 0x7065726dull;

constexpr std::string_view kMethodNames[] = {
    "iv_placebo", "iv_two_step", "iv_unadjusted", "iv_true_psi_adjusted",
    "ols",        "pretest",     "multi_mediator",
};

std::string fmt(double v) { return std::isnan(v) ? "NA" : format_double(v); }
std::string na_or(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

double median_of(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

double mc_se(double rate, std::size_t n) {
  return n == 0 ? 0.0 : std::sqrt(rate * (1.0 - rate) / static_cast<double>(n));
}

// A randomization test on (instrument, response) with a fixed denominator.
struct SharedTest {
  std::string name;
  std::span<const double> instrument;
  std::vector<double> response;
  double denominator;
  double observed;
};

// Runs every test on one permutation stream. Each statistic is computed with
// the same expression as the standalone tests in rand_inference.
std::vector<double> run_shared_tests(const std::vector<SharedTest>& tests, std::size_t n,
                                     const PermutationOptions& options) {
  std::vector<double> p(tests.size(), 1.0);
  if (tests.empty()) return p;
  const PermutationPlan plan = test_plan(n, options);
  std::vector<std::vector<double>> stats(tests.size(), std::vector<double>(plan.count()));
  parallel_for(plan.count(), options.workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<std::uint32_t> perm(n);
    std::vector<double> buffer(n);
    for (std::size_t b = begin; b < end; ++b) {
      plan.permutation(b, perm);
      for (std::size_t t = 0; t < tests.size(); ++t) {
        const auto& test = tests[t];
        for (std::size_t k = 0; k < n; ++k) buffer[k] = test.response[perm[k]];
        stats[t][b] = sample_cov(test.instrument, buffer) / test.denominator;
      }
    }
  });
  for (std::size_t t = 0; t < tests.size(); ++t) {
    p[t] = permutation_p_values(tests[t].observed, stats[t]).two_sided;
  }
  return p;
}

template <class F>
auto attempt(F&& f, std::string& failure) -> std::optional<decltype(f())> {
  try {
    return f();
  } catch (const Error& e) {
    failure = e.name();
    return std::nullopt;
  }
}

bool has_method(const ExperimentPlan& plan, Method m) {
  return std::find(plan.methods.begin(), plan.methods.end(), m) != plan.methods.end();
}

}  // namespace

std::string_view to_string(Method method) noexcept {
  return kMethodNames[static_cast<std::size_t>(method)];
}

std::optional<Method> parse_method(std::string_view name) noexcept {
  for (std::size_t k = 0; k < std::size(kMethodNames); ++k) {
    if (kMethodNames[k] == name) return static_cast<Method>(k);
  }
  return std::nullopt;
}

std::vector<Series> method_series(Method method) {
  switch (method) {
    case Method::iv_placebo: return {{"iv_placebo", Effect::psi}};
    case Method::ols: return {{"ols_psi", Effect::psi}, {"ols_beta", Effect::beta}};
    case Method::multi_mediator:
      return {{"iv_psi_kappa_adjusted", Effect::beta}, {"iv_true_psi_kappa_adjusted", Effect::beta}};
    default: return {{std::string(to_string(method)), Effect::beta}};
  }
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 100; ++k) grid.push_back(k / 500.0);
  return grid;
}

void validate_plan(const ExperimentPlan& plan) {
  if (plan.methods.empty()) throw ConfigError("/methods", "at least one method is required");
  for (std::size_t k = 0; k < plan.methods.size(); ++k) {
    const std::string pointer = "/methods/" + std::to_string(k);
    if (std::count(plan.methods.begin(), plan.methods.end(), plan.methods[k]) > 1) {
      throw ConfigError(pointer, "duplicate method");
    }
    if (plan.methods[k] == Method::multi_mediator && !plan.scenario.extended_mediator) {
      throw ConfigError(pointer, "multi_mediator needs an extended_mediator scenario");
    }
    if (plan.methods[k] == Method::pretest && plan.n_permutations == 0) {
      throw ConfigError(pointer, "pretest needs n_permutations > 0");
    }
  }
  if (plan.n_permutations != 0 && plan.n_permutations < kMinTestPermutations) {
    throw ConfigError("/n_permutations", "must be 0 or at least " + std::to_string(kMinTestPermutations));
  }
  if (plan.n_points < 2) throw ConfigError("/design/n_points", "must be at least 2");
  if (plan.n_min < kMinParticipants) {
    throw ConfigError("/design/n_min", "must be at least " + std::to_string(kMinParticipants));
  }
  if (plan.n_max < plan.n_min) throw ConfigError("/design/n_max", "must be >= n_min");
  if (plan.alpha_grid.empty()) throw ConfigError("/alpha_grid", "must not be empty");
  for (std::size_t k = 0; k < plan.alpha_grid.size(); ++k) {
    const double a = plan.alpha_grid[k];
    const std::string pointer = "/alpha_grid/" + std::to_string(k);
    if (!(a > 0.0 && a < 1.0)) throw ConfigError(pointer, "alpha must lie in (0, 1)");
    if (k > 0 && !(a > plan.alpha_grid[k - 1])) throw ConfigError(pointer, "must be strictly increasing");
  }
  if (!(plan.pretest_alpha >= 0.0 && plan.pretest_alpha < 1.0)) {
    throw ConfigError("/pretest_alpha", "must lie in [0, 1)");
  }
  for (const auto& [name, value] : plan.fixed) {
    const std::string pointer = "/fixed/" + name;
    if (name == "n") {
      if (!(value >= static_cast<double>(kMinParticipants)) || value != std::floor(value)) {
        throw ConfigError(pointer, "n must be an integer >= " + std::to_string(kMinParticipants));
      }
      continue;
    }
    const auto* info = find_parameter(name);
    if (!info) throw ConfigError(pointer, "unknown parameter");
    if (!std::isfinite(value)) throw ConfigError(pointer, "value is not finite");
    if (value != 0.0 && !free_range(info->role, plan.scenario)) {
      throw ConstraintViolation(pointer, "must be 0 under this scenario");
    }
  }
}

namespace {

const double* fixed_value(const ExperimentPlan& plan, std::string_view name) {
  for (const auto& [key, value] : plan.fixed) {
    if (key == name) return &value;
  }
  return nullptr;
}

}  // namespace

DesignSpec design_spec(const ExperimentPlan& plan) {
  DesignSpec spec;
  spec.n_points = plan.n_points;
  spec.optimizer = plan.optimizer;
  spec.iterations = plan.design_iterations;
  spec.seed = derive_seed(plan.master_seed, kDesignTag);
  for (const auto& info : parameter_table()) {
    const auto range = free_range(info.role, plan.scenario);
    if (!range || fixed_value(plan, info.name)) continue;
    spec.dimensions.push_back({std::string(info.name), range->first, range->second, false});
  }
  if (!fixed_value(plan, "n") && plan.n_min < plan.n_max) {
    spec.dimensions.push_back(
        {"n", static_cast<double>(plan.n_min), static_cast<double>(plan.n_max), true});
  }
  return spec;
}

ParameterPoint point_from_design(const ExperimentPlan& plan, const Design& design, std::size_t row) {
  ParameterPoint p;
  for (const auto& info : parameter_table()) p.*info.member = 0.0;
  p.n = plan.n_min;
  for (const auto& [name, value] : plan.fixed) {
    if (name == "n") {
      p.n = static_cast<std::size_t>(value);
    } else {
      p.*find_parameter(name)->member = value;
    }
  }
  for (std::size_t j = 0; j < design.dimensions.size(); ++j) {
    const auto& name = design.dimensions[j].name;
    const double value = design.points[row][j];
    if (name == "n") {
      p.n = static_cast<std::size_t>(value);
    } else {
      p.*find_parameter(name)->member = value;
    }
  }
  return p;
}

RngSeedPlan dataset_seeds(std::uint64_t master_seed, std::size_t index) noexcept {
  return {derive_seed(master_seed, kDataTag), index};
}

std::uint64_t permutation_seed(std::uint64_t master_seed, std::size_t index) noexcept {
  return derive_seed(derive_seed(master_seed, kPermutationTag), index);
}

const MethodOutcome* ReplicateRecord::outcome(std::string_view series) const noexcept {
  for (const auto& o : outcomes) {
    if (o.series == series) return &o;
  }
  return nullptr;
}

RandTestResult true_psi_adjusted_test(const TrialDataset& ds, double true_psi,
                                      const PermutationOptions& options) {
  const auto residuals = placebo_residuals(ds, true_psi);
  return residual_rand_test(ds.z, ds.x, residuals.values, options);
}

ReplicateRecord evaluate_replicate(const ExperimentPlan& plan, std::size_t index,
                                   const ParameterPoint& point, const TrialDataset& ds,
                                   const PermutationOptions& permutation_options) {
  ReplicateRecord rec;
  rec.index = index;
  rec.point = point;
  rec.truth = oracle_effects(point);
  rec.cor_qm = correlation(ds.q, ds.m);
  rec.cor_zx = correlation(ds.z, ds.x);

  const bool extended = plan.scenario.extended_mediator && ds.has_extended();
  const bool tests = plan.n_permutations > 0;
  const bool pretest = has_method(plan, Method::pretest);

  // Estimates, each with the error that blocked it.
  std::string psi_fail, two_step_fail, unadj_fail, true_fail, ols_fail, multi_fail, true_multi_fail;
  const auto psi = attempt([&] { return placebo_iv(ds); }, psi_fail);
  const auto two_step = attempt([&] { return treatment_iv_two_step(ds); }, two_step_fail);
  const auto unadj = attempt([&] { return treatment_iv_unadjusted(ds); }, unadj_fail);
  const auto true_adj =
      attempt([&] { return treatment_iv_adjusted(ds, rec.truth.psi); }, true_fail);

  std::optional<RegressionFit> ols;
  if (has_method(plan, Method::ols)) ols = attempt([&] { return ols_fit(ds, extended); }, ols_fail);

  std::optional<MultiMediatorEstimate> multi;
  std::optional<EffectEstimate> true_multi;
  std::vector<double> multi_resid, true_multi_resid;
  if (extended && has_method(plan, Method::multi_mediator)) {
    multi = attempt([&] { return multi_mediator_two_step(ds); }, multi_fail);
    const auto& a = *ds.a;
    if (multi) {
      multi_resid.resize(ds.size());
      for (std::size_t k = 0; k < ds.size(); ++k) {
        multi_resid[k] = ds.y[k] - multi->psi.value * ds.m[k] - multi->kappa.value * a[k];
      }
    }
    true_multi_resid.resize(ds.size());
    for (std::size_t k = 0; k < ds.size(); ++k) {
      true_multi_resid[k] = ds.y[k] - rec.truth.psi * ds.m[k] - rec.truth.kappa * a[k];
    }
    true_multi = attempt(
        [&] {
          return iv_ratio(ds.z, true_multi_resid, ds.x, EffectKind::treatment_iv_two_step,
                          "cov(Z,X)");
        },
        true_multi_fail);
  }

  // Randomization tests on one shared permutation stream.
  std::vector<SharedTest> shared;
  auto want = [&](Method m) { return tests && has_method(plan, m); };
  if (psi && (want(Method::iv_placebo) || (tests && pretest))) {
    shared.push_back({"iv_placebo", ds.q, ds.y, psi->denominator, psi->value});
  }
  if (two_step && (want(Method::iv_two_step) || (tests && pretest))) {
    shared.push_back({"iv_two_step", ds.z, placebo_residuals(ds, psi->value).values,
                      two_step->denominator, two_step->value});
  }
  if (unadj && (want(Method::iv_unadjusted) || (tests && pretest))) {
    shared.push_back({"iv_unadjusted", ds.z, ds.y, unadj->denominator, unadj->value});
  }
  if (true_adj && want(Method::iv_true_psi_adjusted)) {
    shared.push_back({"iv_true_psi_adjusted", ds.z, placebo_residuals(ds, rec.truth.psi).values,
                      true_adj->denominator, true_adj->value});
  }
  if (multi && want(Method::multi_mediator)) {
    shared.push_back({"iv_psi_kappa_adjusted", ds.z, multi_resid, multi->beta.denominator,
                      multi->beta.value});
  }
  if (true_multi && want(Method::multi_mediator)) {
    shared.push_back({"iv_true_psi_kappa_adjusted", ds.z, true_multi_resid,
                      true_multi->denominator, true_multi->value});
  }
  const auto p =
      tests ? run_shared_tests(shared, ds.size(), permutation_options) : std::vector<double>{};
  auto p_of = [&](std::string_view name) -> std::optional<double> {
    for (std::size_t t = 0; t < shared.size(); ++t) {
      if (shared[t].name == name) return p[t];
    }
    return std::nullopt;
  };

  auto fill = [&](MethodOutcome& o, const std::optional<EffectEstimate>& est,
                  const std::string& failure) {
    if (!est) {
      o.failure = failure;
      return;
    }
    o.estimate = est->value;
    o.p_value = p_of(o.series);
  };

  for (const Method method : plan.methods) {
    for (const auto& series : method_series(method)) {
      MethodOutcome o;
      o.series = series.name;
      o.effect = series.effect;
      switch (method) {
        case Method::iv_placebo: fill(o, psi, psi_fail); break;
        case Method::iv_two_step: fill(o, two_step, two_step_fail); break;
        case Method::iv_unadjusted: fill(o, unadj, unadj_fail); break;
        case Method::iv_true_psi_adjusted: fill(o, true_adj, true_fail); break;
        case Method::ols:
          if (!ols) {
            o.failure = ols_fail;
          } else {
            const auto& term = ols->term(series.effect == Effect::psi ? "psi" : "beta");
            o.estimate = term.coefficient;
            o.p_value = term.p_value;
          }
          break;
        case Method::pretest:
          if (!psi || !two_step || !unadj) {
            o.failure = !psi ? psi_fail : (!two_step ? two_step_fail : unadj_fail);
          } else {
            const bool use_two_step = *p_of("iv_placebo") < plan.pretest_alpha;
            o.estimate = use_two_step ? two_step->value : unadj->value;
            o.p_value = p_of(use_two_step ? "iv_two_step" : "iv_unadjusted");
          }
          break;
        case Method::multi_mediator:
          if (series.name == "iv_psi_kappa_adjusted") {
            if (multi) {
              o.estimate = multi->beta.value;
              o.p_value = p_of(o.series);
            } else {
              o.failure = multi_fail.empty() ? "MissingColumns" : multi_fail;
            }
          } else {
            if (true_multi) {
              o.estimate = true_multi->value;
              o.p_value = p_of(o.series);
            } else {
              o.failure = true_multi_fail.empty() ? "MissingColumns" : true_multi_fail;
            }
          }
          break;
      }
      rec.outcomes.push_back(std::move(o));
    }
  }
  return rec;
}

std::string_view to_string(CurveKind kind) noexcept {
  return kind == CurveKind::type1 ? "type1" : "power";
}

CurveKind curve_kind(const ScenarioConfig& scenario, Effect effect) noexcept {
  const bool null = effect == Effect::psi ? scenario.psi_null : scenario.beta_null;
  return null ? CurveKind::type1 : CurveKind::power;
}

const CurveRow& CurveTable::at(std::string_view method, double alpha) const {
  for (const auto& row : rows) {
    if (row.method == method && std::abs(row.alpha - alpha) <= 1e-12) return row;
  }
  throw std::out_of_range("no curve row for " + std::string(method));
}

CurveRow rejection_rate(const std::vector<ReplicateRecord>& records, const ScenarioConfig& scenario,
                        std::string_view series, double alpha) {
  CurveRow row;
  row.alpha = alpha;
  row.method = std::string(series);
  std::size_t rejected = 0;
  for (const auto& rec : records) {
    const auto* o = rec.outcome(series);
    if (!o) continue;
    row.effect = o->effect;
    if (o->degenerate()) {
      ++row.n_degenerate;
      continue;
    }
    if (!o->p_value) continue;
    ++row.n_replicates;
    if (*o->p_value <= alpha) ++rejected;
  }
  row.kind = curve_kind(scenario, row.effect);
  row.rate = row.n_replicates ? static_cast<double>(rejected) / static_cast<double>(row.n_replicates)
                              : 0.0;
  row.mc_std_error = mc_se(row.rate, row.n_replicates);
  return row;
}

CurveTable compute_curves(const std::vector<ReplicateRecord>& records,
                          const ScenarioConfig& scenario, const std::vector<double>& alpha_grid) {
  CurveTable table;
  if (records.empty()) return table;
  for (const auto& o : records.front().outcomes) {
    const bool any_p = std::any_of(records.begin(), records.end(), [&](const ReplicateRecord& r) {
      const auto* x = r.outcome(o.series);
      return x && x->p_value;
    });
    if (!any_p) continue;
    for (double alpha : alpha_grid) {
      table.rows.push_back(rejection_rate(records, scenario, o.series, alpha));
    }
  }
  return table;
}

ExperimentResult run_experiment(const ExperimentPlan& plan, std::size_t workers) {
  validate_plan(plan);
  ExperimentResult result;
  result.plan = plan;
  result.design = build_design(design_spec(plan));
  const std::size_t n = result.design.n_points();
  result.records.resize(n);
  parallel_for(n, workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto point = point_from_design(plan, result.design, i);
      const auto ds = generate(plan.scenario, point, dataset_seeds(plan.master_seed, i));
      PermutationOptions popt;
      popt.n_permutations = plan.n_permutations;
      popt.seed = permutation_seed(plan.master_seed, i);
      result.records[i] = evaluate_replicate(plan, i, point, ds, popt);
    }
  });
  result.curves = compute_curves(result.records, plan.scenario, plan.alpha_grid);
  return result;
}

BiasSummary bias_summary(const std::vector<ReplicateRecord>& records, std::string_view series) {
  BiasSummary out;
  out.method = std::string(series);
  for (const auto& rec : records) {
    const auto* o = rec.outcome(series);
    if (!o) continue;
    out.effect = o->effect;
    if (o->degenerate() || !o->estimate) continue;
    const double truth = o->effect == Effect::psi ? rec.truth.psi : rec.truth.beta;
    out.differences.push_back(truth - *o->estimate);
  }
  if (out.differences.empty()) return out;
  std::vector<double> sorted = out.differences;
  std::sort(sorted.begin(), sorted.end());
  for (double q : kBiasQuantiles) out.quantiles.emplace_back(q, quantile_sorted(sorted, q));
  out.mean = mean(sorted);
  std::vector<double> abs_diff;
  std::size_t tail = 0;
  for (double d : sorted) {
    abs_diff.push_back(std::abs(d));
    if (std::abs(d) > kBiasTailThreshold) ++tail;
  }
  out.median_abs_error = median_of(std::move(abs_diff));
  out.tail_mass = static_cast<double>(tail) / static_cast<double>(sorted.size());
  return out;
}

std::string_view to_string(Stratifier s) noexcept {
  return s == Stratifier::cor_qm ? "cor_qm" : "cor_zx";
}

std::vector<StratumRow> stratified_power(const std::vector<ReplicateRecord>& records,
                                         Stratifier stratifier, std::size_t bins,
                                         const std::vector<double>& alphas) {
  if (bins == 0) throw std::invalid_argument("stratified_power needs at least one bin");
  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& c = stratifier == Stratifier::cor_qm ? records[r].cor_qm : records[r].cor_zx;
    if (c) keyed.emplace_back(*c, r);
  }
  std::sort(keyed.begin(), keyed.end());

  std::vector<std::string> series;
  if (!records.empty()) {
    for (const auto& o : records.front().outcomes) series.push_back(o.series);
  }

  std::vector<StratumRow> rows;
  const std::size_t m = keyed.size();
  for (std::size_t bin = 0; bin < bins; ++bin) {
    const std::size_t lo = bin * m / bins, hi = (bin + 1) * m / bins;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double lower = lo < hi ? keyed[lo].first : nan;
    const double upper = lo < hi ? keyed[hi - 1].first : nan;
    for (const auto& name : series) {
      for (double alpha : alphas) {
        StratumRow row{stratifier, bin, lower, upper, name, alpha, 0.0, 0};
        std::size_t rejected = 0;
        for (std::size_t k = lo; k < hi; ++k) {
          const auto* o = records[keyed[k].second].outcome(name);
          if (!o || o->degenerate() || !o->p_value) continue;
          ++row.n_replicates;
          if (*o->p_value <= alpha) ++rejected;
        }
        if (row.n_replicates) {
          row.rate = static_cast<double>(rejected) / static_cast<double>(row.n_replicates);
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<ConsistencyRow> consistency_study(const ConsistencyOptions& options,
                                              std::size_t workers) {
  for (std::size_t k = 1; k < options.n_grid.size(); ++k) {
    if (options.n_grid[k] <= options.n_grid[k - 1]) {
      throw ConfigError("/n_grid/" + std::to_string(k), "n_grid must be increasing");
    }
  }
  std::vector<ConsistencyRow> rows;
  for (const std::size_t n : options.n_grid) {
    ExperimentPlan plan;
    plan.name = "consistency_n" + std::to_string(n);
    plan.scenario = options.scenario;
    plan.n_points = options.replicates_per_n;
    plan.fixed = {{"n", static_cast<double>(n)}};
    plan.methods = options.methods;
    plan.n_permutations = options.n_permutations;
    plan.alpha_grid = {options.alpha};
    plan.master_seed = options.master_seed;
    const auto result = run_experiment(plan, workers);

    for (const auto& o : result.records.front().outcomes) {
      ConsistencyRow row;
      row.n = n;
      row.method = o.series;
      row.effect = o.effect;
      row.kind = curve_kind(options.scenario, o.effect);
      row.median_abs_error = bias_summary(result.records, o.series).median_abs_error;
      const auto rate = rejection_rate(result.records, options.scenario, o.series, options.alpha);
      row.n_replicates = rate.n_replicates;
      row.n_degenerate = rate.n_degenerate;
      if (options.n_permutations > 0) {
        row.rate = rate.rate;
        row.mc_std_error = rate.mc_std_error;
      } else {
        row.rate = std::numeric_limits<double>::quiet_NaN();
        row.mc_std_error = std::numeric_limits<double>::quiet_NaN();
        row.n_replicates = result.records.size() - rate.n_degenerate;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<CoverageRow> coverage_study(const CoverageOptions& options, std::size_t workers) {
  check_constraints(options.scenario, options.point);
  const auto truth = oracle_effects(options.point);
  const double target = options.effect == Effect::psi ? truth.psi : truth.beta;
  const std::size_t levels = options.alphas.size();

  // intervals[r][l] is empty when replicate r failed at level l.
  std::vector<std::vector<std::optional<RandCI>>> intervals(
      options.replicates, std::vector<std::optional<RandCI>>(levels));
  parallel_for(options.replicates, workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto ds = generate(options.scenario, options.point, dataset_seeds(options.master_seed, r));
      ProfileOptions popt;
      popt.permutations.n_permutations = options.n_permutations;
      popt.permutations.seed = permutation_seed(options.master_seed, r);
      popt.grid_step = options.grid_step;
      std::optional<PvalueProfile> profile;
      try {
        profile = pvalue_profile(ds, options.effect, popt);
      } catch (const Error&) {
        continue;
      }
      for (std::size_t l = 0; l < levels; ++l) {
        try {
          intervals[r][l] = ci_from_profile(*profile, options.alphas[l]);
        } catch (const Error&) {
        }
      }
    }
  });

  std::vector<CoverageRow> rows;
  for (std::size_t l = 0; l < levels; ++l) {
    CoverageRow row;
    row.effect = options.effect;
    row.alpha = options.alphas[l];
    row.level = 1.0 - 2.0 * row.alpha;
    std::size_t covered = 0;
    std::vector<double> widths, midpoint_errors;
    for (const auto& per_level : intervals) {
      const auto& ci = per_level[l];
      if (!ci) {
        ++row.n_failed;
        continue;
      }
      ++row.n_replicates;
      if (ci->lower <= target && target <= ci->upper) ++covered;
      widths.push_back(ci->upper - ci->lower);
      midpoint_errors.push_back(std::abs(0.5 * (ci->lower + ci->upper) - target));
    }
    if (row.n_replicates) {
      row.coverage = static_cast<double>(covered) / static_cast<double>(row.n_replicates);
    }
    row.mc_std_error = mc_se(row.coverage, row.n_replicates);
    row.median_width = median_of(std::move(widths));
    row.median_midpoint_error = median_of(std::move(midpoint_errors));
    rows.push_back(row);
  }
  return rows;
}

void write_records_csv(const std::vector<ReplicateRecord>& records, std::ostream& out) {
  out << "index,n";
  for (const auto& info : parameter_table()) out << ',' << info.name;
  out << ",true_psi,true_beta,true_kappa,cor_qm,cor_zx";
  if (!records.empty()) {
    for (const auto& o : records.front().outcomes) {
      out << ',' << o.series << "_estimate," << o.series << "_p," << o.series << "_status";
    }
  }
  out << '\n';
  for (const auto& rec : records) {
    out << rec.index << ',' << rec.point.n;
    for (const auto& info : parameter_table()) out << ',' << fmt(rec.point.*info.member);
    out << ',' << fmt(rec.truth.psi) << ',' << fmt(rec.truth.beta) << ','
        << fmt(rec.truth.kappa) << ',' << na_or(rec.cor_qm) << ',' << na_or(rec.cor_zx);
    for (const auto& o : rec.outcomes) {
      out << ',' << na_or(o.estimate) << ',' << na_or(o.p_value) << ','
          << (o.degenerate() ? o.failure : "ok");
    }
    out << '\n';
  }
}

void write_curves_csv(const CurveTable& curves, std::ostream& out) {
  out << "kind,method,effect,alpha,rate,n_replicates,n_degenerate,mc_std_error\n";
  for (const auto& r : curves.rows) {
    out << to_string(r.kind) << ',' << r.method << ',' << to_string(r.effect) << ','
        << fmt(r.alpha) << ',' << fmt(r.rate) << ',' << r.n_replicates << ','
        << r.n_degenerate << ',' << fmt(r.mc_std_error) << '\n';
  }
}

void write_bias_csv(const std::vector<BiasSummary>& summaries, std::ostream& out) {
  out << "method,effect,n,mean";
  for (double q : kBiasQuantiles) out << ",q" << fmt(q);
  out << ",median_abs_error,tail_mass\n";
  for (const auto& s : summaries) {
    out << s.method << ',' << to_string(s.effect) << ',' << s.differences.size() << ','
        << fmt(s.mean);
    for (std::size_t k = 0; k < std::size(kBiasQuantiles); ++k) {
      out << ',' << (k < s.quantiles.size() ? fmt(s.quantiles[k].second) : "NA");
    }
    out << ',' << fmt(s.median_abs_error) << ',' << fmt(s.tail_mass) << '\n';
  }
}

void write_bias_differences_csv(const std::vector<BiasSummary>& summaries, std::ostream& out) {
  out << "method,effect,difference\n";
  for (const auto& s : summaries) {
    for (double d : s.differences) {
      out << s.method << ',' << to_string(s.effect) << ',' << fmt(d) << '\n';
    }
  }
}

void write_stratified_csv(const std::vector<StratumRow>& rows, std::ostream& out) {
  out << "stratifier,bin,lower,upper,method,alpha,rate,n_replicates\n";
  for (const auto& r : rows) {
    out << to_string(r.stratifier) << ',' << r.bin << ',' << fmt(r.lower) << ','
        << fmt(r.upper) << ',' << r.method << ',' << fmt(r.alpha) << ','
        << fmt(r.rate) << ',' << r.n_replicates << '\n';
  }
}

void write_consistency_csv(const std::vector<ConsistencyRow>& rows, std::ostream& out) {
  out << "n,method,effect,kind,median_abs_error,rate,mc_std_error,n_replicates,n_degenerate\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.method << ',' << to_string(r.effect) << ',' << to_string(r.kind) << ','
        << fmt(r.median_abs_error) << ',' << fmt(r.rate) << ','
        << fmt(r.mc_std_error) << ',' << r.n_replicates << ',' << r.n_degenerate << '\n';
  }
}

void write_coverage_csv(const std::vector<CoverageRow>& rows, std::ostream& out) {
  out << "effect,alpha,level,coverage,mc_std_error,n_replicates,n_failed,median_width,"
         "median_midpoint_error\n";
  for (const auto& r : rows) {
    out << to_string(r.effect) << ',' << fmt(r.alpha) << ',' << fmt(r.level)
        << ',' << fmt(r.coverage) << ',' << fmt(r.mc_std_error) << ','
        << r.n_replicates << ',' << r.n_failed << ',' << fmt(r.median_width) << ','
        << fmt(r.median_midpoint_error) << '\n';
  }
}

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_file(dir / "design.csv", [&](std::ostream& out) { write_design_csv(result.design, out); });
  write_file(dir / "records.csv", [&](std::ostream& out) { write_records_csv(result.records, out); });
  write_file(dir / "curves.csv", [&](std::ostream& out) { write_curves_csv(result.curves, out); });

  std::vector<BiasSummary> bias;
  if (!result.records.empty()) {
    for (const auto& o : result.records.front().outcomes) {
      bias.push_back(bias_summary(result.records, o.series));
    }
  }
  write_file(dir / "bias.csv", [&](std::ostream& out) { write_bias_csv(bias, out); });
  write_file(dir / "bias_differences.csv",
             [&](std::ostream& out) { write_bias_differences_csv(bias, out); });

  std::vector<double> alphas{0.05};
  auto rows = stratified_power(result.records, Stratifier::cor_qm, 3, alphas);
  const auto zx = stratified_power(result.records, Stratifier::cor_zx, 3, alphas);
  rows.insert(rows.end(), zx.begin(), zx.end());
  write_file(dir / "stratified.csv", [&](std::ostream& out) { write_stratified_csv(rows, out); });
}

}  // namespace placeboiv
