#include "placeboiv/estimators.hpp"

#include <algorithm>
#include <stdexcept>

#include "placeboiv/error.hpp"
#include "placeboiv/stats.hpp"

namespace placeboiv {

std::string_view to_string(EffectKind kind) noexcept {
  switch (kind) {
    case EffectKind::placebo_iv: return "placebo_iv";
    case EffectKind::treatment_iv_two_step: return "treatment_iv_two_step";
    case EffectKind::treatment_iv_unadjusted: return "treatment_iv_unadjusted";
    case EffectKind::itt_psi: return "itt_psi";
    case EffectKind::itt_beta: return "itt_beta";
    case EffectKind::ols_psi: return "ols_psi";
    case EffectKind::ols_beta: return "ols_beta";
    case EffectKind::kappa_iv: return "kappa_iv";
  }
  return "unknown";
}

const RegressionTerm& RegressionFit::term(std::string_view name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t;
  }
  throw std::out_of_range("regression term '" + std::string(name) + "' not present");
}

EffectEstimate iv_ratio(std::span<const double> instrument, std::span<const double> response,
                        std::span<const double> regressor, EffectKind kind,
                        const std::string& label) {
  const double denominator = sample_cov(instrument, regressor);
  if (is_degenerate_cov(denominator, instrument, regressor)) throw DegenerateInstrument(label);
  const double numerator = sample_cov(instrument, response);
  return {numerator / denominator, numerator, denominator, kind};
}

EffectEstimate placebo_iv(const TrialDataset& ds) {
  return iv_ratio(ds.q, ds.y, ds.m, EffectKind::placebo_iv, "cov(Q,M)");
}

Residuals placebo_residuals(const TrialDataset& ds, double psi_hat) {
  Residuals r{std::vector<double>(ds.size()), "placebo term"};
  for (std::size_t k = 0; k < ds.size(); ++k) r.values[k] = ds.y[k] - psi_hat * ds.m[k];
  return r;
}

EffectEstimate treatment_iv_two_step(const TrialDataset& ds) {
  const auto psi = placebo_iv(ds);
  const auto residuals = placebo_residuals(ds, psi.value);
  return iv_ratio(ds.z, residuals.values, ds.x, EffectKind::treatment_iv_two_step, "cov(Z,X)");
}

EffectEstimate treatment_iv_adjusted(const TrialDataset& ds, double psi) {
  const auto residuals = placebo_residuals(ds, psi);
  return iv_ratio(ds.z, residuals.values, ds.x, EffectKind::treatment_iv_two_step, "cov(Z,X)");
}

EffectEstimate treatment_iv_unadjusted(const TrialDataset& ds) {
  return iv_ratio(ds.z, ds.y, ds.x, EffectKind::treatment_iv_unadjusted, "cov(Z,X)");
}

EffectEstimate itt(std::span<const double> arm, std::span<const double> response, EffectKind kind) {
  if (arm.size() != response.size()) throw std::invalid_argument("itt: length mismatch");
  double sum1 = 0.0, sum0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t k = 0; k < arm.size(); ++k) {
    if (arm[k] != 0.0) {
      sum1 += response[k];
      ++n1;
    } else {
      sum0 += response[k];
      ++n0;
    }
  }
  if (n1 == 0) throw EmptyArm("no participants with instrument = 1");
  if (n0 == 0) throw EmptyArm("no participants with instrument = 0");
  const double value = sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
  return {value, sample_cov(arm, response), sample_var(arm), kind};
}

EffectEstimate itt_psi(const TrialDataset& ds) { return itt(ds.q, ds.y, EffectKind::itt_psi); }

EffectEstimate itt_beta(const TrialDataset& ds, const Residuals& residuals) {
  return itt(ds.z, residuals.values, EffectKind::itt_beta);
}

namespace {

RegressionFit to_fit(const OlsSolution& sol, const std::vector<std::string>& names) {
  RegressionFit fit;
  fit.r_squared = sol.r_squared;
  fit.df = sol.df;
  for (std::size_t j = 0; j < names.size(); ++j) {
    RegressionTerm t;
    t.name = names[j];
    t.coefficient = sol.coefficients[static_cast<Eigen::Index>(j)];
    t.standard_error = sol.standard_errors[static_cast<Eigen::Index>(j)];
    t.t_statistic = t.coefficient / t.standard_error;
    t.p_value = student_t_two_sided(t.t_statistic, static_cast<double>(sol.df));
    fit.terms.push_back(std::move(t));
  }
  return fit;
}

Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

RegressionFit ols_fit(const TrialDataset& ds, bool include_a) {
  const bool with_a = include_a && ds.a.has_value();
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::MatrixXd design(n, with_a ? 4 : 3);
  design.col(0).setOnes();
  design.col(1) = to_eigen(ds.x);
  design.col(2) = to_eigen(ds.m);
  std::vector<std::string> names = {"intercept", "beta", "psi"};
  if (with_a) {
    design.col(3) = to_eigen(*ds.a);
    names.push_back("kappa");
  }
  const auto sol = ols_solve(design, to_eigen(ds.y), with_a ? "Y ~ 1 + X + M + A" : "Y ~ 1 + X + M");
  return to_fit(sol, names);
}

namespace {

std::span<const double> column_by_name(const TrialDataset& ds, const std::string& name) {
  if (name == "z") return ds.z;
  if (name == "q") return ds.q;
  if (name == "x") return ds.x;
  if (name == "e") return ds.e;
  if (name == "d") return ds.d;
  if (name == "i") return ds.i;
  if (name == "m") return ds.m;
  if (name == "y") return ds.y;
  if (name == "a" && ds.a) return *ds.a;
  if (name == "w" && ds.w) return *ds.w;
  if (const auto* c = ds.covariate(name)) return c->values;
  throw std::invalid_argument("dataset has no column '" + name + "'");
}

}  // namespace

std::vector<Residuals> residualize_on_covariates(const TrialDataset& ds,
                                                 const std::vector<std::string>& targets,
                                                 const std::vector<std::string>& covariates) {
  std::vector<std::string> names = covariates;
  if (names.empty()) {
    for (const auto& c : ds.covariates) names.push_back(c.name);
  }
  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(names.size() + 1));
  design.col(0).setOnes();
  std::string description = "observed covariates";
  for (std::size_t j = 0; j < names.size(); ++j) {
    design.col(static_cast<Eigen::Index>(j + 1)) = to_eigen(column_by_name(ds, names[j]));
    description += (j ? "," : ": ") + names[j];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols() || n <= design.cols()) {
    throw RankDeficient("covariate matrix (intercept + " + std::to_string(names.size()) + " columns)");
  }

  std::vector<Residuals> out;
  for (const auto& target : targets) {
    const Eigen::VectorXd y = to_eigen(column_by_name(ds, target));
    const Eigen::VectorXd fitted = design * qr.solve(y);
    const Eigen::VectorXd resid = y - fitted;
    out.push_back({std::vector<double>(resid.data(), resid.data() + resid.size()), description});
  }
  return out;
}

CovariateAdjustedEstimates estimate_with_covariates(const TrialDataset& ds,
                                                    const std::vector<std::string>& covariates) {
  const auto res = residualize_on_covariates(ds, {"x", "m", "y"}, covariates);
  const auto& x = res[0].values;
  const auto& m = res[1].values;
  const auto& y = res[2].values;
  const auto psi = iv_ratio(ds.q, y, m, EffectKind::placebo_iv, "cov(Q,M)");
  std::vector<double> r(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) r[k] = y[k] - psi.value * m[k];
  const auto beta = iv_ratio(ds.z, r, x, EffectKind::treatment_iv_two_step, "cov(Z,X)");
  return {psi, beta};
}

MultiMediatorEstimate multi_mediator_two_step(const TrialDataset& ds) {
  if (!ds.has_extended()) throw std::invalid_argument("multi_mediator_two_step: dataset lacks columns a and w");
  MultiMediatorEstimate out;
  out.psi = placebo_iv(ds);
  out.kappa = iv_ratio(*ds.w, ds.y, *ds.a, EffectKind::kappa_iv, "cov(W,A)");
  std::vector<double> r(ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) {
    r[k] = ds.y[k] - out.psi.value * ds.m[k] - out.kappa.value * (*ds.a)[k];
  }
  out.beta = iv_ratio(ds.z, r, ds.x, EffectKind::treatment_iv_two_step, "cov(Z,X)");
  return out;
}

Diagnostics diagnostics(const TrialDataset& ds) {
  Diagnostics out;
  out.cor_qm = correlation(ds.q, ds.m);
  out.cor_zx = correlation(ds.z, ds.x);
  out.cor_qd = correlation(ds.q, ds.d);

  const auto n = static_cast<Eigen::Index>(ds.size());
  Eigen::MatrixXd design(n, 4);
  design.col(0).setOnes();
  design.col(1) = to_eigen(ds.e);
  design.col(2) = to_eigen(ds.d);
  design.col(3) = to_eigen(ds.i);
  try {
    out.desire_expectation_r2 = ols_solve(design, to_eigen(ds.m), "M ~ 1 + E + D + I").r_squared;
  } catch (const RankDeficient&) {
    out.desire_expectation_r2.reset();
  }
  return out;
}

PretestOutcome pretest_strategy(const TrialDataset& ds, double alpha_pretest,
                                const PlaceboTest& placebo_test) {
  PretestOutcome out;
  out.pretest_p_value = placebo_test(ds);
  out.two_step = out.pretest_p_value < alpha_pretest;
  out.estimate = out.two_step ? treatment_iv_two_step(ds) : treatment_iv_unadjusted(ds);
  return out;
}

}  // namespace placeboiv
