#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "placeboiv/trial_data.hpp"

namespace placeboiv {

enum class EffectKind {
  placebo_iv,
  treatment_iv_two_step,
  treatment_iv_unadjusted,
  itt_psi,
  itt_beta,
  ols_psi,
  ols_beta,
  kappa_iv,
};

std::string_view to_string(EffectKind kind) noexcept;

/// A ratio estimate value = numerator / denominator, both sample moments.
struct EffectEstimate {
  double value = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  EffectKind kind = EffectKind::placebo_iv;
};

struct RegressionTerm {
  std::string name;
  double coefficient = 0.0;
  double standard_error = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
};

struct RegressionFit {
  std::vector<RegressionTerm> terms;
  double r_squared = 0.0;
  std::size_t df = 0;

  /// Throws std::out_of_range for unknown names.
  const RegressionTerm& term(std::string_view name) const;
};

struct Residuals {
  std::vector<double> values;
  std::string adjusted_by;
};

/// cov(instrument, response) / cov(instrument, regressor). `label` names the
/// denominator in the DegenerateInstrument error, e.g. "cov(Q,M)".
EffectEstimate iv_ratio(std::span<const double> instrument, std::span<const double> response,
                        std::span<const double> regressor, EffectKind kind,
                        const std::string& label);

/// Placebo effect psi-hat = cov(Q,Y) / cov(Q,M).
EffectEstimate placebo_iv(const TrialDataset& dataset);

/// R-hat = Y - psi_hat * M.
Residuals placebo_residuals(const TrialDataset& dataset, double psi_hat);

/// beta-hat = cov(Z, R-hat) / cov(Z, X) with psi-hat from the same data.
EffectEstimate treatment_iv_two_step(const TrialDataset& dataset);

/// cov(Z, Y - psi M) / cov(Z, X) for a supplied psi (e.g. the simulation truth).
EffectEstimate treatment_iv_adjusted(const TrialDataset& dataset, double psi);

/// beta-hat = cov(Z, Y) / cov(Z, X); ignores the placebo pathway.
EffectEstimate treatment_iv_unadjusted(const TrialDataset& dataset);

/// Difference of group means of `response` between arm == 1 and arm == 0.
/// Records numerator cov(arm, response) and denominator var(arm).
EffectEstimate itt(std::span<const double> arm, std::span<const double> response, EffectKind kind);
EffectEstimate itt_psi(const TrialDataset& dataset);
EffectEstimate itt_beta(const TrialDataset& dataset, const Residuals& residuals);

/// OLS of Y on (1, X, M), plus A when `include_a` and the dataset carries it.
/// Terms: "intercept", "beta", "psi" [, "kappa"].
RegressionFit ols_fit(const TrialDataset& dataset, bool include_a = false);

/// OLS residuals of each named target column on (1, covariates). An empty
/// covariate list means every c_* column. Throws RankDeficient.
std::vector<Residuals> residualize_on_covariates(const TrialDataset& dataset,
                                                 const std::vector<std::string>& targets,
                                                 const std::vector<std::string>& covariates = {});

/// Placebo and two-step treatment estimates after replacing x, m and y by
/// their residuals on the observed covariates. Instruments stay untouched.
struct CovariateAdjustedEstimates {
  EffectEstimate psi;
  EffectEstimate beta;
};
CovariateAdjustedEstimates estimate_with_covariates(const TrialDataset& dataset,
                                                    const std::vector<std::string>& covariates = {});

struct MultiMediatorEstimate {
  EffectEstimate psi;
  EffectEstimate kappa;
  EffectEstimate beta;
};

/// Two-step estimator with a second mediator A and its instrument W:
/// beta* = cov(Z, Y - psi_hat M - kappa_hat A) / cov(Z, X).
MultiMediatorEstimate multi_mediator_two_step(const TrialDataset& dataset);

struct Diagnostics {
  std::optional<double> cor_qm;
  std::optional<double> cor_zx;
  std::optional<double> cor_qd;
  /// R^2 of M on (1, E, D, I); nullopt when that design is rank deficient.
  std::optional<double> desire_expectation_r2;
};

Diagnostics diagnostics(const TrialDataset& dataset);

/// Returns the two-sided p-value of a test of H0: psi = 0 on a dataset.
using PlaceboTest = std::function<double(const TrialDataset&)>;

struct PretestOutcome {
  EffectEstimate estimate;
  bool two_step = false;
  double pretest_p_value = 1.0;
};

/// Two-step estimate when the placebo test rejects (p < alpha_pretest),
/// otherwise the unadjusted estimate.
PretestOutcome pretest_strategy(const TrialDataset& dataset, double alpha_pretest,
                                const PlaceboTest& placebo_test);

}  // namespace placeboiv
