#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "placeboiv/design.hpp"
#include "placeboiv/error.hpp"
#include "placeboiv/rand_inference.hpp"
#include "placeboiv/simulator.hpp"

namespace placeboiv {

enum class Method {
  iv_placebo,
  iv_two_step,
  iv_unadjusted,
  iv_true_psi_adjusted,
  ols,
  pretest,
  multi_mediator,
};

std::string_view to_string(Method method) noexcept;
std::optional<Method> parse_method(std::string_view name) noexcept;

/// One reported column of estimates and p-values. `ols` yields ols_psi and
/// ols_beta; `multi_mediator` yields iv_psi_kappa_adjusted and
/// iv_true_psi_kappa_adjusted; every other method yields one series of its own name.
struct Series {
  std::string name;
  Effect effect;
};

std::vector<Series> method_series(Method method);

/// 0.002, 0.004, ..., 0.2
std::vector<double> default_alpha_grid();

struct ExperimentPlan {
  std::string name = "experiment";
  ScenarioConfig scenario;
  std::size_t n_points = 1000;
  std::size_t n_min = 100;
  std::size_t n_max = 1000;
  /// Parameters held fixed instead of sampled; "n" is allowed.
  std::vector<std::pair<std::string, double>> fixed;
  DesignOptimizer optimizer = DesignOptimizer::maximin_swap;
  std::size_t design_iterations = 10000;
  std::vector<Method> methods;
  /// 0 skips every randomization test and records estimates only.
  std::size_t n_permutations = 999;
  std::vector<double> alpha_grid = default_alpha_grid();
  double pretest_alpha = 0.05;
  std::uint64_t master_seed = 0;
};

/// Throws ConfigError pointing into the plan document ("/methods/2", ...).
void validate_plan(const ExperimentPlan& plan);

/// Free scenario parameters plus n, minus the fixed ones.
DesignSpec design_spec(const ExperimentPlan& plan);
ParameterPoint point_from_design(const ExperimentPlan& plan, const Design& design, std::size_t row);

/// Seed streams of replicate `index`.
RngSeedPlan dataset_seeds(std::uint64_t master_seed, std::size_t index) noexcept;
std::uint64_t permutation_seed(std::uint64_t master_seed, std::size_t index) noexcept;

struct MethodOutcome {
  std::string series;
  Effect effect = Effect::beta;
  std::optional<double> estimate;
  std::optional<double> p_value;
  /// Error name (e.g. "DegenerateInstrument") when the replicate could not be evaluated.
  std::string failure;

  bool degenerate() const noexcept { return !failure.empty(); }
};

struct ReplicateRecord {
  std::size_t index = 0;
  ParameterPoint point;
  TrueEffects truth;
  std::optional<double> cor_qm;
  std::optional<double> cor_zx;
  std::vector<MethodOutcome> outcomes;

  const MethodOutcome* outcome(std::string_view series) const noexcept;
};

/// Evaluates every requested method on one dataset. All randomization tests
/// of the replicate share the permutation stream of `permutation_options`,
/// so each p-value equals the one the standalone test returns. The plan's
/// n_permutations only decides whether tests run (0 skips them); the budget
/// itself comes from `permutation_options`.
ReplicateRecord evaluate_replicate(const ExperimentPlan& plan, std::size_t index,
                                   const ParameterPoint& point, const TrialDataset& dataset,
                                   const PermutationOptions& permutation_options);

/// treatment_rand_test with residuals Y - true_psi M.
RandTestResult true_psi_adjusted_test(const TrialDataset& dataset, double true_psi,
                                      const PermutationOptions& options);

enum class CurveKind { type1, power };
std::string_view to_string(CurveKind kind) noexcept;

/// type1 when the scenario pins the tested effect to 0.
CurveKind curve_kind(const ScenarioConfig& scenario, Effect effect) noexcept;

struct CurveRow {
  double alpha = 0.0;
  std::string method;
  Effect effect = Effect::beta;
  CurveKind kind = CurveKind::type1;
  /// Fraction of non-degenerate replicates with p <= alpha.
  double rate = 0.0;
  std::size_t n_replicates = 0;
  std::size_t n_degenerate = 0;
  /// sqrt(rate (1 - rate) / n_replicates)
  double mc_std_error = 0.0;
};

struct CurveTable {
  std::vector<CurveRow> rows;

  /// Throws std::out_of_range when absent. Alpha is matched within 1e-12.
  const CurveRow& at(std::string_view method, double alpha) const;
};

CurveTable compute_curves(const std::vector<ReplicateRecord>& records,
                          const ScenarioConfig& scenario, const std::vector<double>& alpha_grid);

/// Rejection rate of one series at one alpha (p <= alpha).
CurveRow rejection_rate(const std::vector<ReplicateRecord>& records, const ScenarioConfig& scenario,
                        std::string_view series, double alpha);

struct ExperimentResult {
  ExperimentPlan plan;
  Design design;
  std::vector<ReplicateRecord> records;
  CurveTable curves;
};

/// One dataset per design point; replicates run on `workers` threads and
/// land in index order, so the result does not depend on `workers`.
ExperimentResult run_experiment(const ExperimentPlan& plan, std::size_t workers = 1);

struct BiasSummary {
  std::string method;
  Effect effect = Effect::beta;
  /// true - estimate, in replicate order, degenerate replicates skipped.
  std::vector<double> differences;
  std::vector<std::pair<double, double>> quantiles;
  double mean = 0.0;
  double median_abs_error = 0.0;
  /// Fraction of |difference| > 0.5.
  double tail_mass = 0.0;
};

inline constexpr double kBiasQuantiles[] = {0.05, 0.25, 0.5, 0.75, 0.95};
inline constexpr double kBiasTailThreshold = 0.5;

BiasSummary bias_summary(const std::vector<ReplicateRecord>& records, std::string_view series);

enum class Stratifier { cor_qm, cor_zx };
std::string_view to_string(Stratifier s) noexcept;

struct StratumRow {
  Stratifier stratifier = Stratifier::cor_qm;
  std::size_t bin = 0;
  double lower = 0.0;
  double upper = 0.0;
  std::string method;
  double alpha = 0.0;
  double rate = 0.0;
  std::size_t n_replicates = 0;
};

/// Equal-count bins of the diagnostic correlation (replicates lacking it are
/// left out); one row per (bin, series, alpha). Empty bins report zero counts.
std::vector<StratumRow> stratified_power(const std::vector<ReplicateRecord>& records,
                                         Stratifier stratifier, std::size_t bins,
                                         const std::vector<double>& alphas);

struct ConsistencyOptions {
  ScenarioConfig scenario;
  std::vector<std::size_t> n_grid{300, 900, 2700};
  std::size_t replicates_per_n = 300;
  std::vector<Method> methods{Method::iv_placebo, Method::iv_two_step};
  std::size_t n_permutations = 999;
  double alpha = 0.05;
  std::uint64_t master_seed = 0;
};

struct ConsistencyRow {
  std::size_t n = 0;
  std::string method;
  Effect effect = Effect::beta;
  CurveKind kind = CurveKind::type1;
  double median_abs_error = 0.0;
  /// Rejection rate at the study alpha; NaN when tests were skipped.
  double rate = 0.0;
  double mc_std_error = 0.0;
  std::size_t n_replicates = 0;
  std::size_t n_degenerate = 0;
};

/// Every n reuses the same parameter design and data streams, so the
/// comparison across n is paired.
std::vector<ConsistencyRow> consistency_study(const ConsistencyOptions& options,
                                              std::size_t workers = 1);

struct CoverageOptions {
  ScenarioConfig scenario;
  ParameterPoint point;
  std::size_t replicates = 500;
  /// Each alpha gives a 100 (1 - 2 alpha)% interval.
  std::vector<double> alphas{0.05};
  Effect effect = Effect::psi;
  std::size_t n_permutations = 999;
  std::optional<double> grid_step;
  std::uint64_t master_seed = 0;
};

struct CoverageRow {
  Effect effect = Effect::psi;
  double alpha = 0.0;
  double level = 0.0;
  double coverage = 0.0;
  double mc_std_error = 0.0;
  std::size_t n_replicates = 0;
  /// Replicates whose interval could not be formed (degenerate or too narrow).
  std::size_t n_failed = 0;
  double median_width = 0.0;
  double median_midpoint_error = 0.0;
};

std::vector<CoverageRow> coverage_study(const CoverageOptions& options, std::size_t workers = 1);

void write_records_csv(const std::vector<ReplicateRecord>& records, std::ostream& out);
void write_curves_csv(const CurveTable& curves, std::ostream& out);
void write_bias_csv(const std::vector<BiasSummary>& summaries, std::ostream& out);
void write_bias_differences_csv(const std::vector<BiasSummary>& summaries, std::ostream& out);
void write_stratified_csv(const std::vector<StratumRow>& rows, std::ostream& out);
void write_consistency_csv(const std::vector<ConsistencyRow>& rows, std::ostream& out);
void write_coverage_csv(const std::vector<CoverageRow>& rows, std::ostream& out);

/// Writes design.csv, records.csv, curves.csv, bias.csv, bias_differences.csv
/// and stratified.csv (3 bins per stratifier) into `dir`, creating it.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

/// Opens `path` for writing and calls `writer(stream)`; throws IoError.
template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  writer(out);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace placeboiv
