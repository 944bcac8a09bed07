#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace placeboiv {

double mean(std::span<const double> values);

/// Moment covariance (1/n) sum u v - mean(u) mean(v), evaluated in centered
/// two-pass form. Divisor n. Throws std::invalid_argument when the lengths
/// differ or are below 2.
double sample_cov(std::span<const double> u, std::span<const double> v);
double sample_var(std::span<const double> u);
/// Standard deviation with divisor n.
double sample_sd(std::span<const double> u);

/// Pearson correlation; nullopt when either column has zero variance.
std::optional<double> correlation(std::span<const double> u, std::span<const double> v);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

/// True when |denominator| is numerically zero relative to the scales of u, v.
bool is_degenerate_cov(double cov, std::span<const double> u, std::span<const double> v);

struct OlsSolution {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd residuals;
  double rss = 0.0;
  double r_squared = 0.0;
  std::size_t df = 0;
};

/// Least squares by column-pivoted QR. Classical standard errors with n - p
/// degrees of freedom. Throws RankDeficient (naming `what`) when the design
/// has rank below its column count or n <= p.
OlsSolution ols_solve(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                      const std::string& what);

/// Two-sided p-value of a Student t statistic.
double student_t_two_sided(double t, double df);

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and
/// Uniform(0, 1).
double ks_distance_uniform(std::vector<double> values);

}  // namespace placeboiv
