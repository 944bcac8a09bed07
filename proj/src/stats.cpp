#include "placeboiv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "placeboiv/error.hpp"

namespace placeboiv {

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean of empty vector");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_cov(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("sample_cov: length mismatch");
  if (u.size() < 2) throw std::invalid_argument("sample_cov: need at least 2 observations");
  const double mu = mean(u);
  const double mv = mean(v);
  double sum = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) sum += (u[k] - mu) * (v[k] - mv);
  return sum / static_cast<double>(u.size());
}

double sample_var(std::span<const double> u) { return sample_cov(u, u); }

double sample_sd(std::span<const double> u) { return std::sqrt(std::max(0.0, sample_var(u))); }

std::optional<double> correlation(std::span<const double> u, std::span<const double> v) {
  const double su = sample_sd(u);
  const double sv = sample_sd(v);
  if (su == 0.0 || sv == 0.0) return std::nullopt;
  return std::clamp(sample_cov(u, v) / (su * sv), -1.0, 1.0);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty vector");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

bool is_degenerate_cov(double cov, std::span<const double> u, std::span<const double> v) {
  constexpr double kRelativeTolerance = 1e-10;
  const double scale = sample_sd(u) * sample_sd(v) + std::numeric_limits<double>::epsilon();
  return std::abs(cov) <= kRelativeTolerance * scale;
}

OlsSolution ols_solve(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                      const std::string& what) {
  const auto n = design.rows();
  const auto p = design.cols();
  if (response.size() != n) throw std::invalid_argument("ols_solve: response length mismatch");
  if (n <= p) throw RankDeficient(what + " (n <= number of columns)");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw RankDeficient(what);

  OlsSolution out;
  out.coefficients = qr.solve(response);
  out.residuals = response - design * out.coefficients;
  out.rss = out.residuals.squaredNorm();
  out.df = static_cast<std::size_t>(n - p);

  const double centered_tss = (response.array() - response.mean()).square().sum();
  out.r_squared = centered_tss > 0.0 ? 1.0 - out.rss / centered_tss : 1.0;

  // (X'X)^{-1} = P R^{-1} R^{-T} P^T from the pivoted QR factor.
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd unpivoted = r_inv * r_inv.transpose();
  const Eigen::MatrixXd xtx_inv =
      qr.colsPermutation() * unpivoted * qr.colsPermutation().transpose();
  const double sigma2 = out.rss / static_cast<double>(out.df);
  out.standard_errors = (sigma2 * xtx_inv.diagonal().array()).sqrt();
  return out;
}

double student_t_two_sided(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

double ks_distance_uniform(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("ks_distance_uniform: no values");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double x = std::clamp(values[k], 0.0, 1.0);
    d = std::max({d, static_cast<double>(k + 1) / n - x, x - static_cast<double>(k) / n});
  }
  return d;
}

}  // namespace placeboiv
