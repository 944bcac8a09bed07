#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "placeboiv/estimators.hpp"
#include "placeboiv/rng.hpp"
#include "placeboiv/simulator.hpp"
#include "placeboiv/stats.hpp"

using namespace placeboiv;
using Catch::Approx;

namespace {

// Six participants; all moments below are worked out by hand.
TrialDataset hand_dataset() {
  TrialDataset ds;
  ds.z = {1, 1, 1, 0, 0, 0};
  ds.x = {1, 1, 0, 0, 0, 1};
  ds.q = {1, 0, 1, 0, 1, 0};
  ds.e = {1, 0, 1, 0, 1, 0};
  ds.d = {1, 1, 0, 0, 1, 0};
  ds.i = {1, 0, 0, 0, 1, 0};
  ds.m = {3, 1, 2, 0, 4, 2};
  ds.y = {5, 2, 3, 1, 6, 1};
  return ds;
}

double raw_cov(const std::vector<double>& u, const std::vector<double>& v) {
  double su = 0, sv = 0, suv = 0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    su += u[k];
    sv += v[k];
    suv += u[k] * v[k];
  }
  const double n = static_cast<double>(u.size());
  return suv / n - su * sv / (n * n);
}

TrialDataset linear_dataset(std::uint64_t seed, std::size_t n, double psi, double beta) {
  CounterRng rng(seed, 1);
  TrialDataset ds;
  for (std::size_t k = 0; k < n; ++k) {
    const double z = rng.bernoulli_half(), q = rng.bernoulli_half();
    const double u = rng.normal();
    const double x = (0.8 * z + 0.3 * u + 0.2 * rng.normal()) > 0.4 ? 1.0 : 0.0;
    const double m = 1.5 * q + u + rng.normal();
    ds.z.push_back(z);
    ds.q.push_back(q);
    ds.x.push_back(x);
    ds.e.push_back(0);
    ds.d.push_back(0);
    ds.i.push_back(0);
    ds.m.push_back(m);
    ds.y.push_back(beta * x + psi * m + u + rng.normal());
  }
  return ds;
}

}  // namespace

TEST_CASE("placebo and treatment estimates on a hand example") {
  const auto ds = hand_dataset();
  // cov(Q,Y) = 14/6 - 3*18/36 = 5/6; cov(Q,M) = 9/6 - 3*12/36 = 1/2.
  const auto psi = placebo_iv(ds);
  CHECK(psi.numerator == Approx(5.0 / 6));
  CHECK(psi.denominator == Approx(0.5));
  CHECK(psi.value == Approx(5.0 / 3));
  // cov(Z,Y) = 10/6 - 18/12 = 1/6; cov(Z,X) = 2/6 - 9/36 = 1/12.
  const auto unadj = treatment_iv_unadjusted(ds);
  CHECK(unadj.value == Approx(2.0));
  // cov(Z,M) = 6/6 - 36/36 = 0, so the two-step estimate equals the unadjusted one.
  CHECK(treatment_iv_two_step(ds).value == Approx(2.0));
  CHECK(treatment_iv_adjusted(ds, 0.0).value == Approx(unadj.value));
}

TEST_CASE("estimators agree with a raw-moment oracle") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto ds = linear_dataset(s, 400, 0.7, -1.2);
    const double psi = raw_cov(ds.q, ds.y) / raw_cov(ds.q, ds.m);
    CHECK(placebo_iv(ds).value == Approx(psi).epsilon(1e-9));
    std::vector<double> r(ds.size());
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = ds.y[k] - psi * ds.m[k];
    CHECK(treatment_iv_two_step(ds).value == Approx(raw_cov(ds.z, r) / raw_cov(ds.z, ds.x)).epsilon(1e-8));
    CHECK(treatment_iv_unadjusted(ds).value ==
          Approx(raw_cov(ds.z, ds.y) / raw_cov(ds.z, ds.x)).epsilon(1e-9));
    const auto res = placebo_residuals(ds, psi);
    for (std::size_t k = 0; k < r.size(); ++k) CHECK(res.values[k] == Approx(r[k]));
  }
}

TEST_CASE("itt is the mean difference and cov over var") {
  const auto ds = hand_dataset();
  const auto e = itt_psi(ds);
  // Y mean for Q = 1: (5 + 3 + 6) / 3; for Q = 0: (2 + 1 + 1) / 3.
  CHECK(e.value == Approx(14.0 / 3 - 4.0 / 3));
  CHECK(e.value == Approx(e.numerator / e.denominator));
  // Wald identity: psi-hat = ITT(Y) / ITT(M) for a binary instrument.
  const auto m_itt = itt(ds.q, ds.m, EffectKind::itt_psi);
  CHECK(placebo_iv(ds).value == Approx(e.value / m_itt.value));
}

TEST_CASE("itt rejects an empty arm") {
  const std::vector<double> arm{1, 1, 1, 1}, y{1, 2, 3, 4};
  CHECK_THROWS_AS(itt(arm, y, EffectKind::itt_psi), EmptyArm);
}

TEST_CASE("degenerate instruments raise") {
  auto ds = hand_dataset();
  ds.m = {1, 1, 1, 1, 1, 1};
  try {
    placebo_iv(ds);
    FAIL("expected DegenerateInstrument");
  } catch (const DegenerateInstrument& e) {
    CHECK(e.covariance() == "cov(Q,M)");
  }
  auto ds2 = hand_dataset();
  ds2.x = {1, 0, 0, 1, 0, 0};  // cov(Z,X) = 1/6 - 6/36 = 0
  CHECK_THROWS_AS(treatment_iv_unadjusted(ds2), DegenerateInstrument);
  ds2.x = {1, 1, 0, 1, 0, 0};  // cov(Z,X) = 2/6 - 9/36 = 1/12
  CHECK_NOTHROW(treatment_iv_unadjusted(ds2));
}

TEST_CASE("estimators are consistent on a linear model") {
  const auto ds = linear_dataset(42, 200000, 0.7, -1.2);
  CHECK(placebo_iv(ds).value == Approx(0.7).margin(0.03));
  CHECK(treatment_iv_two_step(ds).value == Approx(-1.2).margin(0.1));
  CHECK(treatment_iv_adjusted(ds, 0.7).value == Approx(-1.2).margin(0.1));
}

TEST_CASE("ols fit matches normal equations") {
  const auto ds = linear_dataset(5, 500, 0.4, 1.0);
  const auto fit = ols_fit(ds);
  Eigen::MatrixXd design(ds.size(), 3);
  Eigen::VectorXd y(ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) {
    design.row(static_cast<Eigen::Index>(k)) << 1.0, ds.x[k], ds.m[k];
    y(static_cast<Eigen::Index>(k)) = ds.y[k];
  }
  const Eigen::VectorXd b = (design.transpose() * design).ldlt().solve(design.transpose() * y);
  CHECK(fit.term("intercept").coefficient == Approx(b(0)).epsilon(1e-9));
  CHECK(fit.term("beta").coefficient == Approx(b(1)).epsilon(1e-9));
  CHECK(fit.term("psi").coefficient == Approx(b(2)).epsilon(1e-9));
  const auto& psi = fit.term("psi");
  CHECK(psi.t_statistic == Approx(psi.coefficient / psi.standard_error));
  CHECK(psi.p_value == Approx(student_t_two_sided(psi.t_statistic, static_cast<double>(fit.df))));
  CHECK(fit.df == ds.size() - 3);
  CHECK_THROWS_AS(fit.term("kappa"), std::out_of_range);
}

TEST_CASE("covariate adjustment with no real confounding leaves estimates close") {
  auto ds = linear_dataset(6, 3000, 0.5, 1.0);
  CounterRng rng(6, 99);
  Covariate c{"c_noise", {}};
  for (std::size_t k = 0; k < ds.size(); ++k) c.values.push_back(rng.normal());
  ds.covariates.push_back(c);
  const auto adj = estimate_with_covariates(ds);
  CHECK(adj.psi.value == Approx(placebo_iv(ds).value).margin(0.05));
  const auto res = residualize_on_covariates(ds, {"y"});
  REQUIRE(res.size() == 1);
  CHECK(sample_cov(res[0].values, c.values) == Approx(0.0).margin(1e-10));
}

TEST_CASE("multi-mediator two-step") {
  CounterRng rng(11, 0);
  TrialDataset ds;
  ds.a.emplace();
  ds.w.emplace();
  const std::size_t n = 100000;
  for (std::size_t k = 0; k < n; ++k) {
    const double z = rng.bernoulli_half(), q = rng.bernoulli_half(), w = rng.bernoulli_half();
    const double u = rng.normal();
    const double m = q + u + rng.normal();
    const double a = w + 0.5 * z - u + rng.normal();
    const double x = z;
    ds.z.push_back(z);
    ds.q.push_back(q);
    ds.w->push_back(w);
    ds.x.push_back(x);
    ds.e.push_back(0);
    ds.d.push_back(0);
    ds.i.push_back(0);
    ds.m.push_back(m);
    ds.a->push_back(a);
    ds.y.push_back(2.0 * x + 0.5 * m - 0.8 * a + u + rng.normal());
  }
  const auto est = multi_mediator_two_step(ds);
  CHECK(est.psi.value == Approx(0.5).margin(0.03));
  CHECK(est.kappa.value == Approx(-0.8).margin(0.03));
  // Treatment raises A by 0.5, which shifts Y by -0.4 unless A is removed.
  CHECK(est.beta.value == Approx(2.0).margin(0.05));
  CHECK(treatment_iv_two_step(ds).value == Approx(1.6).margin(0.05));
}

TEST_CASE("pretest strategy switches on the placebo p-value") {
  const auto ds = linear_dataset(12, 400, 0.8, 1.0);
  const auto adjust = pretest_strategy(ds, 0.05, [](const TrialDataset&) { return 0.01; });
  CHECK(adjust.two_step);
  CHECK(adjust.estimate.value == Approx(treatment_iv_two_step(ds).value));
  const auto keep = pretest_strategy(ds, 0.05, [](const TrialDataset&) { return 0.05; });
  CHECK_FALSE(keep.two_step);  // strict p < alpha
  CHECK(keep.estimate.value == Approx(treatment_iv_unadjusted(ds).value));
}

TEST_CASE("diagnostics") {
  const auto ds = linear_dataset(13, 2000, 0.5, 1.0);
  const auto d = diagnostics(ds);
  REQUIRE(d.cor_qm.has_value());
  CHECK(*d.cor_qm == Approx(*correlation(ds.q, ds.m)));
  CHECK_FALSE(d.cor_qd.has_value());  // D is constant here
}

TEST_CASE("moment identity links IV estimates and ITT") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto ds = linear_dataset(100 + s, 50 + 10 * s, 0.3 * static_cast<double>(s % 5) - 0.6, 1.0);
    const auto psi = placebo_iv(ds);
    const double k1 = sample_cov(ds.q, ds.m) / sample_var(ds.q);
    CHECK(psi.value * k1 == Approx(itt_psi(ds).value).epsilon(1e-12));
    const auto beta = treatment_iv_two_step(ds);
    const double k2 = sample_cov(ds.z, ds.x) / sample_var(ds.z);
    CHECK(beta.value * k2 == Approx(itt_beta(ds, placebo_residuals(ds, psi.value)).value).epsilon(1e-12));
  }
}

TEST_CASE("shifting Y changes nothing, scaling Y scales the estimates") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto ds = linear_dataset(200 + s, 300, 0.5, -0.7);
    auto shifted = ds;
    auto scaled = ds;
    const double c = -2.5;
    for (auto& v : shifted.y) v += 17.0;
    for (auto& v : scaled.y) v *= c;
    CHECK(placebo_iv(shifted).value == Approx(placebo_iv(ds).value).epsilon(1e-9));
    CHECK(treatment_iv_two_step(shifted).value == Approx(treatment_iv_two_step(ds).value).epsilon(1e-9));
    CHECK(treatment_iv_unadjusted(shifted).value ==
          Approx(treatment_iv_unadjusted(ds).value).epsilon(1e-9));
    CHECK(placebo_iv(scaled).value == Approx(c * placebo_iv(ds).value).epsilon(1e-12));
    CHECK(treatment_iv_two_step(scaled).value == Approx(c * treatment_iv_two_step(ds).value).epsilon(1e-12));
  }
}

TEST_CASE("unblinded placebo effect biases the unadjusted estimate more than the two-step one") {
  const ScenarioConfig sc{false, false, false, false, false};
  auto p = unit_point(sc, 2000);
  p.theta_DQ = 2.0;
  p.theta_MD = 2.0;
  double unadjusted = 0.0, two_step = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const auto ds = generate(sc, p, RngSeedPlan{31, static_cast<std::uint64_t>(r)});
    unadjusted += treatment_iv_unadjusted(ds).value - p.theta_YX;
    two_step += treatment_iv_two_step(ds).value - p.theta_YX;
  }
  unadjusted /= reps;
  two_step /= reps;
  CHECK(unadjusted > 0.2);
  CHECK(std::abs(two_step) < std::abs(unadjusted));
}
