#include <doctest.h>

#include <cmath>

#include "ccr/pricing.hpp"

using namespace ccr;

namespace {

OptionSpec call(double k, double t = 1.0) { return {OptionKind::european_call, k, 0.0, t}; }
OptionSpec digital(double k, double t = 1.0) { return {OptionKind::digital_put, k, 0.0, t}; }
OptionSpec barrier(double k, double b, double t = 1.0) { return {OptionKind::up_and_out_call, k, b, t}; }
OptionSpec am_put(double k, double t = 1.0) { return {OptionKind::american_put, k, 0.0, t}; }

ModelSpec bsm(double sigma, double r, double s0 = 100.0) { return {BsmParams{sigma}, s0, 0.0, r}; }

}  // namespace

// Reference numbers below were produced by adaptive quadrature of the
// discounted payoff against the lognormal (or killed lognormal) density,
// the Merton Poisson series, a Gil-Pelaez inversion of the Heston
// characteristic function and an independent CRR implementation.

TEST_CASE("analytic BSM call matches quadrature") {
  CHECK(price_analytic_bsm(call(100), 0.2, 0.0, 0.0, 100.0) == doctest::Approx(7.965567455406).epsilon(1e-11));
  CHECK(price_analytic_bsm(call(3825.33), 0.1943, 0.011, 0.5, 3825.33) ==
        doctest::Approx(219.588787835830).epsilon(1e-11));
}

TEST_CASE("analytic digital put and up-and-out call match quadrature") {
  CHECK(price_analytic_bsm(digital(100), 0.2, 0.01, 0.0, 100.0) == doctest::Approx(0.514765328280).epsilon(1e-10));
  CHECK(price_analytic_bsm(barrier(100, 130), 0.2, 0.01, 0.0, 100.0) ==
        doctest::Approx(3.049637854844).epsilon(1e-9));
  CHECK(price_analytic_bsm(barrier(3825.33, 5738), 0.1943, 0.011, 0.5, 3825.33) ==
        doctest::Approx(214.043577406782).epsilon(1e-9));
}

TEST_CASE("analytic limits") {
  const double far = price_analytic_bsm(barrier(100, 1e8), 0.2, 0.01, 0.0, 100.0);
  CHECK(std::abs(far - price_analytic_bsm(call(100), 0.2, 0.01, 0.0, 100.0)) < 1e-10);
  CHECK(price_analytic_bsm(digital(100), 0.2, 0.03, 0.0, 1e-6) == doctest::Approx(std::exp(-0.03)).epsilon(1e-12));
  CHECK(price_analytic_bsm(barrier(100, 130), 0.2, 0.01, 0.0, 131.0) == 0.0);
  CHECK_THROWS(price_analytic_bsm(call(100), 0.2, 0.01, 1.0, 100.0));
}

TEST_CASE("COS agrees with the analytic BSM pricer") {
  const ModelSpec m = bsm(0.2, 0.01);
  for (double tau : {0.1, 0.5, 1.0}) {
    const CharacteristicFn cf(m, tau);
    for (double s = 50.0; s <= 200.0; s += 15.0) {
      const OptionSpec c = call(100, tau);
      const OptionSpec d = digital(100, tau);
      CHECK(std::abs(price_cos(c, cf, s) - price_analytic_bsm(c, 0.2, 0.01, 0.0, s)) < 1e-8);
      CHECK(std::abs(price_cos(d, cf, s) - price_analytic_bsm(d, 0.2, 0.01, 0.0, s)) < 1e-8);
    }
  }
  CHECK_THROWS(price_cos(call(100), CharacteristicFn(m, 1.0), 100.0, CosParams{8, 10.0}));
}

TEST_CASE("COS under MJD matches the Merton series") {
  const ModelSpec m = calibrated_mjd();
  const CharacteristicFn cf(m, 0.5);
  CHECK(price_cos(call(3825.33), cf, 3825.33) == doctest::Approx(277.3920020225).epsilon(1e-9));
  CHECK(price_cos(call(4200.0), cf, 3825.33) == doctest::Approx(116.2160786280).epsilon(1e-9));

  ModelSpec no_jumps{MjdParams{0.2, 0.0, -0.1, 0.1}, 100.0, 0.0, 0.01};
  const CharacteristicFn cf0(no_jumps, 1.0);
  CHECK(std::abs(price_cos(call(100), cf0, 100.0) - price_analytic_bsm(call(100), 0.2, 0.01, 0.0, 100.0)) < 1e-8);
}

TEST_CASE("COS under Heston matches Fourier inversion") {
  const ModelSpec m = calibrated_hsv();
  const CharacteristicFn cf(m, 0.5, 0.0650);
  CHECK(price_cos(call(3825.33), cf, 3825.33) == doctest::Approx(267.0435005323).epsilon(1e-7));
  CHECK(price_cos(digital(3825.33), cf, 3825.33) == doctest::Approx(0.4038274532).epsilon(1e-7));
  const CosParams fine{1024, 10.0};
  CHECK(price_cos(call(3825.33), cf, 3825.33, fine) == doctest::Approx(267.0435005323).epsilon(1e-9));
  CHECK(price_cos(digital(3825.33), cf, 3825.33, fine) == doctest::Approx(0.4038274532).epsilon(1e-9));

  // Vanishing vol of vol with v0 = theta = sigma^2 reduces to BSM.
  ModelSpec flat{HsvParams{0.04, 1.5, 0.04, 1e-8, -0.5}, 100.0, 0.0, 0.01};
  const CharacteristicFn cff(flat, 1.0, 0.04);
  CHECK(std::abs(price_cos(call(100), cff, 100.0) - price_analytic_bsm(call(100), 0.2, 0.01, 0.0, 100.0)) < 1e-6);
}

TEST_CASE("CRR American put") {
  CHECK(price_binomial_american(am_put(100), 0.2, 0.05, 256, 0.0, 100.0) ==
        doctest::Approx(6.0872583277).epsilon(1e-9));
  CHECK(price_binomial_american(am_put(3825.33), 0.1943, 0.011, 256, 0.5, 3825.33) ==
        doctest::Approx(199.8916676164).epsilon(1e-9));
  const double a512 = price_binomial_american(am_put(100), 0.2, 0.05, 512, 0.0, 100.0);
  const double a1024 = price_binomial_american(am_put(100), 0.2, 0.05, 1024, 0.0, 100.0);
  CHECK(std::abs(a512 - a1024) < 1e-3 * a1024);
  // Early exercise premium is nonnegative; deep in the money the put is exercised.
  const double eu_put = price_analytic_bsm(call(100), 0.2, 0.05, 0.0, 100.0) - 100.0 + 100.0 * std::exp(-0.05);
  CHECK(a1024 >= eu_put);
  CHECK(price_binomial_american(am_put(100), 0.2, 0.05, 256, 0.0, 40.0) == doctest::Approx(60.0).epsilon(1e-12));
  CHECK_THROWS(price_binomial_american(am_put(100), 0.2, 0.05, 32, 0.0, 100.0));
}

TEST_CASE("pricer support matrix") {
  const ModelSpec b = calibrated_bsm();
  CHECK_NOTHROW(Pricer(b, calibrated_option("barrier"), AnalyticBsm{}));
  CHECK_NOTHROW(Pricer(calibrated_hsv(), calibrated_option("digital"), CosParams{}));
  CHECK_NOTHROW(Pricer(b, calibrated_option("american"), BinomialCrr{}));
  CHECK_THROWS_AS(Pricer(calibrated_mjd(), calibrated_option("european"), AnalyticBsm{}), std::invalid_argument);
  CHECK_THROWS_AS(Pricer(b, calibrated_option("barrier"), CosParams{}), std::invalid_argument);
  CHECK_THROWS_AS(Pricer(calibrated_hsv(), calibrated_option("american"), BinomialCrr{}), std::invalid_argument);
  CHECK_THROWS_AS(Pricer(b, calibrated_option("american"), BinomialCrr{16}), std::invalid_argument);
}

TEST_CASE("pricer returns the payoff at maturity and is pure") {
  const Pricer p(calibrated_bsm(), calibrated_option("european"), AnalyticBsm{});
  CHECK(p.value(1.0, {4000.0, 0.0}) == doctest::Approx(4000.0 - 3825.33));
  CHECK(p.value(1.0, {3000.0, 0.0}) == 0.0);
  CHECK(p.value(0.3, {3900.0, 0.0}) == p.value(0.3, {3900.0, 0.0}));
  const double near = p.value(1.0 - 1e-7, {4000.0, 0.0});
  CHECK(std::abs(near - (4000.0 - 3825.33)) < 0.01);
}

TEST_CASE("monotonicity in spot") {
  const Pricer c(calibrated_mjd(), calibrated_option("european"), CosParams{});
  const Pricer d(calibrated_mjd(), calibrated_option("digital"), CosParams{});
  double prev_c = -1.0, prev_d = 2.0;
  for (double s = 2000.0; s <= 7000.0; s += 50.0) {
    const double vc = c.value(0.5, {s, 0.0});
    const double vd = d.value(0.5, {s, 0.0});
    CHECK(vc >= prev_c - 1e-9);
    CHECK(vd <= prev_d + 1e-9);
    prev_c = vc;
    prev_d = vd;
  }
}

TEST_CASE("deltas") {
  const Pricer p(calibrated_bsm(), calibrated_option("european"), AnalyticBsm{});
  CHECK(p.delta(0.9, {9000.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p.delta(0.9, {1000.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-9));
  for (double s : {3000.0, 3825.33, 4500.0}) {
    const double h = 1e-5 * s;
    const double fd = (p.value(0.5, {s + h, 0.0}) - p.value(0.5, {s - h, 0.0})) / (2.0 * h);
    CHECK(p.delta(0.5, {s, 0.0}) == doctest::Approx(fd).epsilon(1e-6));
  }
  const Pricer cos(calibrated_bsm(), calibrated_option("european"), CosParams{});
  CHECK(cos.delta(0.5, {4000.0, 0.0}) == doctest::Approx(p.delta(0.5, {4000.0, 0.0})).epsilon(1e-6));
  CHECK(p.delta(1.0, {4000.0, 0.0}) == 1.0);
}

TEST_CASE("American exercise boundary") {
  const Pricer put(calibrated_bsm(), calibrated_option("american"), BinomialCrr{});
  const double k = 3825.33;
  const auto near_expiry = exercise_boundary(put, 1.0 - 1.0 / 520.0, 1e-4 * k);
  REQUIRE(near_expiry.has_value());
  CHECK(*near_expiry < k);
  CHECK(*near_expiry > 0.9 * k);

  double prev = 0.0;
  for (int u = 1; u < 52; ++u) {
    const auto b = exercise_boundary(put, u / 52.0, 1e-4 * k);
    REQUIRE(b.has_value());
    CHECK(*b >= prev - 1e-3 * k);
    prev = *b;
  }

  // An American call on a non-dividend stock is never exercised early.
  OptionSpec am_call{OptionKind::american_call, k, 0.0, 1.0};
  const Pricer callp(calibrated_bsm(), am_call, BinomialCrr{});
  CHECK_FALSE(exercise_boundary(callp, 0.5, 1e-4 * k).has_value());
}
