#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ccr/exposure.hpp"

using namespace ccr;

namespace {

Eigen::VectorXd seq(int n) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = i + 1;
  return x;
}

Eigen::VectorXd random_sample(int n, std::mt19937_64& rng) {
  std::lognormal_distribution<double> d(0.0, 0.7);
  Eigen::VectorXd x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

double brute_ces(Eigen::VectorXd x, double alpha) {
  // Quantile average (1/(1-alpha)) * integral_alpha^1 Q(v) dv with the empirical quantile.
  std::sort(x.data(), x.data() + x.size());
  const int n = static_cast<int>(x.size());
  const int steps = 200000;
  double sum = 0.0;
  for (int j = 0; j < steps; ++j) {
    const double v = alpha + (1.0 - alpha) * (j + 0.5) / steps;
    const int idx = std::min(n - 1, static_cast<int>(std::floor(v * n)));
    sum += x(idx);
  }
  return sum / steps;
}

PathSet hand_paths(const std::vector<std::vector<double>>& rows) {
  PathSet p;
  p.grid = TimeGrid{1.0, static_cast<int>(rows[0].size()) - 1};
  p.spot.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t u = 0; u < rows[i].size(); ++u) p.spot(i, u) = rows[i][u];
  return p;
}

const std::vector<MeasureSpec> kMeasures{ExpectedExposure{}, PotentialFutureExposure{0.95},
                                         ConditionalExpectedShortfall{0.95}};

}  // namespace

TEST_CASE("estimators on small samples") {
  Eigen::VectorXd three(3);
  three << 3.0, 1.0, 2.0;
  CHECK(measure(three, ExpectedExposure{}).estimate == 2.0);
  const Eigen::VectorXd x = seq(100);
  CHECK(measure(x, ExpectedExposure{}).estimate == doctest::Approx(50.5));
  CHECK(measure(x, PotentialFutureExposure{0.95}).estimate == 96.0);
  CHECK(measure(x, ConditionalExpectedShortfall{0.95}).estimate == doctest::Approx(98.0));
  CHECK(measure(x, SpectralMeasure{{1.0}}).estimate == doctest::Approx(50.5));
  CHECK(measure_name(PotentialFutureExposure{0.95}) == "PFE_0.95");
  CHECK_THROWS(measure(x, PotentialFutureExposure{1.0}));
  CHECK_THROWS(measure(x, SpectralMeasure{{2.0, 0.0}}));
  CHECK_THROWS(measure(Eigen::VectorXd::Ones(1), ExpectedExposure{}));
}

TEST_CASE("generic weights reproduce the named estimators") {
  std::mt19937_64 rng(21);
  for (int n : {7, 40, 1000}) {
    const Eigen::VectorXd x = random_sample(n, rng);
    for (const auto& spec : kMeasures) {
      const Eigen::VectorXd w = measure_weights(n, spec);
      CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(measure_generic(x, w) == doctest::Approx(measure(x, spec).estimate).epsilon(1e-12));
    }
    // CES as a spectral measure with a step density on 20 bins.
    std::vector<double> d(20, 0.0);
    d[19] = 20.0;
    CHECK(measure(x, SpectralMeasure{d}).estimate ==
          doctest::Approx(measure(x, ConditionalExpectedShortfall{0.95}).estimate).epsilon(1e-12));
  }
  CHECK_THROWS(measure_generic(seq(3), Eigen::Vector3d(0.5, 0.5, 0.5)));
}

TEST_CASE("CES weights match the quantile-average formula") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 1000; ++trial) {
    std::uniform_int_distribution<int> len(20, 200);
    std::uniform_real_distribution<double> lvl(0.5, 0.98);
    const Eigen::VectorXd x = random_sample(len(rng), rng);
    const double alpha = lvl(rng);
    if (trial % 50 == 0) {
      CHECK(measure(x, ConditionalExpectedShortfall{alpha}).estimate ==
            doctest::Approx(brute_ces(x, alpha)).epsilon(1e-4));
    }
    const Eigen::VectorXd w = measure_weights(static_cast<int>(x.size()), ConditionalExpectedShortfall{alpha});
    const int n = static_cast<int>(x.size());
    const int k = static_cast<int>(std::floor(n * alpha + 1e-9));
    for (int i = 0; i < n; ++i) {
      const double lo = std::max(alpha, static_cast<double>(i) / n);
      const double hi = static_cast<double>(i + 1) / n;
      const double expected = hi > lo ? (hi - lo) / (1.0 - alpha) : 0.0;
      REQUIRE(w(i) == doctest::Approx(expected).epsilon(1e-9));
    }
    REQUIRE(w(k) > 0.0);
  }
}

TEST_CASE("monotonicity and cash additivity") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> bump(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd x = random_sample(150, rng);
    Eigen::VectorXd y = x;
    for (auto& v : y) v += bump(rng);
    const double c = 3.0 * bump(rng);
    for (const auto& spec : kMeasures) {
      CHECK(measure(y, spec).estimate >= measure(x, spec).estimate);
      const Eigen::VectorXd shifted = (x.array() + c).matrix();
      CHECK(measure(shifted, spec).estimate == doctest::Approx(measure(x, spec).estimate + c).epsilon(1e-12));
    }
  }
}

TEST_CASE("CLT intervals cover the true measure") {
  // Lognormal exposures with known EE and CES; coverage over repeated samples.
  const double s = 0.5;
  const double ee = std::exp(0.5 * s * s);
  const double alpha = 0.9;
  const double z = 1.2815515655446004;  // Phi^{-1}(0.9)
  const double pfe = std::exp(s * z);
  const double ces = ee * 0.5 * std::erfc((z - s) / std::sqrt(2.0)) / (1.0 - alpha);
  std::mt19937_64 rng(24);
  std::lognormal_distribution<double> d(0.0, s);
  int hit_ee = 0, hit_pfe = 0, hit_ces = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd x(2000);
    for (auto& v : x) v = d(rng);
    const auto a = measure(x, ExpectedExposure{});
    const auto b = measure(x, PotentialFutureExposure{alpha});
    const auto c = measure(x, ConditionalExpectedShortfall{alpha});
    hit_ee += std::abs(a.estimate - ee) <= *a.ci_halfwidth;
    hit_pfe += std::abs(b.estimate - pfe) <= *b.ci_halfwidth;
    hit_ces += std::abs(c.estimate - ces) <= *c.ci_halfwidth;
  }
  // 95% nominal, binomial slack of about 3 standard errors.
  CHECK(hit_ee >= 0.88 * trials);
  CHECK(hit_pfe >= 0.88 * trials);
  CHECK(hit_ces >= 0.85 * trials);
}

TEST_CASE("barrier masking zeroes from the first hit onwards") {
  const OptionSpec bar{OptionKind::up_and_out_call, 100.0, 120.0, 1.0};
  const PathSet p = hand_paths({{100, 110, 120, 90, 80}, {100, 130, 100, 100, 100}, {100, 101, 102, 103, 104}});
  ExposureCube cube;
  cube.values = Eigen::MatrixXd::Constant(3, 4, 5.0);
  apply_masking(cube, p, bar, nullptr);
  CHECK(cube.mask == MaskKind::barrier);
  // Touching the barrier exactly knocks out (>=).
  CHECK(cube.values.row(0) == Eigen::RowVector4d(5, 0, 0, 0));
  CHECK(cube.values.row(1) == Eigen::RowVector4d(0, 0, 0, 0));
  CHECK(cube.values.row(2) == Eigen::RowVector4d(5, 5, 5, 5));
}

TEST_CASE("american masking keeps the exercise date and zeroes later dates") {
  const OptionSpec put{OptionKind::american_put, 100.0, 0.0, 1.0};
  const PathSet p = hand_paths({{100, 95, 85, 95, 99}, {100, 90, 90, 90, 90}, {100, 100, 100, 100, 100}});
  const BoundaryProfile b{90.0, 90.0, 90.0, 100.0};
  ExposureCube cube;
  cube.values = Eigen::MatrixXd::Constant(3, 4, 7.0);
  apply_masking(cube, p, put, &b);
  CHECK(cube.mask == MaskKind::american);
  CHECK(cube.values.row(0) == Eigen::RowVector4d(7, 7, 0, 0));  // exercised at u = 2
  CHECK(cube.values.row(1) == Eigen::RowVector4d(7, 7, 7, 7));  // s == boundary is not exercise; u = 4 is the last date
  CHECK(cube.values.row(2) == Eigen::RowVector4d(7, 7, 7, 7));
  CHECK_THROWS(apply_masking(cube, p, put, nullptr));
}

TEST_CASE("masking invariants on simulated paths") {
  const ModelSpec model = calibrated_bsm();
  const PathSet paths = simulate(model, TimeGrid{1.0, 52}, 2000, Measure::physical, 5);
  const Pricer pricer(model, calibrated_option("barrier"), AnalyticBsm{});
  const ExposureCube cube = full_reeval(paths, pricer);
  CHECK((cube.values.array() >= 0.0).all());
  for (int i = 0; i < cube.paths(); ++i) {
    int first = 0;
    for (int u = 1; u <= 52 && !first; ++u)
      if (paths.spot(i, u) >= 5738.0) first = u;
    if (!first) continue;
    for (int u = first; u <= 52; ++u) REQUIRE(cube.values(i, u - 1) == 0.0);
  }
}

TEST_CASE("accelerated re-evaluation matches the full one and uses the payoff at maturity") {
  const ModelSpec model = calibrated_bsm();
  const PathSet paths = simulate(model, TimeGrid{1.0, 12}, 1000, Measure::physical, 6);
  const Pricer pricer(model, calibrated_option("european"), AnalyticBsm{});
  std::vector<ChebyshevApproximant> approx;
  for (int u = 1; u < 12; ++u) {
    const double t = paths.grid.time(u);
    approx.push_back(fit_approximant(pricer, t, build_domain(pricer, t, paths.spot.col(u), Eigen::VectorXd()), 16));
  }
  const ExposureCube full = full_reeval(paths, pricer);
  const ExposureCube acc = accelerated_reeval(paths, approx, pricer.option());
  for (int i = 0; i < 1000; ++i) CHECK(acc.values(i, 11) == std::max(paths.spot(i, 12) - 3825.33, 0.0));
  CHECK((full.values - acc.values).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((acc.values.array() >= 0.0).all());

  std::vector<ChebyshevApproximant> short_list(approx.begin(), approx.begin() + 5);
  CHECK_THROWS(accelerated_reeval(paths, short_list, pricer.option()));

  // Domains fitted without tails on another path set leave states uncovered.
  const PathSet other = simulate(model, TimeGrid{1.0, 12}, 50, Measure::physical, 7);
  std::vector<ChebyshevApproximant> narrow;
  for (int u = 1; u < 12; ++u) {
    const double t = other.grid.time(u);
    narrow.push_back(fit_approximant(pricer, t, build_domain(pricer, t, other.spot.col(u), Eigen::VectorXd(),
                                                             DomainOptions{true, false, 0.0}),
                                     4));
  }
  CHECK_THROWS_AS(accelerated_reeval(paths, narrow, pricer.option()), OutOfDomain);
}

TEST_CASE("profile comparison") {
  std::mt19937_64 rng(25);
  ExposureCube x;
  x.values.resize(500, 6);
  for (int u = 0; u < 6; ++u) x.values.col(u) = random_sample(500, rng);
  const ComparisonReport same = profile_and_compare(x, x, kMeasures);
  for (const auto& p : same.profiles) {
    CHECK(p.eps_accel == 0.0);
    CHECK(p.pass);
  }
  CHECK(same.all_pass());

  ExposureCube y = x;
  y.values.col(3) *= 1.5;
  const ComparisonReport shifted = profile_and_compare(x, y, kMeasures);
  for (const auto& p : shifted.profiles) {
    CHECK(p.u_star == 4);
    CHECK(p.eps_accel == doctest::Approx(0.5));
    CHECK(!p.pass);
    CHECK(p.eps_mc == doctest::Approx(2.0 * *p.ci_halfwidth[3] / p.full[3]));
  }

  ExposureCube z = x;
  z.values.col(0).setZero();
  const ComparisonReport zero = profile_and_compare(z, z, {ExpectedExposure{}});
  CHECK(zero.profiles[0].excluded == std::vector<int>{1});
  CHECK(zero.warnings.size() == 1);

  ExposureCube bad;
  bad.values.resize(400, 6);
  CHECK_THROWS(profile_and_compare(x, bad, kMeasures));
}

TEST_CASE("speed-up factor") {
  CHECK(speedup(10.0, 2.0) == 5.0);
  CHECK(speedup(10.0, 2.0, 3.0) == doctest::Approx(13.0 / 5.0));
  CHECK_THROWS(speedup(0.0, 1.0));
  CHECK_THROWS(speedup(1.0, 1.0, -1.0));
}
