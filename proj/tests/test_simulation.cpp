#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ccr/simulation.hpp"

using namespace ccr;

namespace {

ModelSpec degenerate_bsm() { return ModelSpec{BsmParams{0.0}, 3825.33, 0.11, 0.011}; }

double mean(const Eigen::VectorXd& v) { return v.mean(); }
double std_error(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / (v.size() - 1.0) / v.size());
}

}  // namespace

TEST_CASE("model validation rejects inadmissible parameters") {
  CHECK_NOTHROW(calibrated_bsm().validate());
  CHECK_NOTHROW(calibrated_mjd().validate());
  CHECK_NOTHROW(calibrated_hsv().validate());
  ModelSpec bad = calibrated_bsm();
  bad.s0 = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ModelSpec hsv = calibrated_hsv();
  std::get<HsvParams>(hsv.dynamics).rho = 1.5;
  CHECK_THROWS_AS(hsv.validate(), std::invalid_argument);
  ModelSpec mjd = calibrated_mjd();
  std::get<MjdParams>(mjd.dynamics).lambda = -1.0;
  CHECK_THROWS_AS(mjd.validate(), std::invalid_argument);
  CHECK_THROWS(calibrated_model("sabr"));
  CHECK(calibrated_hsv().factor_count() == 2);
  CHECK(calibrated_mjd().factor_count() == 1);
}

TEST_CASE("time grid is equidistant") {
  const TimeGrid g{1.0, 52};
  CHECK(g.time(0) == 0.0);
  CHECK(g.time(52) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.time(26) == doctest::Approx(0.5));
  CHECK_THROWS(TimeGrid{0.0, 4}.validate());
  CHECK_THROWS(TimeGrid{1.0, 0}.validate());
}

TEST_CASE("sigma = 0 BSM paths follow the deterministic drift") {
  const PathSet p = simulate(degenerate_bsm(), TimeGrid{1.0, 1}, 50, Measure::physical, 3);
  const double expected = 3825.33 * std::exp(0.11);
  for (int i = 0; i < p.paths(); ++i) CHECK(p.spot(i, 1) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("initial states and positivity") {
  for (const auto& model : {calibrated_bsm(), calibrated_mjd(), calibrated_hsv()}) {
    const PathSet p = simulate(model, TimeGrid{1.0, 52}, 500, Measure::physical, 9);
    CHECK(p.spot.rows() == 500);
    CHECK(p.spot.cols() == 53);
    CHECK((p.spot.col(0).array() == model.s0).all());
    CHECK((p.spot.array() > 0.0).all());
    if (model.factor_count() == 2) {
      CHECK((p.variance.col(0).array() == std::get<HsvParams>(model.dynamics).v0).all());
      CHECK((p.variance.array() >= 0.0).all());
    }
  }
}

TEST_CASE("physical BSM terminal mean matches s0 exp(mu T)") {
  const ModelSpec m = calibrated_bsm();
  const PathSet p = simulate(m, TimeGrid{1.0, 52}, 100000, Measure::physical, 2024);
  const Eigen::VectorXd st = p.spot.col(52);
  CHECK(std::abs(mean(st) - m.s0 * std::exp(m.mu)) < 3.0 * std_error(st));
}

TEST_CASE("risk-neutral discounted terminal mean is s0 for every model") {
  for (const auto& m : {calibrated_bsm(), calibrated_mjd(), calibrated_hsv()}) {
    const PathSet p = simulate(m, TimeGrid{1.0, 52}, 100000, Measure::risk_neutral, 77);
    const Eigen::VectorXd disc = p.spot.col(52) * std::exp(-m.r);
    INFO(m.name());
    CHECK(std::abs(mean(disc) - m.s0) < 3.0 * std_error(disc));
  }
}

TEST_CASE("paths are reproducible, thread-independent and prefix-stable") {
  const ModelSpec m = calibrated_mjd();
  const TimeGrid g{1.0, 12};
  const PathSet a = simulate(m, g, 300, Measure::physical, 5, 1);
  const PathSet b = simulate(m, g, 300, Measure::physical, 5, 4);
  const PathSet c = simulate(m, g, 600, Measure::physical, 5, 2);
  const PathSet d = simulate(m, g, 300, Measure::physical, 6, 1);
  CHECK(a.spot == b.spot);
  CHECK(a.spot == c.spot.topRows(300));
  CHECK(a.spot != d.spot);
}

TEST_CASE("simulate rejects bad input") {
  CHECK_THROWS(simulate(calibrated_bsm(), TimeGrid{1.0, 4}, 0, Measure::physical, 1));
  CHECK_THROWS(simulate(calibrated_bsm(), TimeGrid{-1.0, 4}, 10, Measure::physical, 1));
}

TEST_CASE("path sets round-trip through the binary layout") {
  const PathSet p = simulate(calibrated_hsv(), TimeGrid{0.5, 6}, 20, Measure::physical, 8);
  std::stringstream buf;
  write_binary(p, buf);
  const PathSet q = read_paths_binary(buf);
  CHECK(q.spot == p.spot);
  CHECK(q.variance == p.variance);
  CHECK(q.seed == p.seed);
  CHECK(q.grid.steps == 6);
  CHECK(q.grid.horizon == 0.5);

  std::stringstream csv;
  write_csv(p, csv);
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("n,m,d,seed,horizon", 0) == 0);
}
