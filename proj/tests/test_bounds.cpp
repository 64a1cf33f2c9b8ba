#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "ccr/bounds.hpp"

using namespace ccr;

namespace {

PlannerInput planner(double n, double kappa, double sigma_rho, double alpha, double beta, double gamma, double a,
                     double b, double theta, double c, double sigma_bar, int dims) {
  PlannerInput in;
  in.n = n;
  in.kappa = kappa;
  in.sigma_rho = sigma_rho;
  in.alpha = alpha;
  in.beta = beta;
  in.gamma = gamma;
  in.a = a;
  in.b = b;
  in.theta = theta;
  in.c = c;
  in.sigma_bar = sigma_bar;
  in.dims = dims;
  return in;
}

struct PlannerCase {
  PlannerInput in;
  double L;
  long long per_dim;
  double N;
  double M;
};

}  // namespace

TEST_CASE("planner reproduces hand-computed values") {
  // Values computed independently from the closed-form L, N, M expressions.
  const std::vector<PlannerCase> cases{
      {planner(1e4, 3.0 * 0.5 * std::sqrt(2.0), 0.5, 1, 1, 2, 1, 1, 2, 1, 1, 1), 3.1953623224880436, 16, 16,
       2147724},
      {planner(1e4, 3, 1, 1, 1, 2, 1, 1, 2, 1, 1, 1), 3.1161419049806098, 15, 15, 882191},
      {planner(1e4, 3, 1, 1, 1, 2, 1, 1, 2, 1, 1, 2), 3.1161419049806098, 15, 225, 4870885},
      {planner(2500, 2, 0.5, 2, 0.5, 1.5, 0.5, 2, 3, 1.5, 0.1, 1), 7.0733612666677539, 356, 356, 80922},
      {planner(1e6, 1, 2, 0.5, 2, 2, 2, 0.5, 2, 1, 0.01, 3), 2.5628355649839514, 24, 13824, 1907161},
  };
  for (const auto& c : cases) {
    const PlannerOutput out = plan_parameters(c.in);
    CHECK(out.L == doctest::Approx(c.L).epsilon(1e-14));
    CHECK(out.nodes_per_dim == c.per_dim);
    CHECK(out.N == c.N);
    CHECK(out.M == c.M);
    CHECK(planner_side_condition(c.in, out));
  }
  // First case: L = sqrt(ln n + 1).
  CHECK(plan_parameters(cases[0].in).L == doctest::Approx(std::sqrt(std::log(1e4) + 1.0)).epsilon(1e-15));
}

TEST_CASE("planner side condition on a random sweep") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> logn(std::log(100.0), std::log(1e7));
  std::uniform_real_distribution<double> pos(0.2, 3.0);
  std::uniform_real_distribution<double> th(2.0, 4.0);
  std::uniform_int_distribution<int> dim(1, 3);
  int checked = 0;
  while (checked < 100) {
    PlannerInput in = planner(std::exp(logn(rng)), pos(rng), pos(rng), pos(rng), pos(rng), pos(rng), pos(rng),
                              pos(rng), th(rng), pos(rng), pos(rng), dim(rng));
    PlannerOutput out;
    try {
      out = plan_parameters(in);
    } catch (const std::domain_error&) {
      continue;
    }
    // The clamp to one node only applies when the bracket is already nonpositive.
    REQUIRE(planner_side_condition(in, out));
    ++checked;
  }
}

TEST_CASE("planner keeps node counts beyond the integer range") {
  // gamma = 0.2 raises the L argument to the fifth power, so L^theta is of order 1e19.
  const PlannerInput in = planner(1e4, 1, 1, 1, 1, 0.2, 1, 1, 4, 1, 1, 1);
  const PlannerOutput out = plan_parameters(in);
  const double shift = std::log(1.0 / (3.0 * std::sqrt(1e4)));
  CHECK(std::pow(out.L, 4.0) > 1e19);
  CHECK(out.nodes_per_dim == std::ceil(std::pow(out.L, 4.0) - shift));
  CHECK(planner_side_condition(in, out));
}

TEST_CASE("planner monotonicity and errors") {
  PlannerInput in = planner(1e3, 1, 1, 1, 1, 2, 1, 1, 2, 1, 1, 1);
  double prev_L = 0.0, prev_N = 0.0;
  for (double n : {1e3, 1e4, 1e5, 1e6}) {
    in.n = n;
    const PlannerOutput out = plan_parameters(in);
    CHECK(out.L >= prev_L);
    CHECK(out.N >= prev_N);
    prev_L = out.L;
    prev_N = out.N;
  }
  PlannerInput two = in;
  two.dims = 2;
  const PlannerOutput o1 = plan_parameters(in);
  const PlannerOutput o2 = plan_parameters(two);
  CHECK(o2.nodes_per_dim == o1.nodes_per_dim);
  CHECK(o2.N == o1.N * o1.N);

  // Argument of the L root becomes negative for a tiny alpha.
  PlannerInput bad = planner(10, 0.1, 1, 1e-9, 1, 2, 1, 1, 2, 1, 1, 1);
  CHECK_THROWS_AS(plan_parameters(bad), std::domain_error);
  bad = in;
  bad.theta = 1.0;
  CHECK_THROWS(plan_parameters(bad));
  bad = in;
  bad.kappa = 0.0;
  CHECK_THROWS(plan_parameters(bad));
}

TEST_CASE("uniform gap and Lp distance") {
  const ScalarFn v = [](double x) { return std::sin(x); };
  const ScalarFn shifted = [](double x) { return std::sin(x) + 0.25; };
  CHECK(uniform_gap(v, v, 0.0, 1.0).gap == 0.0);
  CHECK(uniform_gap(v, shifted, 0.0, 1.0).gap == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(lp_distance(v, shifted, 2.0, 0.0, 4.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(lp_distance(v, shifted, 1.0, 0.0, 4.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(integrate([](double x) { return std::exp(-x * x); }, -std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity()) == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-10));
}

TEST_CASE("digital example reproduces the published figures") {
  const DigitalReport r = digital_example();
  CHECK(std::abs(r.pfe_x - 0.2666) < 5e-4);
  CHECK(std::abs(r.ces_x - 0.3904) < 5e-4);
  CHECK(std::abs(r.pfe_y - 0.0545) < 5e-4);
  CHECK(std::abs(r.ces_y - 0.1139) < 5e-4);
  CHECK(std::abs(r.l2 - 0.0516) < 5e-4);
  CHECK(r.pfe_gap_exceeds_4x);
  CHECK(r.ces_gap_exceeds_5x);
  CHECK(r.pfe_x - r.pfe_y > 4.0 * r.l2);
  CHECK(r.ces_x - r.ces_y > 5.0 * r.l2);
}

TEST_CASE("Lp bound dominates the CES gap") {
  const DigitalExample ex;
  LpBoundInput in;
  in.v = [ex](double z) { return ex.V(z); };
  in.u = [ex](double z) { return ex.U(z); };
  in.law = ex.law();
  in.fm = [](double w) { return w > 0.99 ? 100.0 : 0.0; };
  in.fm_breaks = {0.99};
  in.r = 1.0;
  in.q = 2.0;
  const LpBoundReport rep = lp_bound_eval(in);
  const DigitalReport dr = digital_example();
  CHECK(rep.gap == doctest::Approx(dr.ces_x - dr.ces_y).epsilon(1e-6));
  CHECK(rep.holds());
  CHECK(!rep.vacuous);
  CHECK(rep.bound > 0.0);

  // Shrinking the pricing error shrinks the bound.
  DigitalExample closer = ex;
  closer.k2 = 0.031;
  LpBoundInput near = in;
  near.u = [closer](double z) { return closer.U(z); };
  const LpBoundReport rn = lp_bound_eval(near);
  CHECK(rn.bound < rep.bound);
  CHECK(rn.holds());
}

TEST_CASE("finite-sample bounds hold at the nominal rate") {
  const DigitalExample ex;
  for (double eta : {0.05, 0.2}) {
    FiniteSampleInput in;
    in.v = [ex](double z) { return ex.V(z); };
    in.u = [ex](double z) { return ex.U(z); };
    in.law = ex.law();
    in.eta = eta;
    const FiniteSampleReport r = finite_sample_bound_check(in);
    CHECK(r.trials == 500);
    CHECK(r.rate_a() <= r.allowed_rate(eta));
    CHECK(r.rate_b() <= r.allowed_rate(eta));
    CHECK(r.bound_a > 0.0);
  }
  // Lognormal risk factor, digital pair composed with the log.
  FiniteSampleInput ln;
  ln.v = [ex](double s) { return ex.V(std::log(s)); };
  ln.u = [ex](double s) { return ex.U(std::log(s)); };
  ln.law = RiskFactorLaw::lognormal(-0.5 * ex.sigma * ex.sigma * ex.t, ex.sigma * std::sqrt(ex.t));
  ln.eta = 0.05;
  const FiniteSampleReport r = finite_sample_bound_check(ln);
  CHECK(r.rate_a() <= r.allowed_rate(0.05));
  CHECK(r.allowed_rate(0.05) == doctest::Approx(0.05 + 2.0 * std::sqrt(0.05 * 0.95 / 500)));
}

TEST_CASE("ordered differences and measure contraction") {
  for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()})
    CHECK(ordered_difference_violations(2000, 50, p, 3) == 0);
  const ContractionCounts c = measure_contraction_violations(2000, 200, 0.95, 4);
  CHECK(c.sorted_violations == 0);
  CHECK(c.pathwise_violations == 0);
}
