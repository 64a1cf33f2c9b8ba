#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ccr {

using ScalarFn = std::function<double(double)>;

// ---------------------------------------------------------------------------
// parameter planner

struct PlannerInput {
  double n = 1e4;          // outer paths
  double kappa = 1.0;      // confidence scale
  double sigma_rho = 1.0;  // estimator standard deviation scale
  double alpha = 1.0;      // tail constants: P(Z outside Omega_L) <= alpha exp(-beta L^gamma)
  double beta = 1.0;
  double gamma = 2.0;
  double a = 1.0;  // convergence constants: error <= a exp(b (L^theta - N^{1/D}))
  double b = 1.0;
  double theta = 2.0;
  double c = 1.0;          // stability constant of the interpolation
  double sigma_bar = 1.0;  // pricer noise bound
  int dims = 1;
  double xi = 0.0;  // effort exponent; not used by the formulas

  void validate() const;
};

struct PlannerOutput {
  double L = 0.0;
  // ceil(L^theta - ln(kappa / (3 a sqrt n)) / b), at least 1. Kept in floating point because
  // heavy tails (small gamma) push it far beyond any integer type.
  double nodes_per_dim = 0.0;
  double N = 0.0;  // nodes_per_dim^D
  double M = 0.0;
};

/// Domain size L, interpolation size N and pricer sample size M. Throws
/// std::domain_error when the L argument is not positive.
PlannerOutput plan_parameters(const PlannerInput& in);

/// L^theta - N^{1/D} <= ln(kappa / (3 a sqrt n)) / b.
bool planner_side_condition(const PlannerInput& in, const PlannerOutput& out);

// ---------------------------------------------------------------------------
// one-dimensional risk-factor laws and quadrature helpers

struct RiskFactorLaw {
  ScalarFn pdf;
  ScalarFn cdf;
  ScalarFn quantile;
  double density_sup = 0.0;
  double lo = 0.0;  // support used for integrals and sampling-free grids
  double hi = 0.0;
  std::string name;

  static RiskFactorLaw normal(double mean, double sd);
  /// exp(W) with W ~ N(mu, s^2).
  static RiskFactorLaw lognormal(double mu, double s);
};

/// Integral of f over [a, b] (infinite limits allowed) by adaptive
/// Gauss-Kronrod; throws std::runtime_error when the error estimate exceeds
/// the tolerance by a wide margin.
double integrate(const ScalarFn& f, double a, double b, double abs_tol = 1e-10);

struct UniformGap {
  double gap = 0.0;
  int points = 0;
};
/// max |V - U| on an equidistant grid of `points` points of [lo, hi].
UniformGap uniform_gap(const ScalarFn& v, const ScalarFn& u, double lo, double hi, int points = 100000);

/// (integral |V - U|^p)^{1/p} over [lo, hi].
double lp_distance(const ScalarFn& v, const ScalarFn& u, double p, double lo, double hi);

// ---------------------------------------------------------------------------
// digital example

struct DigitalExample {
  double sigma = 0.05;
  double t = 1.0 / 24.0;
  double tau = 1.0 / 24.0;
  double k1 = 0.03;
  double k2 = 0.04;

  double d(double k, double z) const;
  double V(double z) const;  // digital with log-strike k1
  double U(double z) const;  // digital with log-strike k2
  RiskFactorLaw law() const;
};

struct DigitalReport {
  double pfe_x = 0.0;
  double ces_x = 0.0;
  double pfe_y = 0.0;
  double ces_y = 0.0;
  double l2 = 0.0;
  bool pfe_gap_exceeds_4x = false;
  bool ces_gap_exceeds_5x = false;
};

/// PFE and CES at level alpha via the quantile of Z (both value functions
/// increase in z) and the L2 distance of the value functions.
DigitalReport digital_example(const DigitalExample& ex = {}, double alpha = 0.99);

// ---------------------------------------------------------------------------
// L^p bound

struct LpBoundInput {
  ScalarFn v;
  ScalarFn u;
  RiskFactorLaw law;
  ScalarFn fm;                    // density of m on (0, 1)
  std::vector<double> fm_breaks;  // discontinuities of fm inside (0, 1)
  double p = 2.0;
  double r = 1.0;
  double q = 2.0;
  /// Both value functions nondecreasing, so Q_X(u) = V(Q_Z(u))^+.
  bool increasing = true;
};

struct LpBoundReport {
  double bound = 0.0;
  double gap = 0.0;  // |rho_m(X) - rho_m(Y)|
  double lp_norm = 0.0;
  double density_norm = 0.0;   // ||f_Z||_{L^{q'}}
  double measure_norm = 0.0;   // ||f_m||_{L^{r'}}
  bool vacuous = false;        // a factor is infinite
  bool holds() const { return gap <= bound + 1e-12; }
};

LpBoundReport lp_bound_eval(const LpBoundInput& in);

// ---------------------------------------------------------------------------
// finite-sample bounds

struct FiniteSampleInput {
  ScalarFn v;
  ScalarFn u;
  RiskFactorLaw law;
  ScalarFn sampler_quantile;  // inverse CDF used for sampling; defaults to law.quantile
  int n = 1000;
  double p = 2.0;
  double eta = 0.05;
  double alpha = 0.95;  // level of the PFE/CES estimators
  int trials = 500;
  std::uint64_t seed = 11;
};

struct FiniteSampleReport {
  double bound_a = 0.0;  // law-invariant measures (EE, PFE, CES)
  double bound_b = 0.0;  // CES
  double lp_norm = 0.0;
  double sup_norm = 0.0;
  int violations_a = 0;  // trials with any estimator above bound (a)
  int violations_b = 0;
  int trials = 0;
  double rate_a() const { return static_cast<double>(violations_a) / trials; }
  double rate_b() const { return static_cast<double>(violations_b) / trials; }
  /// eta + 2 sqrt(eta (1 - eta) / trials).
  double allowed_rate(double eta) const;
};

FiniteSampleReport finite_sample_bound_check(const FiniteSampleInput& in);

// ---------------------------------------------------------------------------
// property suites on random samples

/// Pairs (a, b) of random vectors violating ||sort(a) - sort(b)||_p <= ||a - b||_p.
/// p = infinity is accepted.
int ordered_difference_violations(int trials, int length, double p, std::uint64_t seed);

struct ContractionCounts {
  int sorted_violations = 0;  // |rho(x) - rho(y)| > max |x_(i) - y_(i)|
  int pathwise_violations = 0;  // max |x_(i) - y_(i)| > max |x^i - y^i|
};

/// Checks the uniform-norm chain for the EE, PFE and CES estimators at level
/// alpha on random paired samples.
ContractionCounts measure_contraction_violations(int trials, int length, double alpha, std::uint64_t seed);

}  // namespace ccr
