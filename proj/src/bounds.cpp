#include "ccr/bounds.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "ccr/exposure.hpp"
#include "ccr/parallel.hpp"
#include "ccr/pricing.hpp"

namespace ccr {

void PlannerInput::validate() const {
  const double all[] = {n, kappa, sigma_rho, alpha, beta, gamma, a, b, theta, c, sigma_bar};
  for (double v : all)
    if (!(v > 0.0)) throw std::invalid_argument("planner: all constants must be positive");
  if (theta < 2.0) throw std::invalid_argument("planner: theta must be at least 2");
  if (dims < 1) throw std::invalid_argument("planner: dimension must be at least 1");
}

PlannerOutput plan_parameters(const PlannerInput& in) {
  in.validate();
  const double arg =
      (std::log(in.n) + std::log(in.alpha) + in.kappa * in.kappa / (18.0 * in.sigma_rho * in.sigma_rho)) / in.beta;
  if (!(arg > 0.0)) throw std::domain_error("planner: infeasible inputs, the L argument is not positive");
  PlannerOutput out;
  out.L = std::pow(arg, 1.0 / in.gamma);
  const double shift = std::log(in.kappa / (3.0 * in.a * std::sqrt(in.n))) / in.b;
  out.nodes_per_dim = std::max(1.0, std::ceil(std::pow(out.L, in.theta) - shift));
  out.N = std::pow(out.nodes_per_dim, in.dims);
  const double log_n = std::log(out.N);
  out.M = std::ceil(in.n * in.c * in.c * (1.0 + log_n) * (1.0 + log_n) * in.sigma_bar * in.sigma_bar *
                    (18.0 * log_n / (in.kappa * in.kappa) + 1.0 / (in.sigma_rho * in.sigma_rho)));
  return out;
}

bool planner_side_condition(const PlannerInput& in, const PlannerOutput& out) {
  const double power = std::pow(out.L, in.theta);
  const double lhs = power - std::pow(out.N, 1.0 / in.dims);
  const double rhs = std::log(in.kappa / (3.0 * in.a * std::sqrt(in.n))) / in.b;
  // Once L^theta exceeds 2^53 the shift is below one ulp, so the difference is only known to a few ulps of L^theta.
  const double slack = 1e-9 * (1.0 + std::abs(rhs)) + 8.0 * std::numeric_limits<double>::epsilon() * power;
  return lhs <= rhs + slack;
}

// ---------------------------------------------------------------------------

RiskFactorLaw RiskFactorLaw::normal(double mean, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("normal law: sd must be positive");
  const boost::math::normal dist(mean, sd);
  RiskFactorLaw law;
  law.pdf = [dist](double z) { return boost::math::pdf(dist, z); };
  law.cdf = [dist](double z) { return boost::math::cdf(dist, z); };
  law.quantile = [dist](double u) { return boost::math::quantile(dist, u); };
  law.density_sup = 1.0 / (sd * std::sqrt(2.0 * M_PI));
  law.lo = mean - 40.0 * sd;
  law.hi = mean + 40.0 * sd;
  law.name = "normal";
  return law;
}

RiskFactorLaw RiskFactorLaw::lognormal(double mu, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("lognormal law: s must be positive");
  const boost::math::lognormal dist(mu, s);
  RiskFactorLaw law;
  law.pdf = [dist](double z) { return z > 0.0 ? boost::math::pdf(dist, z) : 0.0; };
  law.cdf = [dist](double z) { return z > 0.0 ? boost::math::cdf(dist, z) : 0.0; };
  law.quantile = [dist](double u) { return boost::math::quantile(dist, u); };
  // The mode exp(mu - s^2) carries the maximal density.
  law.density_sup = boost::math::pdf(dist, std::exp(mu - s * s));
  law.lo = std::exp(mu - 40.0 * s);
  law.hi = std::exp(mu + 40.0 * s);
  law.name = "lognormal";
  return law;
}

double integrate(const ScalarFn& f, double a, double b, double abs_tol) {
  using boost::math::quadrature::gauss_kronrod;
  if (!std::isfinite(a) || !std::isfinite(b)) {
    double err = 0.0;
    const double v = gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-10, &err);
    if (err > std::max(abs_tol, 1e-6 * std::abs(v))) throw std::runtime_error("quadrature did not converge");
    return v;
  }
  if (b <= a) return 0.0;
  // Panels keep narrow features of the integrand visible to the rule.
  constexpr int panels = 64;
  double total = 0.0;
  double total_err = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double lo = a + (b - a) * k / panels;
    const double hi = a + (b - a) * (k + 1) / panels;
    double err = 0.0;
    total += gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-10, &err);
    total_err += err;
  }
  if (total_err > std::max(abs_tol, 1e-6 * std::abs(total))) throw std::runtime_error("quadrature did not converge");
  return total;
}

UniformGap uniform_gap(const ScalarFn& v, const ScalarFn& u, double lo, double hi, int points) {
  if (points < 2) throw std::invalid_argument("uniform_gap: at least two grid points");
  UniformGap g;
  g.points = points;
  for (int k = 0; k < points; ++k) {
    const double z = lo + (hi - lo) * k / (points - 1);
    g.gap = std::max(g.gap, std::abs(v(z) - u(z)));
  }
  return g;
}

double lp_distance(const ScalarFn& v, const ScalarFn& u, double p, double lo, double hi) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_distance: p must be at least 1");
  const double integral = integrate([&](double z) { return std::pow(std::abs(v(z) - u(z)), p); }, lo, hi, 1e-14);
  return std::pow(integral, 1.0 / p);
}

// ---------------------------------------------------------------------------

double DigitalExample::d(double k, double z) const {
  return (z - k - 0.5 * sigma * sigma * tau) / std::sqrt(sigma * sigma * tau);
}

double DigitalExample::V(double z) const { return normal_cdf(d(k1, z)); }
double DigitalExample::U(double z) const { return normal_cdf(d(k2, z)); }

RiskFactorLaw DigitalExample::law() const {
  return RiskFactorLaw::normal(-0.5 * sigma * sigma * t, sigma * std::sqrt(t));
}

DigitalReport digital_example(const DigitalExample& ex, double alpha) {
  const RiskFactorLaw z = ex.law();
  const double qz = z.quantile(alpha);
  DigitalReport r;
  r.pfe_x = ex.V(qz);
  r.pfe_y = ex.U(qz);
  auto tail_mean = [&](const ScalarFn& f) {
    return integrate([&](double s) { return f(s) * z.pdf(s); }, qz, z.hi) / (1.0 - alpha);
  };
  r.ces_x = tail_mean([&](double s) { return ex.V(s); });
  r.ces_y = tail_mean([&](double s) { return ex.U(s); });
  const double width = 40.0 * ex.sigma * std::sqrt(ex.tau);
  r.l2 = lp_distance([&](double s) { return ex.V(s); }, [&](double s) { return ex.U(s); }, 2.0,
                     std::min(ex.k1, ex.k2) - width, std::max(ex.k1, ex.k2) + width);
  r.pfe_gap_exceeds_4x = std::abs(r.pfe_x - r.pfe_y) > 4.0 * r.l2;
  r.ces_gap_exceeds_5x = std::abs(r.ces_x - r.ces_y) > 5.0 * r.l2;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

double conjugate(double x) { return x == 1.0 ? std::numeric_limits<double>::infinity() : x / (x - 1.0); }

// Integral over (0, 1) split at the discontinuities of the integrand.
double integrate_unit(const ScalarFn& f, std::vector<double> breaks) {
  breaks.push_back(0.0);
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) total += integrate(f, breaks[k], breaks[k + 1], 1e-12);
  return total;
}

}  // namespace

LpBoundReport lp_bound_eval(const LpBoundInput& in) {
  if (std::abs(in.p - in.r * in.q) > 1e-12) throw std::invalid_argument("lp_bound_eval: p must equal r q");
  if (in.r < 1.0 || in.q < 1.0) throw std::invalid_argument("lp_bound_eval: r and q must be at least 1");
  if (!in.increasing) throw std::invalid_argument("lp_bound_eval: quantile gap requires increasing value functions");
  LpBoundReport rep;
  rep.lp_norm = lp_distance(in.v, in.u, in.p, in.law.lo, in.law.hi);

  const double qp = conjugate(in.q);
  if (std::isinf(qp)) {
    rep.density_norm = in.law.density_sup;
  } else {
    rep.density_norm =
        std::pow(integrate([&](double z) { return std::pow(in.law.pdf(z), qp); }, in.law.lo, in.law.hi, 1e-14), 1.0 / qp);
  }
  const double rp = conjugate(in.r);
  if (std::isinf(rp)) {
    double sup = 0.0;
    for (int k = 1; k < 100000; ++k) sup = std::max(sup, in.fm(k / 100000.0));
    for (double b : in.fm_breaks) {
      sup = std::max(sup, in.fm(std::min(b + 1e-12, 1.0 - 1e-15)));
      sup = std::max(sup, in.fm(std::max(b - 1e-12, 1e-15)));
    }
    rep.measure_norm = sup;
  } else {
    rep.measure_norm = std::pow(integrate_unit([&](double w) { return std::pow(in.fm(w), rp); }, in.fm_breaks), 1.0 / rp);
  }
  rep.vacuous = !std::isfinite(rep.lp_norm) || !std::isfinite(rep.density_norm) || !std::isfinite(rep.measure_norm);
  rep.bound = rep.lp_norm * std::pow(rep.density_norm, 1.0 / in.r) * rep.measure_norm;

  // rho_m(X) = int V(z)^+ f_m(F_Z(z)) f_Z(z) dz, split where f_m jumps.
  std::vector<double> cuts{in.law.lo, in.law.hi};
  for (double b : in.fm_breaks) cuts.push_back(std::clamp(in.law.quantile(b), in.law.lo, in.law.hi));
  std::sort(cuts.begin(), cuts.end());
  auto rho = [&](const ScalarFn& f) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      total += integrate(
          [&](double z) { return std::max(f(z), 0.0) * in.fm(in.law.cdf(z)) * in.law.pdf(z); }, cuts[k],
          cuts[k + 1], 1e-12);
    }
    return total;
  };
  rep.gap = std::abs(rho(in.v) - rho(in.u));
  return rep;
}

double FiniteSampleReport::allowed_rate(double eta) const {
  return eta + 2.0 * std::sqrt(eta * (1.0 - eta) / trials);
}

FiniteSampleReport finite_sample_bound_check(const FiniteSampleInput& in) {
  if (in.trials < 100) throw std::invalid_argument("finite_sample_bound_check: at least 100 trials");
  if (!(in.eta > 0.0 && in.eta <= 1.0)) throw std::invalid_argument("finite_sample_bound_check: eta in (0, 1]");
  if (!(in.p >= 1.0)) throw std::invalid_argument("finite_sample_bound_check: p must be at least 1");
  FiniteSampleReport rep;
  rep.trials = in.trials;
  rep.lp_norm = lp_distance(in.v, in.u, in.p, in.law.lo, in.law.hi);
  rep.sup_norm = uniform_gap(in.v, in.u, in.law.lo, in.law.hi).gap;
  const double f_sup = in.law.density_sup;
  const double n = in.n;
  rep.bound_a = std::pow(f_sup / in.eta, 1.0 / in.p) * std::pow(n, 1.0 / in.p) * rep.lp_norm;
  // ||f_m||_{L^q} of the CES density 1/(1-alpha) on (alpha, 1), 1/p + 1/q = 1.
  const double q = conjugate(in.p);
  const double fm_norm = std::isinf(q) ? 1.0 / (1.0 - in.alpha) : std::pow(1.0 - in.alpha, 1.0 / q - 1.0);
  rep.bound_b = fm_norm * std::pow(f_sup, 1.0 / in.p) * rep.lp_norm +
                std::pow(-std::log(in.eta) / n, 1.0 / (2.0 * in.p)) * fm_norm * rep.sup_norm;

  const ScalarFn& draw = in.sampler_quantile ? in.sampler_quantile : in.law.quantile;
  const std::vector<MeasureSpec> law_invariant{ExpectedExposure{}, PotentialFutureExposure{in.alpha},
                                               ConditionalExpectedShortfall{in.alpha}};
  for (int trial = 0; trial < in.trials; ++trial) {
    Rng rng = substream(in.seed, static_cast<std::uint64_t>(trial), 0xB0B);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd x(in.n), y(in.n);
    for (int i = 0; i < in.n; ++i) {
      double w = unit(rng);
      while (w <= 0.0) w = unit(rng);
      const double z = draw(w);
      x(i) = std::max(in.v(z), 0.0);
      y(i) = std::max(in.u(z), 0.0);
    }
    double worst = 0.0;
    double ces_gap = 0.0;
    for (const auto& spec : law_invariant) {
      const double g = std::abs(measure(x, spec).estimate - measure(y, spec).estimate);
      worst = std::max(worst, g);
      if (std::holds_alternative<ConditionalExpectedShortfall>(spec)) ces_gap = g;
    }
    if (worst > rep.bound_a) ++rep.violations_a;
    if (ces_gap > rep.bound_b) ++rep.violations_b;
  }
  return rep;
}

int ordered_difference_violations(int trials, int length, double p, std::uint64_t seed) {
  int violations = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(trial), 0x50F7);
    std::normal_distribution<double> normal;
    Eigen::VectorXd a(length), b(length);
    for (int i = 0; i < length; ++i) {
      a(i) = normal(rng);
      b(i) = a(i) + 0.5 * normal(rng);
    }
    Eigen::VectorXd sa = a, sb = b;
    std::sort(sa.data(), sa.data() + length);
    std::sort(sb.data(), sb.data() + length);
    auto norm = [p](const Eigen::VectorXd& v) {
      if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
      return std::pow(v.cwiseAbs().array().pow(p).sum(), 1.0 / p);
    };
    const double lhs = norm(sa - sb);
    const double rhs = norm(a - b);
    if (lhs > rhs * (1.0 + 1e-12) + 1e-15) ++violations;
  }
  return violations;
}

ContractionCounts measure_contraction_violations(int trials, int length, double alpha, std::uint64_t seed) {
  const std::vector<MeasureSpec> specs{ExpectedExposure{}, PotentialFutureExposure{alpha},
                                       ConditionalExpectedShortfall{alpha}};
  ContractionCounts counts;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(trial), 0xC047);
    std::exponential_distribution<double> expo(1.0);
    std::normal_distribution<double> normal;
    Eigen::VectorXd x(length), y(length);
    for (int i = 0; i < length; ++i) {
      x(i) = expo(rng);
      y(i) = std::max(x(i) + 0.1 * normal(rng), 0.0);
    }
    Eigen::VectorXd sx = x, sy = y;
    std::sort(sx.data(), sx.data() + length);
    std::sort(sy.data(), sy.data() + length);
    const double sorted_gap = (sx - sy).cwiseAbs().maxCoeff();
    const double path_gap = (x - y).cwiseAbs().maxCoeff();
    if (sorted_gap > path_gap) ++counts.pathwise_violations;
    for (const auto& spec : specs) {
      const double gap = std::abs(measure_generic(x, measure_weights(length, spec)) -
                                  measure_generic(y, measure_weights(length, spec)));
      if (gap > sorted_gap * (1.0 + 1e-12) + 1e-14) ++counts.sorted_violations;
    }
  }
  return counts;
}

}  // namespace ccr
