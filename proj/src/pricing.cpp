#include "ccr/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ccr {

using cplx = std::complex<double>;

double OptionSpec::payoff(double s) const {
  switch (kind) {
    case OptionKind::european_call: return std::max(s - strike, 0.0);
    case OptionKind::digital_put: return s < strike ? 1.0 : 0.0;
    case OptionKind::up_and_out_call: return s < barrier ? std::max(s - strike, 0.0) : 0.0;
    case OptionKind::american_put: return std::max(strike - s, 0.0);
    case OptionKind::american_call: return std::max(s - strike, 0.0);
  }
  return 0.0;
}

double OptionSpec::payoff_slope(double s) const {
  switch (kind) {
    case OptionKind::european_call:
    case OptionKind::american_call: return s > strike ? 1.0 : 0.0;
    case OptionKind::digital_put: return 0.0;
    case OptionKind::up_and_out_call: return (s > strike && s < barrier) ? 1.0 : 0.0;
    case OptionKind::american_put: return s < strike ? -1.0 : 0.0;
  }
  return 0.0;
}

void OptionSpec::validate() const {
  if (!(strike > 0.0)) throw std::invalid_argument("option: strike must be positive");
  if (!(maturity > 0.0)) throw std::invalid_argument("option: maturity must be positive");
  if (kind == OptionKind::up_and_out_call && !(barrier > strike))
    throw std::invalid_argument("option: barrier must exceed the strike");
}

std::string OptionSpec::name() const {
  switch (kind) {
    case OptionKind::european_call: return "european_call";
    case OptionKind::digital_put: return "digital_put";
    case OptionKind::up_and_out_call: return "up_and_out_call";
    case OptionKind::american_put: return "american_put";
    case OptionKind::american_call: return "american_call";
  }
  return "unknown";
}

OptionSpec calibrated_option(const std::string& id) {
  constexpr double k = 3825.33;
  if (id == "european" || id == "european_call") return {OptionKind::european_call, k, 0.0, 1.0};
  if (id == "digital" || id == "digital_put") return {OptionKind::digital_put, k, 0.0, 1.0};
  if (id == "barrier" || id == "up_and_out_call") return {OptionKind::up_and_out_call, k, 5738.0, 1.0};
  if (id == "american" || id == "american_put") return {OptionKind::american_put, k, 0.0, 1.0};
  throw std::invalid_argument("unknown option id: " + id);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace {

void check_time(const OptionSpec& option, double t, double s) {
  if (!(t < option.maturity)) throw std::invalid_argument("pricer: t must be before maturity");
  if (!(s > 0.0)) throw std::invalid_argument("pricer: spot must be positive");
}

double bs_call(double s, double k, double sigma, double r, double tau) {
  const double sd = sigma * std::sqrt(tau);
  const double d1 = (std::log(s / k) + r * tau) / sd + 0.5 * sd;
  return s * normal_cdf(d1) - k * std::exp(-r * tau) * normal_cdf(d1 - sd);
}

// Reflection-principle closed form, strike below barrier, no rebate.
double up_and_out_call(double s, double k, double h, double sigma, double r, double tau) {
  if (s >= h) return 0.0;
  const double sd = sigma * std::sqrt(tau);
  const double mu = (r - 0.5 * sigma * sigma) / (sigma * sigma);
  const double shift = (1.0 + mu) * sd;
  const double df = std::exp(-r * tau);
  const double x1 = std::log(s / k) / sd + shift;
  const double x2 = std::log(s / h) / sd + shift;
  const double y1 = std::log(h * h / (s * k)) / sd + shift;
  const double y2 = std::log(h / s) / sd + shift;
  const double ratio = h / s;
  const double p1 = std::pow(ratio, 2.0 * (mu + 1.0));
  const double p2 = std::pow(ratio, 2.0 * mu);
  const double a = s * normal_cdf(x1) - k * df * normal_cdf(x1 - sd);
  const double b = s * normal_cdf(x2) - k * df * normal_cdf(x2 - sd);
  const double c = s * p1 * normal_cdf(-y1) - k * df * p2 * normal_cdf(-y1 + sd);
  const double d = s * p1 * normal_cdf(-y2) - k * df * p2 * normal_cdf(-y2 + sd);
  return std::max(a - b + c - d, 0.0);
}

}  // namespace

double price_analytic_bsm(const OptionSpec& option, double sigma, double r, double t, double s) {
  check_time(option, t, s);
  const double tau = option.maturity - t;
  const double k = option.strike;
  switch (option.kind) {
    case OptionKind::european_call: return bs_call(s, k, sigma, r, tau);
    case OptionKind::digital_put: {
      const double sd = sigma * std::sqrt(tau);
      const double d2 = (std::log(s / k) + r * tau) / sd - 0.5 * sd;
      return std::exp(-r * tau) * normal_cdf(-d2);
    }
    case OptionKind::up_and_out_call:
      return up_and_out_call(s, k, option.barrier, sigma, r, tau);
    default: throw std::invalid_argument("analytic pricer: unsupported option " + option.name());
  }
}

double delta_analytic_bsm(const OptionSpec& option, double sigma, double r, double t, double s) {
  check_time(option, t, s);
  const double tau = option.maturity - t;
  const double sd = sigma * std::sqrt(tau);
  const double d1 = (std::log(s / option.strike) + r * tau) / sd + 0.5 * sd;
  switch (option.kind) {
    case OptionKind::european_call: return normal_cdf(d1);
    case OptionKind::digital_put:
      return -std::exp(-r * tau) * normal_pdf(d1 - sd) / (s * sd);
    case OptionKind::up_and_out_call: {
      if (s >= option.barrier) return 0.0;
      const double h = 1e-5 * s;
      const double up = std::min(s + h, option.barrier);
      const double down = s - h;
      return (price_analytic_bsm(option, sigma, r, t, up) -
              price_analytic_bsm(option, sigma, r, t, down)) /
             (up - down);
    }
    default: throw std::invalid_argument("analytic delta: unsupported option " + option.name());
  }
}

CharacteristicFn::CharacteristicFn(const ModelSpec& model, double tau, double variance)
    : model_(model), tau_(tau), variance_(std::max(variance, 0.0)) {
  if (!(tau > 0.0)) throw std::invalid_argument("charfn: tau must be positive");
}

cplx CharacteristicFn::operator()(double u) const {
  const cplx i(0.0, 1.0);
  const double r = model_.r;
  if (const auto* p = std::get_if<BsmParams>(&model_.dynamics)) {
    const double s2 = p->sigma * p->sigma;
    return std::exp(i * u * (r - 0.5 * s2) * tau_ - 0.5 * s2 * u * u * tau_);
  }
  if (const auto* p = std::get_if<MjdParams>(&model_.dynamics)) {
    const double s2 = p->sigma * p->sigma;
    const double drift = r - 0.5 * s2 - p->lambda * jump_compensator(*p);
    const cplx jump = std::exp(i * u * p->gamma - 0.5 * p->delta * p->delta * u * u) - 1.0;
    return std::exp(i * u * drift * tau_ - 0.5 * s2 * u * u * tau_ + p->lambda * tau_ * jump);
  }
  // Heston in the rotation-free ("little trap") form. a - d is taken as
  // -eta^2 q / (a + d) so that small vol of vol does not cancel.
  const auto& h = std::get<HsvParams>(model_.dynamics);
  const double eta2 = h.eta * h.eta;
  const cplx a = h.kappa - h.rho * h.eta * i * u;
  const cplx q = i * u + u * u;
  const cplx d = std::sqrt(a * a + eta2 * q);
  const cplx apd = a + d;
  const cplx g = -eta2 * q / (apd * apd);
  const cplx e = std::exp(-d * tau_);
  const cplx z = g * (1.0 - e) / (1.0 - g);
  // log(1 + z) / eta^2 = (z / eta^2) * log1p(z) / z
  const cplx log1p_ratio = std::abs(z) < 1e-5 ? 1.0 - z / 2.0 + z * z / 3.0 : std::log(1.0 + z) / z;
  const cplx z_over_eta2 = -q / (apd * apd) * (1.0 - e) / (1.0 - g);
  const cplx c = i * u * r * tau_ + h.kappa * h.theta * (-q / apd * tau_ - 2.0 * z_over_eta2 * log1p_ratio);
  const cplx dd = -q / apd * (1.0 - e) / (1.0 - g * e);
  return std::exp(c + dd * variance_);
}

Cumulants CharacteristicFn::cumulants() const {
  const double r = model_.r;
  const double t = tau_;
  if (const auto* p = std::get_if<BsmParams>(&model_.dynamics)) {
    const double s2 = p->sigma * p->sigma;
    return {(r - 0.5 * s2) * t, s2 * t, 0.0};
  }
  if (const auto* p = std::get_if<MjdParams>(&model_.dynamics)) {
    const double s2 = p->sigma * p->sigma;
    const double g = p->gamma;
    const double d2 = p->delta * p->delta;
    return {(r - 0.5 * s2 - p->lambda * jump_compensator(*p) + p->lambda * g) * t,
            (s2 + p->lambda * (g * g + d2)) * t,
            p->lambda * (g * g * g * g + 6.0 * g * g * d2 + 3.0 * d2 * d2) * t};
  }
  const auto& h = std::get<HsvParams>(model_.dynamics);
  const double k = h.kappa;
  const double th = h.theta;
  const double v = variance_;
  const double ek = std::exp(-k * t);
  const double c1 = r * t + (1.0 - ek) * (th - v) / (2.0 * k) - 0.5 * th * t;
  // Second and fourth cumulants from central differences of ln phi at the origin.
  auto lphi = [this](double u) { return std::log((*this)(u)).real(); };
  const double e = 1e-3;
  const double c2 = -(lphi(e) - 2.0 * lphi(0.0) + lphi(-e)) / (e * e);
  const double f = 0.05;
  const double c4 = (lphi(2.0 * f) - 4.0 * lphi(f) + 6.0 * lphi(0.0) - 4.0 * lphi(-f) + lphi(-2.0 * f)) / (f * f * f * f);
  return {c1, c2, std::max(c4, 0.0)};
}

double price_cos(const OptionSpec& option, const CharacteristicFn& charfn, double spot,
                 const CosParams& params) {
  if (params.terms < 16) throw std::invalid_argument("cos: at least 16 terms required");
  if (!(spot > 0.0)) throw std::invalid_argument("cos: spot must be positive");
  const bool call = option.kind == OptionKind::european_call;
  if (!call && option.kind != OptionKind::digital_put)
    throw std::invalid_argument("cos: unsupported option " + option.name());

  const Cumulants cm = charfn.cumulants();
  const double width = params.width * std::sqrt(std::abs(cm.c2) + std::sqrt(std::abs(cm.c4)));
  const double x = std::log(spot / option.strike);
  // y = ln(S_T / K) is truncated to [a, b] centred on its mean.
  const double a = x + cm.c1 - width;
  const double b = x + cm.c1 + width;
  const double tau = charfn.tau();
  const double df = std::exp(-charfn.rate() * tau);
  const double k = option.strike;

  // The truncated density lies entirely on one side of the strike.
  if (a >= 0.0) return call ? spot - k * df : 0.0;
  if (b <= 0.0) return call ? 0.0 : df;
  const double len = b - a;
  const double hi = std::min(0.0, b);
  double sum = 0.0;
  for (int j = 0; j < params.terms; ++j) {
    const double w = j * std::numbers::pi / len;
    const double sin_hi = std::sin(w * (hi - a));
    const double cos_hi = std::cos(w * (hi - a));
    // psi_j(a, hi) and chi_j(a, hi) of the cosine expansion of the payoff.
    const double psi = j == 0 ? hi - a : sin_hi / w;
    double coeff;
    if (call) {
      const double chi = (cos_hi * std::exp(hi) - std::exp(a) + w * sin_hi * std::exp(hi)) / (1.0 + w * w);
      coeff = 2.0 / len * k * (psi - chi);
    } else {
      coeff = 2.0 / len * psi;
    }
    const cplx phase = charfn(w) * std::exp(cplx(0.0, w * (x - a)));
    const double term = phase.real() * coeff;
    if (!std::isfinite(term)) throw std::domain_error("cos: non-finite characteristic function");
    sum += j == 0 ? 0.5 * term : term;
  }
  const double put_or_digital = df * sum;
  return call ? put_or_digital + spot - k * df : put_or_digital;
}

double price_binomial_american(const OptionSpec& option, double sigma, double r, int steps,
                               double t, double s, bool continuation_only) {
  if (steps < 64) throw std::invalid_argument("binomial: at least 64 steps required");
  if (!option.is_american()) throw std::invalid_argument("binomial: american options only");
  check_time(option, t, s);
  const double tau = option.maturity - t;
  const double dt = tau / steps;
  const double up = std::exp(sigma * std::sqrt(dt));
  const double down = 1.0 / up;
  const double growth = std::exp(r * dt);
  const double p = (growth - down) / (up - down);
  const double disc = 1.0 / growth;
  const double k = option.strike;
  const bool put = option.kind == OptionKind::american_put;
  auto exercise = [&](double spot) { return put ? std::max(k - spot, 0.0) : std::max(spot - k, 0.0); };

  std::vector<double> v(static_cast<std::size_t>(steps) + 1);
  // Node j at level n has spot s * up^(2j - n).
  for (int j = 0; j <= steps; ++j) v[j] = exercise(s * std::pow(up, 2 * j - steps));
  for (int n = steps - 1; n >= 0; --n) {
    double spot = s * std::pow(up, -n);
    const double step = up * up;
    for (int j = 0; j <= n; ++j) {
      const double cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
      v[j] = (n == 0 && continuation_only) ? cont : std::max(cont, exercise(spot));
      spot *= step;
    }
  }
  return v[0];
}

namespace {

struct Support {
  bool ok;
  const char* reason;
};

Support supports(const ModelSpec& model, const OptionSpec& option, const PricingMethod& method) {
  const bool bsm = std::holds_alternative<BsmParams>(model.dynamics);
  const auto kind = option.kind;
  if (std::holds_alternative<AnalyticBsm>(method)) {
    if (!bsm) return {false, "analytic pricing requires the BSM model"};
    if (kind == OptionKind::european_call || kind == OptionKind::digital_put ||
        kind == OptionKind::up_and_out_call)
      return {true, ""};
    return {false, "analytic pricing covers european, digital and barrier options"};
  }
  if (std::holds_alternative<CosParams>(method)) {
    if (kind == OptionKind::european_call || kind == OptionKind::digital_put) return {true, ""};
    return {false, "COS pricing covers european and digital options"};
  }
  if (!bsm) return {false, "binomial pricing requires the BSM model"};
  if (option.is_american()) return {true, ""};
  return {false, "binomial pricing covers american options"};
}

}  // namespace

Pricer::Pricer(ModelSpec model, OptionSpec option, PricingMethod method)
    : model_(std::move(model)), option_(option), method_(method) {
  model_.validate();
  option_.validate();
  const auto s = supports(model_, option_, method_);
  if (!s.ok) throw std::invalid_argument(std::string("pricer: ") + s.reason);
  if (const auto* c = std::get_if<CosParams>(&method_); c && c->terms < 16)
    throw std::invalid_argument("pricer: COS needs at least 16 terms");
  if (const auto* b = std::get_if<BinomialCrr>(&method_); b && b->steps < 64)
    throw std::invalid_argument("pricer: binomial tree needs at least 64 steps");
}

double Pricer::raw_value(double t, const State& z, bool continuation_only) const {
  if (t >= option_.maturity) return option_.payoff(z.spot);
  if (std::holds_alternative<AnalyticBsm>(method_)) {
    return price_analytic_bsm(option_, std::get<BsmParams>(model_.dynamics).sigma, model_.r, t,
                              z.spot);
  }
  if (const auto* c = std::get_if<CosParams>(&method_)) {
    const CharacteristicFn charfn(model_, option_.maturity - t, z.variance);
    return price_cos(option_, charfn, z.spot, *c);
  }
  const auto& tree = std::get<BinomialCrr>(method_);
  return price_binomial_american(option_, std::get<BsmParams>(model_.dynamics).sigma, model_.r,
                                 tree.steps, t, z.spot, continuation_only);
}

double Pricer::value(double t, const State& z) const { return raw_value(t, z, false); }

double Pricer::continuation(double t, const State& z) const { return raw_value(t, z, true); }

double Pricer::delta(double t, const State& z) const {
  if (t >= option_.maturity) return option_.payoff_slope(z.spot);
  if (std::holds_alternative<AnalyticBsm>(method_)) {
    return delta_analytic_bsm(option_, std::get<BsmParams>(model_.dynamics).sigma, model_.r, t,
                              z.spot);
  }
  const double h = 1e-4 * z.spot;
  return (value(t, {z.spot + h, z.variance}) - value(t, {z.spot - h, z.variance})) / (2.0 * h);
}

std::string Pricer::id() const {
  std::ostringstream os;
  os << model_.name() << '/' << option_.name() << '/';
  if (std::holds_alternative<AnalyticBsm>(method_)) {
    os << "analytic";
  } else if (const auto* c = std::get_if<CosParams>(&method_)) {
    os << "cos(" << c->terms << ',' << c->width << ')';
  } else {
    os << "crr(" << std::get<BinomialCrr>(method_).steps << ')';
  }
  return os.str();
}

std::optional<double> exercise_boundary(const Pricer& pricer, double t, double tol) {
  const auto& option = pricer.option();
  if (!option.is_american()) throw std::invalid_argument("exercise boundary: american options only");
  if (!(t < option.maturity)) throw std::invalid_argument("exercise boundary: t must precede maturity");
  const double k = option.strike;
  const bool put = option.kind == OptionKind::american_put;
  // gap > 0 means holding is strictly better than exercising.
  auto gap = [&](double s) {
    return pricer.continuation(t, {s, 0.0}) - (put ? k - s : s - k);
  };
  double lo = put ? 1e-6 * k : k;
  double hi = put ? k : 1e3 * k;
  if (put) {
    if (gap(lo) >= 0.0) return std::nullopt;
  } else if (gap(hi) >= 0.0) {
    return std::nullopt;
  }
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const bool exercise_at_mid = gap(mid) < 0.0;
    if (exercise_at_mid == put) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace ccr
