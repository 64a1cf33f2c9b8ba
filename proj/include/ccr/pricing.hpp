#pragma once

#include <complex>
#include <optional>
#include <string>
#include <variant>

#include "ccr/model.hpp"
#include "ccr/simulation.hpp"

namespace ccr {

enum class OptionKind { european_call, digital_put, up_and_out_call, american_put, american_call };

struct OptionSpec {
  OptionKind kind = OptionKind::european_call;
  double strike = 1.0;
  double barrier = 0.0;  // up_and_out_call only
  double maturity = 1.0;

  double payoff(double spot) const;
  /// Derivative of the payoff in spot (0 at the kinks).
  double payoff_slope(double spot) const;
  bool is_american() const {
    return kind == OptionKind::american_put || kind == OptionKind::american_call;
  }
  void validate() const;
  std::string name() const;
};

/// Contracts of the calibration study: T = 1, K = S0, B = 5738.
OptionSpec calibrated_option(const std::string& id);

double normal_cdf(double x);
double normal_pdf(double x);

/// Closed-form Black-Scholes value at time t for spot s. Supports the
/// European call, the cash-or-nothing digital put and the continuously
/// monitored up-and-out call (zero rebate). Throws for t >= T.
double price_analytic_bsm(const OptionSpec& option, double sigma, double r, double t, double s);
/// Closed-form spot delta for the call and digital; central difference for the barrier.
double delta_analytic_bsm(const OptionSpec& option, double sigma, double r, double t, double s);

struct Cumulants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c4 = 0.0;
};

/// Risk-neutral characteristic function of the log return ln(S_{t+tau}/S_t),
/// conditioned on the current variance for the Heston model.
class CharacteristicFn {
 public:
  CharacteristicFn(const ModelSpec& model, double tau, double variance = 0.0);

  std::complex<double> operator()(double u) const;
  Cumulants cumulants() const;
  double tau() const { return tau_; }
  double rate() const { return model_.r; }

 private:
  ModelSpec model_;
  double tau_;
  double variance_;
};

struct CosParams {
  int terms = 256;
  double width = 10.0;  // L in the cumulant truncation rule
};

/// Fourier-cosine price of a European call or digital put. The call is
/// obtained from the put by parity.
double price_cos(const OptionSpec& option, const CharacteristicFn& charfn, double spot,
                 const CosParams& params = {});

/// Cox-Ross-Rubinstein tree over the remaining life T - t with `steps` steps.
/// With `continuation_only` the root is not exercised, which yields the
/// continuation value used to locate the exercise boundary.
double price_binomial_american(const OptionSpec& option, double sigma, double r, int steps,
                               double t, double s, bool continuation_only = false);

struct AnalyticBsm {};
struct BinomialCrr {
  int steps = 256;
};
using PricingMethod = std::variant<AnalyticBsm, CosParams, BinomialCrr>;

/// Reference ("black box") pricer V_t(z). Stateless; safe to share across threads.
class Pricer {
 public:
  /// Throws std::invalid_argument when the method does not support the pair.
  Pricer(ModelSpec model, OptionSpec option, PricingMethod method);

  /// V_t(z); the payoff at t >= T.
  double value(double t, const State& z) const;
  /// Continuation value (no exercise at t) for American options; value() otherwise.
  double continuation(double t, const State& z) const;
  /// dV/ds at (t, z).
  double delta(double t, const State& z) const;

  const ModelSpec& model() const { return model_; }
  const OptionSpec& option() const { return option_; }
  const PricingMethod& method() const { return method_; }
  std::string id() const;

 private:
  double raw_value(double t, const State& z, bool continuation_only) const;

  ModelSpec model_;
  OptionSpec option_;
  PricingMethod method_;
};

/// Spot s* where the continuation value meets the exercise payoff, found by
/// bisection to absolute tolerance `tol`. Exercise is optimal below s* for a
/// put and above it for a call. std::nullopt when early exercise never pays
/// inside the search interval.
std::optional<double> exercise_boundary(const Pricer& pricer, double t, double tol);

}  // namespace ccr
