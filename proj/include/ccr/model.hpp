#pragma once

#include <string>
#include <variant>

namespace ccr {

/// Drift regime used when generating scenarios.
enum class Measure { physical, risk_neutral };

struct BsmParams {
  double sigma = 0.0;
};

/// Merton jump diffusion; log-jump sizes are N(gamma, delta^2), arrivals Poisson(lambda).
struct MjdParams {
  double sigma = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
};

/// Heston stochastic volatility; `v0` is the initial variance, `eta` the vol of vol.
struct HsvParams {
  double v0 = 0.0;
  double kappa = 0.0;
  double theta = 0.0;
  double eta = 0.0;
  double rho = 0.0;
};

using Dynamics = std::variant<BsmParams, MjdParams, HsvParams>;

struct ModelSpec {
  Dynamics dynamics;
  double s0 = 1.0;
  double mu = 0.0;  // physical drift
  double r = 0.0;   // risk-free rate

  /// 1 for BSM/MJD (spot only), 2 for HSV (spot and variance).
  int factor_count() const;
  double drift(Measure measure) const { return measure == Measure::physical ? mu : r; }
  /// Throws std::invalid_argument on any parameter outside its admissible range.
  void validate() const;
  std::string name() const;
};

/// Mean relative jump size e^{gamma + delta^2/2} - 1.
double jump_compensator(const MjdParams& p);

/// Calibrated parameter sets (S&P 500, 1 July 2022).
ModelSpec calibrated_bsm();
ModelSpec calibrated_mjd();
ModelSpec calibrated_hsv();
ModelSpec calibrated_model(const std::string& id);

/// Equidistant grid t_u = u T / m, u = 0..m.
struct TimeGrid {
  double horizon = 1.0;
  int steps = 1;

  double dt() const { return horizon / steps; }
  double time(int u) const { return horizon * u / steps; }
  void validate() const;
};

}  // namespace ccr
