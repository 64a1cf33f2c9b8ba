#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ccr/approximant.hpp"
#include "ccr/pricing.hpp"
#include "ccr/simulation.hpp"

namespace ccr {

enum class MaskKind { none, barrier, american };

/// Path-wise exposures x^i_{t_u}; column u-1 holds time t_u, u = 1..m.
struct ExposureCube {
  Eigen::MatrixXd values;
  MaskKind mask = MaskKind::none;
  double seconds = 0.0;  // pricing stage wall-clock

  int paths() const { return static_cast<int>(values.rows()); }
  int steps() const { return static_cast<int>(values.cols()); }
};

/// Exercise boundary per grid time t_1..t_m (index u-1). The entry at T is
/// the strike; std::nullopt marks times without early exercise.
using BoundaryProfile = std::vector<std::optional<double>>;

BoundaryProfile exercise_boundaries(const Pricer& pricer, const TimeGrid& grid, double tol,
                                    int threads = 1);

/// max(V_{t_u}(z), 0) for every path and u = 1..m, priced one state at a
/// time. Barrier options are masked on the grid; American options are masked
/// when `boundaries` is given.
ExposureCube full_reeval(const PathSet& paths, const Pricer& pricer, int threads = 1,
                         const BoundaryProfile* boundaries = nullptr);

/// max(U_{t_u}(z), 0) with approximants[u-1] for u < m and the payoff at t_m.
/// Masked like full_reeval.
ExposureCube accelerated_reeval(const PathSet& paths, const std::vector<ChebyshevApproximant>& approximants,
                                const OptionSpec& option, int threads = 1,
                                const BoundaryProfile* boundaries = nullptr);

/// Zeroes knocked-out entries (u >= u*) for barrier options and exercised
/// entries (u > u*) for American options, u* being the first grid hit.
void apply_masking(ExposureCube& cube, const PathSet& paths, const OptionSpec& option,
                   const BoundaryProfile* boundaries);

struct ExpectedExposure {};
struct PotentialFutureExposure {
  double alpha = 0.95;
};
struct ConditionalExpectedShortfall {
  double alpha = 0.95;
};
/// Spectral measure with a nondecreasing step density on equal bins of (0, 1).
struct SpectralMeasure {
  std::vector<double> density;
};
using MeasureSpec =
    std::variant<ExpectedExposure, PotentialFutureExposure, ConditionalExpectedShortfall, SpectralMeasure>;

std::string measure_name(const MeasureSpec& spec);
void validate(const MeasureSpec& spec);

struct MeasureResult {
  double estimate = 0.0;
  /// Asymptotic standard deviation sigma(rho_hat); the CI is q * sigma / sqrt(n).
  std::optional<double> sigma;
  std::optional<double> ci_halfwidth;  // 95%
  std::string detail;
};

/// Empirical estimator and 95% CLT interval.
MeasureResult measure(const Eigen::Ref<const Eigen::VectorXd>& sample, const MeasureSpec& spec);

/// Weights w_{n,i} = m([(i-1)/n, i/n)) of the order statistics.
Eigen::VectorXd measure_weights(int n, const MeasureSpec& spec);

/// sum_i w_i x^(i); rejects weights that do not sum to one.
double measure_generic(const Eigen::Ref<const Eigen::VectorXd>& sample,
                       const Eigen::Ref<const Eigen::VectorXd>& weights);

struct MeasureProfile {
  std::string name;
  std::vector<double> full;
  std::vector<double> accel;
  std::vector<std::optional<double>> ci_halfwidth;  // of the full estimate
  double eps_accel = 0.0;  // max relative deviation over u
  int u_star = 0;          // 1-based time index of the maximum
  double eps_mc = 0.0;     // relative 95% CI length at u_star
  bool pass = false;
  std::vector<int> excluded;  // u with a zero full estimate
};

struct ComparisonReport {
  std::vector<MeasureProfile> profiles;
  std::vector<std::string> warnings;
  bool all_pass() const;
};

ComparisonReport profile_and_compare(const ExposureCube& x, const ExposureCube& y,
                                     const std::vector<MeasureSpec>& specs);

/// (full + mask) / (accel + mask); mask = 0 outside the American case.
double speedup(double full_seconds, double accel_seconds, double mask_seconds = 0.0);

}  // namespace ccr
