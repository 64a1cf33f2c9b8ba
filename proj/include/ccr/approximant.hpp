#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccr/pricing.hpp"

namespace ccr {

/// Value model intercept + slope * s used outside the interpolated range.
struct AffineTail {
  double intercept = 0.0;
  double slope = 0.0;
  double operator()(double s) const { return intercept + slope * s; }
};

struct ChebPiece {
  double lo = 0.0;
  double hi = 1.0;
  double var_lo = 0.0;  // variance range, two-factor pieces only
  double var_hi = 0.0;
  Eigen::MatrixXd coeffs;  // (N+1) x 1, or (N+1) x (N+1) over (spot, variance)

  int degree() const { return static_cast<int>(coeffs.rows()) - 1; }
  bool two_factor() const { return coeffs.cols() > 1; }
};

class OutOfDomain : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Piecewise Chebyshev interpolant of z -> V_t(z) with optional affine tails.
/// Pieces are contiguous and cover [left_cut, right_cut].
class ChebyshevApproximant {
 public:
  std::vector<ChebPiece> pieces;
  std::optional<AffineTail> left_tail;
  std::optional<AffineTail> right_tail;
  double left_cut = 0.0;
  double right_cut = 0.0;
  /// Two-factor only: tail cuts per bin of the piece variance range, the bins
  /// having equal width in square-root variance. A state inside that range uses the left (right) tail
  /// below (above) the cut of its bin. Empty when unused.
  std::vector<double> left_stairs;
  std::vector<double> right_stairs;
  /// Upper bound on the value (e^{-r tau} for the digital put); applied after
  /// interpolation.
  std::optional<double> cap;
  int factors = 1;

  double value(const State& z) const;
  /// value() for many states at once; `variances` is ignored for one-factor
  /// approximants and may be empty. Equal to value() up to rounding.
  void values(const Eigen::Ref<const Eigen::VectorXd>& spots, const Eigen::Ref<const Eigen::VectorXd>& variances,
              Eigen::Ref<Eigen::VectorXd> out) const;
  /// dV/ds of the interpolant.
  double delta(const State& z) const;
  /// Largest piece degree (0 when there are no pieces).
  int degree() const;

 private:
  const ChebPiece* locate(double s, double variance) const;
  /// -1 for the left tail, +1 for the right tail, 0 inside the pieces.
  int tail_side(double s, double variance) const;
  void values_two_factor(const Eigen::Ref<const Eigen::VectorXd>& spots,
                         const Eigen::Ref<const Eigen::VectorXd>& variances, Eigen::Ref<Eigen::VectorXd> out) const;
};

struct DomainOptions {
  bool split_at_strike = true;
  bool tails = true;
  /// Absolute tolerance for |V - asymptote|; <= 0 selects 1e-8 times the payoff scale.
  double tail_tolerance = 0.0;
};

struct ChebDomain {
  std::vector<double> breaks;  // ascending piece boundaries; size 1 means no pieces
  double var_lo = 0.0;
  double var_hi = 0.0;
  int factors = 1;
  std::optional<AffineTail> left_tail;
  std::optional<AffineTail> right_tail;
  std::vector<double> left_stairs;  // see ChebyshevApproximant
  std::vector<double> right_stairs;
  std::optional<double> cap;

  int piece_count() const { return static_cast<int>(breaks.size()) - 1; }
};

/// Fitting domain for the states {spots, variances} at time t. The range
/// is the sample range (widened by 1% when degenerate), split at the strike,
/// and shortened wherever the price already matches its asymptote.
ChebDomain build_domain(const Pricer& pricer, double t, const Eigen::Ref<const Eigen::VectorXd>& spots,
                        const Eigen::Ref<const Eigen::VectorXd>& variances,
                        const DomainOptions& options = {});

struct FitStats {
  long pricer_calls = 0;
};

/// Interpolates V_t on every piece of `domain` with `degree` (>= 1).
ChebyshevApproximant fit_approximant(const Pricer& pricer, double t, const ChebDomain& domain,
                                     int degree, FitStats* stats = nullptr);

struct AdaptiveOptions {
  double tolerance = 1e-3;
  bool return_finer = false;
  int max_degree = 1024;
  int probes = 100;
  std::uint64_t seed = 7;
};

struct AdaptiveResult {
  ChebyshevApproximant approximant;
  std::vector<int> degrees;       // accepted degree per piece
  std::vector<double> estimates;  // final error estimate per piece
  long pricer_calls = 0;
};

class DegreeCapExceeded : public std::runtime_error {
 public:
  DegreeCapExceeded(int degree, double estimate);
  int degree;
  double last_estimate;
};

/// Doubles the degree per piece (1, 2, 4, ...) until two consecutive
/// interpolants differ by less than the tolerance on random probes, reusing
/// the nested node values. Returns the coarser of the two unless
/// `return_finer` is set.
AdaptiveResult adaptive_fit(const Pricer& pricer, double t, const ChebDomain& domain,
                            const AdaptiveOptions& options);

/// max |p_n - p_2n| over `probes` uniform points of [a, b], where p_k
/// interpolates f at the degree-k nodes.
double cheb_error_estimate(const std::function<double(double)>& f, double a, double b, int n,
                           int probes = 100, std::uint64_t seed = 7);

/// Versioned binary format (magic "CCRCHEB", version 2).
void write_binary(const ChebyshevApproximant& approximant, std::ostream& out);
ChebyshevApproximant read_approximant_binary(std::istream& in);
std::string to_json(const ChebyshevApproximant& approximant);
ChebyshevApproximant approximant_from_json(const std::string& text);

}  // namespace ccr
