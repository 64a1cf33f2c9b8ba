#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "ccr/model.hpp"
#include "ccr/simulation.hpp"

namespace ccr {

/// Risk-neutral probability of counterparty default before t.
struct PdCurve {
  std::function<double(double)> pd;

  double operator()(double t) const { return pd(t); }
  static PdCurve uniform(double horizon);
};

struct FundingSpread {
  std::function<double(double)> fs;

  double operator()(double t) const { return fs(t); }
  static FundingSpread constant(double spread = 0.01);
};

/// Spot delta V'_{t_u}(s) for grid index u (1..m).
using DeltaFn = std::function<double(int u, double s)>;

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// CVA'(s0) = 1/n sum_u e^{-r t_u} (PD(t_u) - PD(t_{u-1})) sum_i V'(s^i_{t_u}) s^i_{t_u} / s0
/// with zero recovery. The standard error comes from the per-path sums.
McEstimate cva_delta_mc(const PathSet& paths, const DeltaFn& delta, const PdCurve& pd, double r);

/// Nested one-step simulation of z_{t+delta} given z_t.
struct InnerSampler {
  ModelSpec model;
  double horizon = 10.0 / 252.0;
  int samples = 1000;
  std::uint64_t seed = 0;

  /// Row i holds the p inner spots started from outer[i]; stream keyed by (i, u).
  Eigen::MatrixXd sample(const Eigen::Ref<const Eigen::VectorXd>& outer_spots,
                         const Eigen::Ref<const Eigen::VectorXd>& outer_variances, int u,
                         int threads = 1) const;
};

/// IM^i = alpha-quantile (order statistic floor(p alpha) + 1) of
/// V'(z^i) (z^{ij} - z^i). `clamped` is set when p < 1 / (1 - alpha) and the
/// index falls back to the sample maximum.
Eigen::VectorXd isda_im(const Eigen::Ref<const Eigen::VectorXd>& outer, const Eigen::Ref<const Eigen::MatrixXd>& inner,
                        const std::function<double(double)>& delta, double alpha, bool* clamped = nullptr);

/// MVA = sum_u FS(t_u) (t_u - t_{u-1}) 1/n sum_i IM^i_{t_u}, u = 1..m, for
/// several delta functions on the same inner samples. No margin is posted
/// once the trade has expired, so IM is zero for t_u >= maturity.
std::vector<McEstimate> mva_isda(const PathSet& paths, const InnerSampler& sampler,
                                 const std::vector<DeltaFn>& deltas, const FundingSpread& fs, double alpha,
                                 double maturity, int threads = 1);

}  // namespace ccr
