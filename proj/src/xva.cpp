#include "ccr/xva.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ccr/parallel.hpp"

namespace ccr {

PdCurve PdCurve::uniform(double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("pd: horizon must be positive");
  return {[horizon](double t) { return std::clamp(t / horizon, 0.0, 1.0); }};
}

FundingSpread FundingSpread::constant(double spread) {
  if (spread < 0.0) throw std::invalid_argument("funding spread must be nonnegative");
  return {[spread](double) { return spread; }};
}

namespace {

McEstimate summarize(const Eigen::VectorXd& per_path) {
  const double n = static_cast<double>(per_path.size());
  const double mean = per_path.mean();
  const double var = per_path.size() > 1 ? (per_path.array() - mean).square().sum() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

}  // namespace

McEstimate cva_delta_mc(const PathSet& paths, const DeltaFn& delta, const PdCurve& pd, double r) {
  if (paths.dims() != 1) throw std::invalid_argument("cva_delta_mc: single-underlying paths only");
  const int n = paths.paths();
  const int m = paths.steps();
  Eigen::VectorXd per_path = Eigen::VectorXd::Zero(n);
  for (int u = 1; u <= m; ++u) {
    const double t = paths.grid.time(u);
    const double weight = std::exp(-r * t) * (pd(t) - pd(paths.grid.time(u - 1)));
    if (weight == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double s = paths.spot(i, u);
      per_path(i) += weight * delta(u, s) * s / paths.spot(i, 0);
    }
  }
  return summarize(per_path);
}

Eigen::MatrixXd InnerSampler::sample(const Eigen::Ref<const Eigen::VectorXd>& outer_spots,
                                     const Eigen::Ref<const Eigen::VectorXd>& outer_variances, int u,
                                     int threads) const {
  if (samples < 1) throw std::invalid_argument("inner sampler: at least one inner sample required");
  if (horizon < 0.0) throw std::invalid_argument("inner sampler: negative horizon");
  const auto n = outer_spots.size();
  Eigen::MatrixXd out(n, samples);
  const bool two_factor = model.factor_count() == 2;
  parallel_for(n, threads, [&](std::int64_t i) {
    const State from{outer_spots(i), two_factor ? outer_variances(i) : 0.0};
    if (horizon == 0.0) {
      out.row(i).setConstant(from.spot);
      return;
    }
    Rng rng = substream(seed, static_cast<std::uint64_t>(i), 0x1000 + static_cast<std::uint64_t>(u));
    for (int j = 0; j < samples; ++j) out(i, j) = advance(model, from, horizon, Measure::risk_neutral, rng).spot;
  });
  return out;
}

Eigen::VectorXd isda_im(const Eigen::Ref<const Eigen::VectorXd>& outer, const Eigen::Ref<const Eigen::MatrixXd>& inner,
                        const std::function<double(double)>& delta, double alpha, bool* clamped) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("isda_im: alpha must lie in (0, 1)");
  if (inner.rows() != outer.size()) throw std::invalid_argument("isda_im: inner/outer size mismatch");
  const int p = static_cast<int>(inner.cols());
  if (p < 1) throw std::invalid_argument("isda_im: no inner samples");
  int k = static_cast<int>(std::floor(p * alpha + 1e-9));
  // Fewer than 1 / (1 - alpha) samples leave no room above the quantile.
  if (clamped) *clamped = p * (1.0 - alpha) < 1.0;
  k = std::min(k, p - 1);
  Eigen::VectorXd im(outer.size());
  std::vector<double> pnl(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < outer.size(); ++i) {
    const double d = delta(outer(i));
    for (int j = 0; j < p; ++j) pnl[j] = d * (inner(i, j) - outer(i));
    std::nth_element(pnl.begin(), pnl.begin() + k, pnl.end());
    im(i) = pnl[k];
  }
  return im;
}

std::vector<McEstimate> mva_isda(const PathSet& paths, const InnerSampler& sampler,
                                 const std::vector<DeltaFn>& deltas, const FundingSpread& fs, double alpha,
                                 double maturity, int threads) {
  const int n = paths.paths();
  const int m = paths.steps();
  std::vector<Eigen::VectorXd> per_path(deltas.size(), Eigen::VectorXd::Zero(n));
  const Eigen::VectorXd no_variance;
  for (int u = 1; u <= m; ++u) {
    const double t = paths.grid.time(u);
    const double weight = fs(t) * (t - paths.grid.time(u - 1));
    if (weight == 0.0 || t >= maturity) continue;
    const Eigen::VectorXd outer = paths.spot.col(u);
    const Eigen::VectorXd outer_var = paths.dims() == 2 ? Eigen::VectorXd(paths.variance.col(u)) : no_variance;
    const Eigen::MatrixXd inner = sampler.sample(outer, outer_var, u, threads);
    for (std::size_t q = 0; q < deltas.size(); ++q) {
      const auto& fn = deltas[q];
      per_path[q] += weight * isda_im(outer, inner, [&](double s) { return fn(u, s); }, alpha);
    }
  }
  std::vector<McEstimate> out;
  for (const auto& v : per_path) out.push_back(summarize(v));
  return out;
}

}  // namespace ccr
