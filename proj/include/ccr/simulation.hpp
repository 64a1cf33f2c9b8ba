#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>

#include "ccr/model.hpp"
#include "ccr/parallel.hpp"

namespace ccr {

/// Risk-factor state: spot price, plus variance for two-factor models.
struct State {
  double spot = 0.0;
  double variance = 0.0;
};

/// Simulated scenarios on an equidistant grid. Column u holds the states at t_u
/// across paths; `variance` is empty for one-factor models.
struct PathSet {
  TimeGrid grid;
  std::uint64_t seed = 0;
  Eigen::MatrixXd spot;      // n x (m + 1)
  Eigen::MatrixXd variance;  // n x (m + 1) or 0 x 0

  int paths() const { return static_cast<int>(spot.rows()); }
  int steps() const { return grid.steps; }
  int dims() const { return variance.size() > 0 ? 2 : 1; }
  State state(int path, int u) const {
    return {spot(path, u), dims() == 2 ? variance(path, u) : 0.0};
  }
};

/// Advances one state by `dt` with a log-Euler step (full truncation for the
/// variance). Jumps are compensated so the drift is the mean return.
State advance(const ModelSpec& model, const State& from, double dt, Measure measure, Rng& rng);

/// Euler-Maruyama paths; path i draws from its own substream of `seed`.
PathSet simulate(const ModelSpec& model, const TimeGrid& grid, int paths, Measure measure,
                 std::uint64_t seed, int threads = 1);

/// Binary layout: magic "CCRPATH1", n, m, d (int32), seed (uint64), horizon
/// (double), then row-major states with the d factors interleaved.
void write_binary(const PathSet& paths, std::ostream& out);
PathSet read_paths_binary(std::istream& in);

/// CSV layout: a header line `n,m,d,seed,horizon` with its values, then one
/// row per path with m+1 (d = 1) or 2(m+1) interleaved (d = 2) columns.
void write_csv(const PathSet& paths, std::ostream& out);

}  // namespace ccr
