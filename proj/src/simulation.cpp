#include "ccr/simulation.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace ccr {

State advance(const ModelSpec& model, const State& from, double dt, Measure measure, Rng& rng) {
  std::normal_distribution<double> normal;
  const double drift = model.drift(measure);
  if (const auto* p = std::get_if<BsmParams>(&model.dynamics)) {
    const double z = normal(rng);
    const double inc = (drift - 0.5 * p->sigma * p->sigma) * dt + p->sigma * std::sqrt(dt) * z;
    return {from.spot * std::exp(inc), 0.0};
  }
  if (const auto* p = std::get_if<MjdParams>(&model.dynamics)) {
    const double z = normal(rng);
    double inc = (drift - 0.5 * p->sigma * p->sigma - p->lambda * jump_compensator(*p)) * dt +
                 p->sigma * std::sqrt(dt) * z;
    if (p->lambda > 0.0) {
      std::poisson_distribution<int> arrivals(p->lambda * dt);
      const int k = arrivals(rng);
      for (int j = 0; j < k; ++j) inc += p->gamma + p->delta * normal(rng);
    }
    return {from.spot * std::exp(inc), 0.0};
  }
  const auto& h = std::get<HsvParams>(model.dynamics);
  const double zv = normal(rng);
  const double zp = normal(rng);
  const double zs = h.rho * zv + std::sqrt(1.0 - h.rho * h.rho) * zp;
  const double v = std::max(from.variance, 0.0);
  const double sq = std::sqrt(v * dt);
  const double spot = from.spot * std::exp((drift - 0.5 * v) * dt + sq * zs);
  const double var = from.variance + h.kappa * (h.theta - v) * dt + h.eta * sq * zv;
  return {spot, std::max(var, 0.0)};
}

PathSet simulate(const ModelSpec& model, const TimeGrid& grid, int paths, Measure measure,
                 std::uint64_t seed, int threads) {
  if (paths < 1) throw std::invalid_argument("simulate: at least one path required");
  model.validate();
  grid.validate();

  PathSet out;
  out.grid = grid;
  out.seed = seed;
  const int m = grid.steps;
  out.spot.resize(paths, m + 1);
  const bool two_factor = model.factor_count() == 2;
  const double v0 = two_factor ? std::get<HsvParams>(model.dynamics).v0 : 0.0;
  if (two_factor) out.variance.resize(paths, m + 1);

  const double dt = grid.dt();
  parallel_for(paths, threads, [&](std::int64_t i) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(i));
    State s{model.s0, v0};
    out.spot(i, 0) = s.spot;
    if (two_factor) out.variance(i, 0) = s.variance;
    for (int u = 1; u <= m; ++u) {
      s = advance(model, s, dt, measure, rng);
      out.spot(i, u) = s.spot;
      if (two_factor) out.variance(i, u) = s.variance;
    }
  });
  return out;
}

namespace {

constexpr std::array<char, 8> kMagic{'C', 'C', 'R', 'P', 'A', 'T', 'H', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("paths: truncated binary record");
  return v;
}

}  // namespace

void write_binary(const PathSet& paths, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put<std::int32_t>(out, paths.paths());
  put<std::int32_t>(out, paths.steps());
  put<std::int32_t>(out, paths.dims());
  put<std::uint64_t>(out, paths.seed);
  put<double>(out, paths.grid.horizon);
  for (int i = 0; i < paths.paths(); ++i) {
    for (int u = 0; u <= paths.steps(); ++u) {
      put<double>(out, paths.spot(i, u));
      if (paths.dims() == 2) put<double>(out, paths.variance(i, u));
    }
  }
}

PathSet read_paths_binary(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("paths: bad magic");
  const auto n = take<std::int32_t>(in);
  const auto m = take<std::int32_t>(in);
  const auto d = take<std::int32_t>(in);
  if (n < 1 || m < 1 || (d != 1 && d != 2)) throw std::runtime_error("paths: bad header");
  PathSet out;
  out.seed = take<std::uint64_t>(in);
  out.grid = TimeGrid{take<double>(in), m};
  out.spot.resize(n, m + 1);
  if (d == 2) out.variance.resize(n, m + 1);
  for (int i = 0; i < n; ++i) {
    for (int u = 0; u <= m; ++u) {
      out.spot(i, u) = take<double>(in);
      if (d == 2) out.variance(i, u) = take<double>(in);
    }
  }
  return out;
}

void write_csv(const PathSet& paths, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "n,m,d,seed,horizon\n"
      << paths.paths() << ',' << paths.steps() << ',' << paths.dims() << ',' << paths.seed << ','
      << paths.grid.horizon << '\n';
  for (int i = 0; i < paths.paths(); ++i) {
    for (int u = 0; u <= paths.steps(); ++u) {
      if (u > 0) out << ',';
      out << paths.spot(i, u);
      if (paths.dims() == 2) out << ',' << paths.variance(i, u);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace ccr
