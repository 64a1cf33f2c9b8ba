#include "ccr/exposure.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ccr/parallel.hpp"

namespace ccr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double z975() {
  static const double q = boost::math::quantile(boost::math::normal(), 0.975);
  return q;
}

}  // namespace

BoundaryProfile exercise_boundaries(const Pricer& pricer, const TimeGrid& grid, double tol, int threads) {
  BoundaryProfile out(static_cast<std::size_t>(grid.steps));
  parallel_for(grid.steps, threads, [&](std::int64_t idx) {
    const int u = static_cast<int>(idx) + 1;
    const double t = grid.time(u);
    out[idx] = t >= pricer.option().maturity ? std::optional<double>(pricer.option().strike)
                                             : exercise_boundary(pricer, t, tol);
  });
  return out;
}

void apply_masking(ExposureCube& cube, const PathSet& paths, const OptionSpec& option,
                   const BoundaryProfile* boundaries) {
  const int m = cube.steps();
  if (option.kind == OptionKind::up_and_out_call) {
    cube.mask = MaskKind::barrier;
    for (int i = 0; i < cube.paths(); ++i) {
      bool out = false;
      for (int u = 1; u <= m; ++u) {
        out = out || paths.spot(i, u) >= option.barrier;
        if (out) cube.values(i, u - 1) = 0.0;
      }
    }
    return;
  }
  if (!option.is_american()) return;
  if (!boundaries) throw std::invalid_argument("masking: american options need exercise boundaries");
  if (static_cast<int>(boundaries->size()) != m)
    throw std::invalid_argument("masking: boundary profile does not match the grid");
  cube.mask = MaskKind::american;
  const bool put = option.kind == OptionKind::american_put;
  for (int i = 0; i < cube.paths(); ++i) {
    bool exercised = false;
    for (int u = 1; u <= m; ++u) {
      if (exercised) {
        cube.values(i, u - 1) = 0.0;
        continue;
      }
      const auto& b = (*boundaries)[u - 1];
      if (b) {
        const double s = paths.spot(i, u);
        exercised = put ? s < *b : s > *b;
      }
    }
  }
}

ExposureCube full_reeval(const PathSet& paths, const Pricer& pricer, int threads,
                         const BoundaryProfile* boundaries) {
  if (pricer.model().factor_count() != paths.dims())
    throw std::invalid_argument("full_reeval: pricer model does not match the paths");
  const int n = paths.paths();
  const int m = paths.steps();
  ExposureCube cube;
  cube.values.setZero(n, m);  // touched before the clock starts
  const auto start = Clock::now();
  // Time-major sweep: columns of the path and exposure matrices are contiguous.
  parallel_for(m, threads, [&](std::int64_t k) {
    const int u = static_cast<int>(k) + 1;
    const double t = paths.grid.time(u);
    for (int i = 0; i < n; ++i) {
      try {
        cube.values(i, u - 1) = std::max(pricer.value(t, paths.state(i, u)), 0.0);
      } catch (const std::exception& e) {
        std::ostringstream os;
        os << "full_reeval: pricer failed at path " << i << ", u " << u << ": " << e.what();
        throw std::runtime_error(os.str());
      }
    }
  });
  cube.seconds = seconds_since(start);
  if (pricer.option().kind == OptionKind::up_and_out_call || boundaries)
    apply_masking(cube, paths, pricer.option(), boundaries);
  return cube;
}

ExposureCube accelerated_reeval(const PathSet& paths, const std::vector<ChebyshevApproximant>& approximants,
                                const OptionSpec& option, int threads,
                                const BoundaryProfile* boundaries) {
  const int n = paths.paths();
  const int m = paths.steps();
  if (static_cast<int>(approximants.size()) < m - 1)
    throw std::invalid_argument("accelerated_reeval: one approximant per time t_1..t_{m-1} required");
  ExposureCube cube;
  cube.values.setZero(n, m);  // touched before the clock starts
  std::vector<std::string> offending;
  std::mutex offending_mutex;
  const auto start = Clock::now();
  parallel_for(m, threads, [&](std::int64_t k) {
    const int u = static_cast<int>(k) + 1;
    if (u == m) {
      for (int i = 0; i < n; ++i) cube.values(i, m - 1) = std::max(option.payoff(paths.spot(i, m)), 0.0);
      return;
    }
    const ChebyshevApproximant& approx = approximants[u - 1];
    const Eigen::VectorXd no_variance;
    try {
      auto column = cube.values.col(u - 1);
      if (paths.dims() == 2) {
        approx.values(paths.spot.col(u), paths.variance.col(u), column);
      } else {
        approx.values(paths.spot.col(u), no_variance, column);
      }
      column = column.cwiseMax(0.0);
      return;
    } catch (const OutOfDomain&) {
      // Fall through to the per-state sweep, which records the offending states.
    }
    for (int i = 0; i < n; ++i) {
      const State z = paths.state(i, u);
      try {
        cube.values(i, u - 1) = std::max(approx.value(z), 0.0);
      } catch (const OutOfDomain&) {
        std::lock_guard lock(offending_mutex);
        if (offending.size() < 10) {
          std::ostringstream os;
          os << "(path " << i << ", u " << u << ", s " << z.spot << ", v " << z.variance << ')';
          offending.push_back(os.str());
        }
        cube.values(i, u - 1) = 0.0;
      }
    }
  });
  cube.seconds = seconds_since(start);
  if (!offending.empty()) {
    std::string msg = "accelerated_reeval: states outside the approximation domain:";
    for (const auto& s : offending) msg += ' ' + s;
    throw OutOfDomain(msg);
  }
  if (option.kind == OptionKind::up_and_out_call || boundaries) apply_masking(cube, paths, option, boundaries);
  return cube;
}

// ---------------------------------------------------------------------------
// measures

std::string measure_name(const MeasureSpec& spec) {
  std::ostringstream os;
  if (std::holds_alternative<ExpectedExposure>(spec)) {
    os << "EE";
  } else if (const auto* p = std::get_if<PotentialFutureExposure>(&spec)) {
    os << "PFE_" << p->alpha;
  } else if (const auto* c = std::get_if<ConditionalExpectedShortfall>(&spec)) {
    os << "CES_" << c->alpha;
  } else {
    os << "SEM_" << std::get<SpectralMeasure>(spec).density.size();
  }
  return os.str();
}

void validate(const MeasureSpec& spec) {
  auto check_alpha = [](double a) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("measure: alpha must lie in (0, 1)");
  };
  if (const auto* p = std::get_if<PotentialFutureExposure>(&spec)) check_alpha(p->alpha);
  if (const auto* c = std::get_if<ConditionalExpectedShortfall>(&spec)) check_alpha(c->alpha);
  if (const auto* s = std::get_if<SpectralMeasure>(&spec)) {
    if (s->density.empty()) throw std::invalid_argument("measure: empty spectral density");
    double mass = 0.0;
    for (std::size_t j = 0; j < s->density.size(); ++j) {
      if (s->density[j] < 0.0) throw std::invalid_argument("measure: negative spectral density");
      if (j > 0 && s->density[j] < s->density[j - 1])
        throw std::invalid_argument("measure: spectral density must be nondecreasing");
      mass += s->density[j] / static_cast<double>(s->density.size());
    }
    if (std::abs(mass - 1.0) > 1e-10) throw std::invalid_argument("measure: spectral density must integrate to 1");
  }
}

namespace {

// Index (0-based) of the order statistic x^(floor(n alpha) + 1).
int quantile_index(int n, double alpha) {
  const int k = static_cast<int>(std::floor(n * alpha + 1e-9));
  if (k + 1 > n) throw std::invalid_argument("measure: alpha too close to 1 for the sample size");
  return k;
}

double sample_variance(const Eigen::VectorXd& x) {
  const double mean = x.mean();
  return (x.array() - mean).square().sum() / static_cast<double>(x.size() - 1);
}

// Gaussian kernel density at `at` with Silverman's bandwidth.
std::optional<double> kde(const Eigen::VectorXd& sorted, double at) {
  const int n = static_cast<int>(sorted.size());
  const double sd = std::sqrt(sample_variance(sorted));
  const double iqr = sorted(static_cast<int>(0.75 * (n - 1))) - sorted(static_cast<int>(0.25 * (n - 1)));
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) return std::nullopt;
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += normal_pdf((at - sorted(i)) / h);
  const double f = sum / (n * h);
  if (!(f > 0.0)) return std::nullopt;
  return f;
}

}  // namespace

Eigen::VectorXd measure_weights(int n, const MeasureSpec& spec) {
  validate(spec);
  if (n < 1) throw std::invalid_argument("measure: empty sample");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  if (std::holds_alternative<ExpectedExposure>(spec)) {
    w.setConstant(1.0 / n);
  } else if (const auto* p = std::get_if<PotentialFutureExposure>(&spec)) {
    w(quantile_index(n, p->alpha)) = 1.0;
  } else if (const auto* c = std::get_if<ConditionalExpectedShortfall>(&spec)) {
    const int k = quantile_index(n, c->alpha);
    w(k) = (k + 1 - n * c->alpha) / (n * (1.0 - c->alpha));
    for (int i = k + 1; i < n; ++i) w(i) = 1.0 / (n * (1.0 - c->alpha));
  } else {
    const auto& d = std::get<SpectralMeasure>(spec).density;
    const int bins = static_cast<int>(d.size());
    // Integrate the step density over [i/n, (i+1)/n).
    for (int i = 0; i < n; ++i) {
      const double lo = static_cast<double>(i) / n;
      const double hi = static_cast<double>(i + 1) / n;
      const int b0 = std::min(bins - 1, static_cast<int>(std::floor(lo * bins)));
      const int b1 = std::min(bins - 1, static_cast<int>(std::floor(hi * bins)));
      double mass = 0.0;
      for (int b = b0; b <= b1; ++b) {
        const double a = std::max(lo, static_cast<double>(b) / bins);
        const double e = std::min(hi, static_cast<double>(b + 1) / bins);
        if (e > a) mass += d[b] * (e - a);
      }
      w(i) = mass;
    }
  }
  return w;
}

double measure_generic(const Eigen::Ref<const Eigen::VectorXd>& sample,
                       const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (sample.size() != weights.size()) throw std::invalid_argument("measure: weight count mismatch");
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("measure: negative weights");
  if (std::abs(weights.sum() - 1.0) > 1e-10) throw std::invalid_argument("measure: weights must sum to 1");
  Eigen::VectorXd sorted = sample;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  return sorted.dot(weights);
}

MeasureResult measure(const Eigen::Ref<const Eigen::VectorXd>& sample, const MeasureSpec& spec) {
  validate(spec);
  const int n = static_cast<int>(sample.size());
  if (n < 2) throw std::invalid_argument("measure: at least two samples required");
  MeasureResult r;
  if (std::holds_alternative<ExpectedExposure>(spec)) {
    r.estimate = sample.mean();
    r.sigma = std::sqrt(sample_variance(sample));
  } else if (const auto* p = std::get_if<PotentialFutureExposure>(&spec)) {
    Eigen::VectorXd sorted = sample;
    std::sort(sorted.data(), sorted.data() + n);
    r.estimate = sorted(quantile_index(n, p->alpha));
    if (const auto f = kde(sorted, r.estimate)) {
      r.sigma = std::sqrt(p->alpha * (1.0 - p->alpha)) / *f;
    } else {
      r.detail = "density at the quantile unavailable (degenerate sample)";
    }
  } else if (const auto* c = std::get_if<ConditionalExpectedShortfall>(&spec)) {
    Eigen::VectorXd sorted = sample;
    std::sort(sorted.data(), sorted.data() + n);
    const int k = quantile_index(n, c->alpha);
    const double q = sorted(k);
    double tail = 0.0;
    for (int i = k + 1; i < n; ++i) tail += sorted(i);
    r.estimate = (q * (k + 1 - n * c->alpha) + tail) / (n * (1.0 - c->alpha));
    const Eigen::VectorXd excess = (sorted.array() - q).max(0.0).matrix();
    r.sigma = std::sqrt(sample_variance(excess)) / (1.0 - c->alpha);
  } else {
    r.estimate = measure_generic(sample, measure_weights(n, spec));
    r.detail = "no asymptotic variance for spectral measures";
  }
  if (r.sigma) r.ci_halfwidth = z975() * *r.sigma / std::sqrt(static_cast<double>(n));
  return r;
}

bool ComparisonReport::all_pass() const {
  return std::all_of(profiles.begin(), profiles.end(), [](const MeasureProfile& p) { return p.pass; });
}

ComparisonReport profile_and_compare(const ExposureCube& x, const ExposureCube& y,
                                     const std::vector<MeasureSpec>& specs) {
  if (x.values.rows() != y.values.rows() || x.values.cols() != y.values.cols())
    throw std::invalid_argument("profile_and_compare: cube shapes differ");
  ComparisonReport report;
  const int m = x.steps();
  for (const auto& spec : specs) {
    MeasureProfile prof;
    prof.name = measure_name(spec);
    prof.eps_accel = -1.0;
    for (int u = 1; u <= m; ++u) {
      const MeasureResult rx = measure(x.values.col(u - 1), spec);
      const MeasureResult ry = measure(y.values.col(u - 1), spec);
      prof.full.push_back(rx.estimate);
      prof.accel.push_back(ry.estimate);
      prof.ci_halfwidth.push_back(rx.ci_halfwidth);
      if (rx.estimate == 0.0) {
        prof.excluded.push_back(u);
        continue;
      }
      const double rel = std::abs(rx.estimate - ry.estimate) / std::abs(rx.estimate);
      if (rel > prof.eps_accel) {
        prof.eps_accel = rel;
        prof.u_star = u;
      }
    }
    if (!prof.excluded.empty()) {
      report.warnings.push_back(prof.name + ": " + std::to_string(prof.excluded.size()) +
                                " time(s) with zero full estimate excluded from the relative error");
    }
    if (prof.u_star == 0) {
      prof.eps_accel = 0.0;
      prof.eps_mc = 0.0;
      prof.pass = true;
    } else {
      const auto& hw = prof.ci_halfwidth[prof.u_star - 1];
      if (hw) {
        prof.eps_mc = 2.0 * *hw / std::abs(prof.full[prof.u_star - 1]);
        prof.pass = prof.eps_accel <= prof.eps_mc;
      } else {
        // Without an interval only an exact match passes.
        prof.eps_mc = std::numeric_limits<double>::quiet_NaN();
        prof.pass = prof.eps_accel == 0.0;
        report.warnings.push_back(prof.name + ": confidence interval unavailable at u*");
      }
    }
    report.profiles.push_back(std::move(prof));
  }
  return report;
}

double speedup(double full_seconds, double accel_seconds, double mask_seconds) {
  if (!(full_seconds > 0.0) || !(accel_seconds > 0.0) || mask_seconds < 0.0)
    throw std::invalid_argument("speedup: timings must be positive");
  return (full_seconds + mask_seconds) / (accel_seconds + mask_seconds);
}

}  // namespace ccr
