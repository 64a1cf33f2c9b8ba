#include "ccr/approximant.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <random>

#include "ccr/chebyshev.hpp"
#include "ccr/parallel.hpp"

namespace ccr {

// ---------------------------------------------------------------------------
// evaluation

const ChebPiece* ChebyshevApproximant::locate(double s, double variance) const {
  for (const auto& p : pieces) {
    if (s <= p.hi) {
      if (p.two_factor()) {
        const double slack = 1e-12 * (1.0 + std::abs(p.var_hi));
        if (variance < p.var_lo - slack || variance > p.var_hi + slack)
          throw OutOfDomain("approximant: variance outside the fitted range");
      }
      return &p;
    }
  }
  return pieces.empty() ? nullptr : &pieces.back();
}

int ChebyshevApproximant::tail_side(double s, double variance) const {
  if (s < left_cut) return -1;
  if (s > right_cut) return 1;
  if ((left_stairs.empty() && right_stairs.empty()) || pieces.empty()) return 0;
  const double lo = pieces.front().var_lo;
  const double hi = pieces.front().var_hi;
  if (!(variance >= lo && variance <= hi) || !(hi > lo)) return 0;
  auto bin = [&](std::size_t bins) {
    const double w = (std::sqrt(variance) - std::sqrt(lo)) / (std::sqrt(hi) - std::sqrt(lo));
    return std::min(static_cast<std::size_t>(w * static_cast<double>(bins)), bins - 1);
  };
  if (!left_stairs.empty() && s < left_stairs[bin(left_stairs.size())]) return -1;
  if (!right_stairs.empty() && s > right_stairs[bin(right_stairs.size())]) return 1;
  return 0;
}

namespace {

double unit_clamped(double v, double a, double b) {
  return std::clamp(cheb::to_unit(v, a, b), -1.0, 1.0);
}

}  // namespace

double ChebyshevApproximant::value(const State& z) const {
  const double s = z.spot;
  const int side = tail_side(s, z.variance);
  if (side < 0) {
    if (!left_tail) throw OutOfDomain("approximant: spot below the fitted range");
    return (*left_tail)(s);
  }
  if (side > 0) {
    if (!right_tail) throw OutOfDomain("approximant: spot above the fitted range");
    return (*right_tail)(s);
  }
  const ChebPiece* p = locate(s, z.variance);
  if (!p) return left_tail ? (*left_tail)(s) : (*right_tail)(s);
  const double x = unit_clamped(s, p->lo, p->hi);
  const double v = p->two_factor() ? cheb::clenshaw2d(p->coeffs, x, unit_clamped(z.variance, p->var_lo, p->var_hi))
                                   : cheb::clenshaw(p->coeffs.col(0), x);
  return cap ? std::min(v, *cap) : v;
}

namespace {

// G independent Clenshaw sums kept in registers; the chains interleave so
// the recurrence latency is hidden. coeff[g][j] is c_j of sum g.
template <int G>
inline void clenshaw_group(const double* const* coeff, int terms, const double* x, double* out) {
  double b1[G], b2[G], two_x[G];
#pragma GCC unroll 8
  for (int g = 0; g < G; ++g) {
    b1[g] = 0.0;
    b2[g] = 0.0;
    two_x[g] = 2.0 * x[g];
  }
  for (int j = terms - 1; j >= 1; --j) {
#pragma GCC unroll 8
    for (int g = 0; g < G; ++g) {
      const double b0 = coeff[g][j] + two_x[g] * b1[g] - b2[g];
      b2[g] = b1[g];
      b1[g] = b0;
    }
  }
#pragma GCC unroll 8
  for (int g = 0; g < G; ++g) out[g] = coeff[g][0] + x[g] * b1[g] - b2[g];
}

// Two states per SSE register; each lane has its own coefficient series.
typedef double Pair __attribute__((vector_size(16)));

template <int V>
inline void clenshaw_pairs(const double* const* coeff, int terms, const double* x, double* out) {
  Pair b1[V], b2[V], xs[V], two_x[V];
#pragma GCC unroll 8
  for (int v = 0; v < V; ++v) {
    b1[v] = Pair{0.0, 0.0};
    b2[v] = Pair{0.0, 0.0};
    xs[v] = Pair{x[2 * v], x[2 * v + 1]};
    two_x[v] = xs[v] + xs[v];
  }
  for (int j = terms - 1; j >= 1; --j) {
#pragma GCC unroll 8
    for (int v = 0; v < V; ++v) {
      const Pair c{coeff[2 * v][j], coeff[2 * v + 1][j]};
      const Pair b0 = c + two_x[v] * b1[v] - b2[v];
      b2[v] = b1[v];
      b1[v] = b0;
    }
  }
#pragma GCC unroll 8
  for (int v = 0; v < V; ++v) {
    const Pair c{coeff[2 * v][0], coeff[2 * v + 1][0]};
    const Pair r = c + xs[v] * b1[v] - b2[v];
    out[2 * v] = r[0];
    out[2 * v + 1] = r[1];
  }
}

// out[i] = sum_j c[j] T_j(x[i]) for i < len, one shared series.
inline void clenshaw_shared(const double* c, int terms, const double* x, double* out, int len) {
  constexpr int V = 4;
  int i = 0;
  for (; i + 2 * V <= len; i += 2 * V) {
    Pair b1[V], b2[V], xs[V], two_x[V];
#pragma GCC unroll 8
    for (int v = 0; v < V; ++v) {
      b1[v] = Pair{0.0, 0.0};
      b2[v] = Pair{0.0, 0.0};
      xs[v] = Pair{x[i + 2 * v], x[i + 2 * v + 1]};
      two_x[v] = xs[v] + xs[v];
    }
    for (int j = terms - 1; j >= 1; --j) {
      const Pair cj{c[j], c[j]};
#pragma GCC unroll 8
      for (int v = 0; v < V; ++v) {
        const Pair b0 = cj + two_x[v] * b1[v] - b2[v];
        b2[v] = b1[v];
        b1[v] = b0;
      }
    }
    const Pair c0{c[0], c[0]};
#pragma GCC unroll 8
    for (int v = 0; v < V; ++v) {
      const Pair r = c0 + xs[v] * b1[v] - b2[v];
      out[i + 2 * v] = r[0];
      out[i + 2 * v + 1] = r[1];
    }
  }
  for (; i < len; ++i) {
    const double* one = c;
    clenshaw_group<1>(&one, terms, x + i, out + i);
  }
}

// out[i] = sum_j coeff_i[j] T_j(x[i]) for i < len.
inline void clenshaw_many(const double* const* coeff, int terms, const double* x, double* out, int len) {
  constexpr int V = 3;
  int i = 0;
  for (; i + 2 * V <= len; i += 2 * V) clenshaw_pairs<V>(coeff + i, terms, x + i, out + i);
  for (; i < len; ++i) clenshaw_group<1>(coeff + i, terms, x + i, out + i);
}

}  // namespace

void ChebyshevApproximant::values(const Eigen::Ref<const Eigen::VectorXd>& spots,
                                  const Eigen::Ref<const Eigen::VectorXd>& variances,
                                  Eigen::Ref<Eigen::VectorXd> out) const {
  const Eigen::Index n = spots.size();
  if (out.size() != n) throw std::invalid_argument("approximant: output size mismatch");
  const bool two = factors == 2;
  if (two && variances.size() != n) throw std::invalid_argument("approximant: variances required");
  if (pieces.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) out(i) = value({spots(i), two ? variances(i) : 0.0});
    return;
  }
  if (two) {
    values_two_factor(spots, variances, out);
    return;
  }

  // Spots arrive in random order, so the piece is found by counting breaks
  // below s (no data-dependent branch) and each block is bucketed by piece;
  // every bucket then runs one shared coefficient series. Buckets `count`
  // and `count + 1` collect the left and right tail states.
  const int count = static_cast<int>(pieces.size());
  const int buckets = count + 2;
  std::vector<double> centre(count + 1), inv_half(count + 1);
  for (int q = 0; q < count; ++q) {
    centre[q] = pieces[q].lo + pieces[q].hi;
    inv_half[q] = 1.0 / (pieces[q].hi - pieces[q].lo);
  }
  centre[count] = 0.0;
  inv_half[count] = 0.0;

  constexpr int block = 256;
  std::vector<int> members(static_cast<std::size_t>(buckets) * block);
  std::vector<double> xs(static_cast<std::size_t>(buckets) * block);
  std::vector<int> fill(buckets);
  std::array<double, block> res{};

  for (Eigen::Index start = 0; start < n; start += block) {
    const int len = static_cast<int>(std::min<Eigen::Index>(block, n - start));
    std::fill(fill.begin(), fill.end(), 0);
    for (int i = 0; i < len; ++i) {
      const double s = spots(start + i);
      int q = 0;
      for (int k = 0; k + 1 < count; ++k) q += s > pieces[k].hi;
      // Tail buckets override the piece index; both comparisons are branch-free.
      const int left = s < left_cut;
      const int right = s > right_cut;
      q = left ? count : (right ? count + 1 : q);
      const int geom = std::min(q, count);
      const std::size_t slot = static_cast<std::size_t>(q) * block + fill[q];
      members[slot] = i;
      xs[slot] = q < count ? std::clamp((2.0 * s - centre[geom]) * inv_half[geom], -1.0, 1.0) : s;
      ++fill[q];
    }
    for (int q = 0; q < count; ++q) {
      const int k = fill[q];
      if (k == 0) continue;
      const std::size_t base = static_cast<std::size_t>(q) * block;
      clenshaw_shared(pieces[q].coeffs.data(), static_cast<int>(pieces[q].coeffs.rows()), xs.data() + base,
                      res.data(), k);
      if (cap) {
        for (int i = 0; i < k; ++i) out(start + members[base + i]) = std::min(res[i], *cap);
      } else {
        for (int i = 0; i < k; ++i) out(start + members[base + i]) = res[i];
      }
    }
    for (int side = 0; side < 2; ++side) {
      const int q = count + side;
      const int k = fill[q];
      if (k == 0) continue;
      const auto& tail = side == 0 ? left_tail : right_tail;
      if (!tail) throw OutOfDomain(side == 0 ? "approximant: spot below the fitted range"
                                             : "approximant: spot above the fitted range");
      const std::size_t base = static_cast<std::size_t>(q) * block;
      for (int i = 0; i < k; ++i) out(start + members[base + i]) = (*tail)(xs[base + i]);
    }
  }
}

void ChebyshevApproximant::values_two_factor(const Eigen::Ref<const Eigen::VectorXd>& spots,
                                             const Eigen::Ref<const Eigen::VectorXd>& variances,
                                             Eigen::Ref<Eigen::VectorXd> out) const {
  // Pieces are zero-padded to a common shape so that every state runs the
  // same recurrence (trailing zero coefficients leave Clenshaw sums unchanged).
  // Layout: piece q, spot degree r, variance degree c at q * stride + r * cols + c.
  const Eigen::Index n = spots.size();
  const int count = static_cast<int>(pieces.size());
  int rows = 1, cols = 1;
  for (const auto& p : pieces) {
    rows = std::max(rows, static_cast<int>(p.coeffs.rows()));
    cols = std::max(cols, static_cast<int>(p.coeffs.cols()));
  }
  const std::size_t stride = static_cast<std::size_t>(rows) * cols;
  std::vector<double> packed(stride * count, 0.0);
  for (int q = 0; q < count; ++q)
    for (Eigen::Index r = 0; r < pieces[q].coeffs.rows(); ++r)
      for (Eigen::Index c = 0; c < pieces[q].coeffs.cols(); ++c)
        packed[q * stride + r * cols + c] = pieces[q].coeffs(r, c);

  std::vector<double> centre(count), inv_half(count), vcentre(count), vinv_half(count);
  for (int q = 0; q < count; ++q) {
    centre[q] = pieces[q].lo + pieces[q].hi;
    inv_half[q] = 1.0 / (pieces[q].hi - pieces[q].lo);
    vcentre[q] = pieces[q].var_lo + pieces[q].var_hi;
    vinv_half[q] = pieces[q].var_hi > pieces[q].var_lo ? 1.0 / (pieces[q].var_hi - pieces[q].var_lo) : 0.0;
  }

  constexpr int block = 256;
  std::array<int, block> idx{};
  std::array<double, block> x{}, y{}, res{};
  std::array<const double*, block> coeff{};
  std::vector<double> row_sums(static_cast<std::size_t>(rows) * block);

  for (Eigen::Index start = 0; start < n; start += block) {
    const int len = static_cast<int>(std::min<Eigen::Index>(block, n - start));
    for (int i = 0; i < len; ++i) {
      const double s = spots(start + i);
      int q = 0;
      for (int k = 0; k + 1 < count; ++k) q += s > pieces[k].hi;
      idx[i] = q;
      x[i] = std::clamp((2.0 * s - centre[q]) * inv_half[q], -1.0, 1.0);
      y[i] = std::clamp((2.0 * variances(start + i) - vcentre[q]) * vinv_half[q], -1.0, 1.0);
    }
    // Inner sums over the variance degree for every spot degree r, stored
    // point-major so the outer sum reads one contiguous series per point.
    for (int r = 0; r < rows; ++r) {
      for (int i = 0; i < len; ++i) coeff[i] = packed.data() + idx[i] * stride + static_cast<std::size_t>(r) * cols;
      clenshaw_many(coeff.data(), cols, y.data(), res.data(), len);
      for (int i = 0; i < len; ++i) row_sums[static_cast<std::size_t>(i) * rows + r] = res[i];
    }
    for (int i = 0; i < len; ++i) coeff[i] = row_sums.data() + static_cast<std::size_t>(i) * rows;
    clenshaw_many(coeff.data(), rows, x.data(), res.data(), len);

    for (int i = 0; i < len; ++i) {
      const double s = spots(start + i);
      double v = res[i];
      const int side = tail_side(s, variances(start + i));
      if (side < 0) {
        if (!left_tail) throw OutOfDomain("approximant: spot below the fitted range");
        v = (*left_tail)(s);
      } else if (side > 0) {
        if (!right_tail) throw OutOfDomain("approximant: spot above the fitted range");
        v = (*right_tail)(s);
      } else {
        locate(s, variances(start + i));  // variance range check
        if (cap) v = std::min(v, *cap);
      }
      out(start + i) = v;
    }
  }
}

double ChebyshevApproximant::delta(const State& z) const {
  const double s = z.spot;
  const int side = tail_side(s, z.variance);
  if (side < 0) {
    if (!left_tail) throw OutOfDomain("approximant: spot below the fitted range");
    return left_tail->slope;
  }
  if (side > 0) {
    if (!right_tail) throw OutOfDomain("approximant: spot above the fitted range");
    return right_tail->slope;
  }
  const ChebPiece* p = locate(s, z.variance);
  if (!p) return left_tail ? left_tail->slope : right_tail->slope;
  const double scale = 2.0 / (p->hi - p->lo);
  const double x = unit_clamped(s, p->lo, p->hi);
  if (!p->two_factor()) return scale * cheb::clenshaw(cheb::derivative(p->coeffs.col(0)), x);
  return scale * cheb::clenshaw2d(cheb::derivative2d_x(p->coeffs), x,
                                  unit_clamped(z.variance, p->var_lo, p->var_hi));
}

int ChebyshevApproximant::degree() const {
  int d = 0;
  for (const auto& p : pieces) d = std::max(d, p.degree());
  return d;
}

// ---------------------------------------------------------------------------
// domain construction

namespace {

struct Asymptotes {
  AffineTail left;
  AffineTail right;
  std::optional<double> hard_right;  // value is identically zero beyond this spot
};

Asymptotes asymptotes(const OptionSpec& o, double r, double tau) {
  const double df = std::exp(-r * tau);
  switch (o.kind) {
    case OptionKind::european_call:
    case OptionKind::american_call: return {{0.0, 0.0}, {-o.strike * df, 1.0}, std::nullopt};
    case OptionKind::digital_put: return {{df, 0.0}, {0.0, 0.0}, std::nullopt};
    case OptionKind::up_and_out_call: return {{0.0, 0.0}, {0.0, 0.0}, o.barrier};
    case OptionKind::american_put: return {{o.strike, -1.0}, {0.0, 0.0}, std::nullopt};
  }
  return {};
}

// Largest cut in [from, to] (scanning away from `from`) such that the
// deviation stays below tol between `from` and the cut. Returns `from` when
// the deviation already fails there.
template <typename Dev>
double search_cut(Dev&& deviation, double from, double to, double tol) {
  if (!(deviation(from) < tol)) return from;
  if (deviation(to) < tol) return to;
  double good = from;
  double bad = to;
  const double width = std::abs(to - from);
  for (int it = 0; it < 60 && std::abs(bad - good) > 1e-4 * width; ++it) {
    const double mid = 0.5 * (good + bad);
    if (deviation(mid) < tol) {
      good = mid;
    } else {
      bad = mid;
    }
  }
  return good;
}

}  // namespace

ChebDomain build_domain(const Pricer& pricer, double t, const Eigen::Ref<const Eigen::VectorXd>& spots,
                        const Eigen::Ref<const Eigen::VectorXd>& variances,
                        const DomainOptions& options) {
  if (spots.size() == 0) throw std::invalid_argument("build_domain: no states");
  const OptionSpec& option = pricer.option();
  if (!(t < option.maturity)) throw std::invalid_argument("build_domain: t must precede maturity");
  ChebDomain d;
  d.factors = pricer.model().factor_count();

  double lo = spots.minCoeff();
  double hi = spots.maxCoeff();
  if (hi - lo <= 1e-12 * (1.0 + std::abs(hi))) {
    const double c = 0.5 * (lo + hi);
    lo = 0.99 * c;
    hi = 1.01 * c;
  }
  if (d.factors == 2) {
    if (variances.size() != spots.size())
      throw std::invalid_argument("build_domain: two-factor model needs variances");
    d.var_lo = variances.minCoeff();
    d.var_hi = variances.maxCoeff();
    if (d.var_hi - d.var_lo <= 1e-12) {
      const double c = d.var_hi;
      d.var_lo = std::max(0.0, 0.99 * c - 1e-8);
      d.var_hi = 1.01 * c + 1e-8;
    }
  }

  const auto asym = asymptotes(option, pricer.model().r, option.maturity - t);
  if (option.kind == OptionKind::digital_put) d.cap = asym.left.intercept;
  bool hard_cut = false;
  if (asym.hard_right && hi >= *asym.hard_right) {
    hi = *asym.hard_right;
    d.right_tail = AffineTail{0.0, 0.0};
    hard_cut = true;
    if (lo >= hi) lo = hi * (1.0 - 1e-6);
  }
  const double k = option.strike;
  const bool strike_inside = options.split_at_strike && lo < k && k < hi;

  double left_cut = lo;
  double right_cut = hi;
  if (options.tails) {
    const double tol = options.tail_tolerance > 0.0
                           ? options.tail_tolerance
                           : 1e-8 * (option.kind == OptionKind::digital_put ? 1.0 : k);
    auto deviation = [&](const AffineTail& tail, double variance) {
      return [&, tail, variance](double s) { return std::abs(pricer.value(t, {s, variance}) - tail(s)); };
    };
    const double left_top = strike_inside ? k : hi;
    if (d.factors == 1) {
      left_cut = search_cut(deviation(asym.left, 0.0), lo, left_top, tol);
      if (left_cut > lo) d.left_tail = asym.left;
      if (!hard_cut) {
        const double right_bottom = strike_inside ? k : std::max(lo, left_cut);
        right_cut = search_cut(deviation(asym.right, 0.0), hi, right_bottom, tol);
        if (right_cut < hi) d.right_tail = asym.right;
      }
    } else {
      // Cuts at the edges of bins of equal width in volatility (square-root
      // variance); each bin keeps the more conservative of its two edge cuts.
      constexpr int bins = 16;
      std::array<double, bins + 1> edge_var{}, left_edge{}, right_edge{};
      for (int e = 0; e <= bins; ++e) {
        const double vol = std::sqrt(d.var_lo) + (std::sqrt(d.var_hi) - std::sqrt(d.var_lo)) * e / bins;
        edge_var[e] = e == bins ? d.var_hi : (e == 0 ? d.var_lo : vol * vol);
      }
      for (int e = 0; e <= bins; ++e) {
        const double v = edge_var[e];
        left_edge[e] = search_cut(deviation(asym.left, v), lo, left_top, tol);
        right_edge[e] = hi;
      }
      left_cut = *std::min_element(left_edge.begin(), left_edge.end());
      if (*std::max_element(left_edge.begin(), left_edge.end()) > lo) {
        d.left_tail = asym.left;
        for (int b = 0; b < bins; ++b) d.left_stairs.push_back(std::min(left_edge[b], left_edge[b + 1]));
      }
      if (!hard_cut) {
        const double right_bottom = strike_inside ? k : std::max(lo, left_cut);
        for (int e = 0; e <= bins; ++e) {
          const double v = edge_var[e];
          right_edge[e] = search_cut(deviation(asym.right, v), hi, right_bottom, tol);
        }
        right_cut = *std::max_element(right_edge.begin(), right_edge.end());
        if (*std::min_element(right_edge.begin(), right_edge.end()) < hi) {
          d.right_tail = asym.right;
          for (int b = 0; b < bins; ++b) d.right_stairs.push_back(std::max(right_edge[b], right_edge[b + 1]));
        }
      }
    }
    if (right_cut < left_cut) right_cut = left_cut;
  }

  d.breaks.push_back(left_cut);
  if (strike_inside && left_cut < k && k < right_cut) d.breaks.push_back(k);
  if (right_cut > left_cut) d.breaks.push_back(right_cut);
  return d;
}

// ---------------------------------------------------------------------------
// fitting

namespace {

ChebyshevApproximant skeleton(const ChebDomain& domain) {
  ChebyshevApproximant a;
  a.left_tail = domain.left_tail;
  a.right_tail = domain.right_tail;
  a.left_cut = domain.breaks.front();
  a.right_cut = domain.breaks.back();
  a.left_stairs = domain.left_stairs;
  a.right_stairs = domain.right_stairs;
  a.cap = domain.cap;
  a.factors = domain.factors;
  return a;
}

// Values on the degree-n node grid of one piece (variance nodes along columns).
Eigen::MatrixXd sample(const Pricer& pricer, double t, const ChebPiece& p, int n, int factors) {
  const Eigen::VectorXd x = cheb::nodes(n);
  Eigen::MatrixXd f(n + 1, factors == 2 ? n + 1 : 1);
  for (int i = 0; i <= n; ++i) {
    const double s = cheb::from_unit(x(i), p.lo, p.hi);
    if (factors == 1) {
      f(i, 0) = pricer.value(t, {s, 0.0});
    } else {
      for (int j = 0; j <= n; ++j)
        f(i, j) = pricer.value(t, {s, cheb::from_unit(x(j), p.var_lo, p.var_hi)});
    }
  }
  return f;
}

Eigen::MatrixXd coefficients(const Eigen::MatrixXd& values) {
  if (values.cols() == 1) return cheb::fit(values.col(0));
  return cheb::fit2d(values);
}

double evaluate(const Eigen::MatrixXd& c, double x, double y) {
  if (c.cols() == 1) return cheb::clenshaw(c.col(0), x);
  return cheb::clenshaw2d(c, x, y);
}

}  // namespace

ChebyshevApproximant fit_approximant(const Pricer& pricer, double t, const ChebDomain& domain,
                                     int degree, FitStats* stats) {
  if (degree < 1) throw std::invalid_argument("fit_approximant: degree must be at least 1");
  ChebyshevApproximant a = skeleton(domain);
  for (int q = 0; q < domain.piece_count(); ++q) {
    ChebPiece p;
    p.lo = domain.breaks[q];
    p.hi = domain.breaks[q + 1];
    p.var_lo = domain.var_lo;
    p.var_hi = domain.var_hi;
    p.coeffs = coefficients(sample(pricer, t, p, degree, domain.factors));
    if (stats) stats->pricer_calls += domain.factors == 2 ? (degree + 1L) * (degree + 1L) : degree + 1L;
    a.pieces.push_back(std::move(p));
  }
  return a;
}

DegreeCapExceeded::DegreeCapExceeded(int deg, double estimate)
    : std::runtime_error("adaptive fit: degree cap " + std::to_string(deg) +
                         " reached, last error estimate " + std::to_string(estimate)),
      degree(deg),
      last_estimate(estimate) {}

namespace {

// Refines values on the degree-n grid to the degree-2n grid: old nodes keep
// their values (even indices), only the new ones are priced.
template <typename Price>
Eigen::MatrixXd refine(const Eigen::MatrixXd& coarse, int n, int factors, Price&& price, long& calls) {
  const int m = 2 * n;
  const Eigen::VectorXd x = cheb::nodes(m);
  Eigen::MatrixXd f(m + 1, factors == 2 ? m + 1 : 1);
  for (int i = 0; i <= m; ++i) {
    if (factors == 1) {
      if (i % 2 == 0) {
        f(i, 0) = coarse(i / 2, 0);
      } else {
        f(i, 0) = price(x(i), 0.0);
        ++calls;
      }
      continue;
    }
    for (int j = 0; j <= m; ++j) {
      if (i % 2 == 0 && j % 2 == 0) {
        f(i, j) = coarse(i / 2, j / 2);
      } else {
        f(i, j) = price(x(i), x(j));
        ++calls;
      }
    }
  }
  return f;
}

double max_gap(const Eigen::MatrixXd& c1, const Eigen::MatrixXd& c2, const Eigen::MatrixXd& probes) {
  double worst = 0.0;
  for (Eigen::Index q = 0; q < probes.rows(); ++q)
    worst = std::max(worst, std::abs(evaluate(c1, probes(q, 0), probes(q, 1)) -
                                     evaluate(c2, probes(q, 0), probes(q, 1))));
  return worst;
}

Eigen::MatrixXd probe_points(int count, std::uint64_t seed, std::uint64_t stream) {
  Rng rng = substream(seed, stream, 0xC4EB);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Eigen::MatrixXd p(count, 2);
  for (int q = 0; q < count; ++q) {
    p(q, 0) = unit(rng);
    p(q, 1) = unit(rng);
  }
  return p;
}

}  // namespace

AdaptiveResult adaptive_fit(const Pricer& pricer, double t, const ChebDomain& domain,
                            const AdaptiveOptions& options) {
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("adaptive_fit: tolerance must be positive");
  AdaptiveResult out;
  out.approximant = skeleton(domain);
  const int factors = domain.factors;
  for (int q = 0; q < domain.piece_count(); ++q) {
    ChebPiece p;
    p.lo = domain.breaks[q];
    p.hi = domain.breaks[q + 1];
    p.var_lo = domain.var_lo;
    p.var_hi = domain.var_hi;
    auto price = [&](double x, double y) {
      return pricer.value(t, {cheb::from_unit(x, p.lo, p.hi), cheb::from_unit(y, p.var_lo, p.var_hi)});
    };
    const Eigen::MatrixXd probes = probe_points(options.probes, options.seed, static_cast<std::uint64_t>(q));

    int n = 1;
    Eigen::MatrixXd values = sample(pricer, t, p, n, factors);
    out.pricer_calls += values.size();
    Eigen::MatrixXd coarse = coefficients(values);
    for (;;) {
      if (2 * n > options.max_degree) {
        throw DegreeCapExceeded(options.max_degree,
                                out.estimates.size() > static_cast<std::size_t>(q) ? out.estimates[q] : NAN);
      }
      Eigen::MatrixXd finer_values = refine(values, n, factors, price, out.pricer_calls);
      Eigen::MatrixXd finer = coefficients(finer_values);
      const double estimate = max_gap(coarse, finer, probes);
      if (out.estimates.size() <= static_cast<std::size_t>(q)) out.estimates.push_back(estimate);
      out.estimates[q] = estimate;
      if (estimate < options.tolerance) {
        p.coeffs = options.return_finer ? finer : coarse;
        out.degrees.push_back(options.return_finer ? 2 * n : n);
        break;
      }
      n *= 2;
      values = std::move(finer_values);
      coarse = std::move(finer);
    }
    out.approximant.pieces.push_back(std::move(p));
  }
  return out;
}

double cheb_error_estimate(const std::function<double(double)>& f, double a, double b, int n,
                           int probes, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("cheb_error_estimate: degree must be at least 1");
  if (!(b > a)) throw std::invalid_argument("cheb_error_estimate: empty interval");
  auto values = [&](int k) {
    const Eigen::VectorXd x = cheb::nodes(k);
    Eigen::VectorXd v(k + 1);
    for (int i = 0; i <= k; ++i) v(i) = f(cheb::from_unit(x(i), a, b));
    return v;
  };
  const Eigen::VectorXd c1 = cheb::fit(values(n));
  const Eigen::VectorXd c2 = cheb::fit(values(2 * n));
  Rng rng = substream(seed, 0, 0xC4EB);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  for (int q = 0; q < probes; ++q) {
    const double x = unit(rng);
    worst = std::max(worst, std::abs(cheb::clenshaw(c1, x) - cheb::clenshaw(c2, x)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

constexpr std::array<char, 7> kMagic{'C', 'C', 'R', 'C', 'H', 'E', 'B'};
constexpr std::int32_t kVersion = 2;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("approximant: truncated binary record");
  return v;
}

void put_tail(std::ostream& out, const std::optional<AffineTail>& tail) {
  put<std::uint8_t>(out, tail ? 1 : 0);
  put<double>(out, tail ? tail->intercept : 0.0);
  put<double>(out, tail ? tail->slope : 0.0);
}

std::optional<AffineTail> take_tail(std::istream& in) {
  const auto present = take<std::uint8_t>(in);
  AffineTail t{take<double>(in), take<double>(in)};
  if (!present) return std::nullopt;
  return t;
}

}  // namespace

void write_binary(const ChebyshevApproximant& a, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put<std::int32_t>(out, kVersion);
  put<std::int32_t>(out, a.factors);
  put<double>(out, a.left_cut);
  put<double>(out, a.right_cut);
  put_tail(out, a.left_tail);
  put_tail(out, a.right_tail);
  for (const auto* stairs : {&a.left_stairs, &a.right_stairs}) {
    put<std::int32_t>(out, static_cast<std::int32_t>(stairs->size()));
    for (double c : *stairs) put<double>(out, c);
  }
  put_tail(out, a.cap ? std::optional<AffineTail>(AffineTail{*a.cap, 0.0}) : std::nullopt);
  put<std::int32_t>(out, static_cast<std::int32_t>(a.pieces.size()));
  for (const auto& p : a.pieces) {
    put<double>(out, p.lo);
    put<double>(out, p.hi);
    put<double>(out, p.var_lo);
    put<double>(out, p.var_hi);
    put<std::int32_t>(out, static_cast<std::int32_t>(p.coeffs.rows()));
    put<std::int32_t>(out, static_cast<std::int32_t>(p.coeffs.cols()));
    for (Eigen::Index i = 0; i < p.coeffs.rows(); ++i)
      for (Eigen::Index j = 0; j < p.coeffs.cols(); ++j) put<double>(out, p.coeffs(i, j));
  }
}

ChebyshevApproximant read_approximant_binary(std::istream& in) {
  std::array<char, 7> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("approximant: bad magic");
  if (take<std::int32_t>(in) != kVersion) throw std::runtime_error("approximant: unsupported version");
  ChebyshevApproximant a;
  a.factors = take<std::int32_t>(in);
  a.left_cut = take<double>(in);
  a.right_cut = take<double>(in);
  a.left_tail = take_tail(in);
  a.right_tail = take_tail(in);
  for (auto* stairs : {&a.left_stairs, &a.right_stairs}) {
    const auto bins = take<std::int32_t>(in);
    if (bins < 0 || bins > 1 << 16) throw std::runtime_error("approximant: bad stair count");
    for (int b = 0; b < bins; ++b) stairs->push_back(take<double>(in));
  }
  if (const auto cap = take_tail(in)) a.cap = cap->intercept;
  const auto count = take<std::int32_t>(in);
  if (count < 0 || count > 1 << 20) throw std::runtime_error("approximant: bad piece count");
  for (int q = 0; q < count; ++q) {
    ChebPiece p;
    p.lo = take<double>(in);
    p.hi = take<double>(in);
    p.var_lo = take<double>(in);
    p.var_hi = take<double>(in);
    const auto rows = take<std::int32_t>(in);
    const auto cols = take<std::int32_t>(in);
    if (rows < 1 || cols < 1 || rows > 1 << 16 || cols > 1 << 16)
      throw std::runtime_error("approximant: bad coefficient shape");
    p.coeffs.resize(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) p.coeffs(i, j) = take<double>(in);
    a.pieces.push_back(std::move(p));
  }
  return a;
}

std::string to_json(const ChebyshevApproximant& a) {
  using nlohmann::json;
  auto tail = [](const std::optional<AffineTail>& t) -> json {
    if (!t) return nullptr;
    return {{"intercept", t->intercept}, {"slope", t->slope}};
  };
  json pieces = json::array();
  for (const auto& p : a.pieces) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < p.coeffs.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < p.coeffs.cols(); ++j) row.push_back(p.coeffs(i, j));
      rows.push_back(row);
    }
    pieces.push_back({{"lo", p.lo}, {"hi", p.hi}, {"var_lo", p.var_lo}, {"var_hi", p.var_hi}, {"coeffs", rows}});
  }
  json j = {{"version", kVersion},        {"factors", a.factors},
            {"left_cut", a.left_cut},     {"right_cut", a.right_cut},
            {"left_tail", tail(a.left_tail)}, {"right_tail", tail(a.right_tail)},
            {"left_stairs", a.left_stairs},  {"right_stairs", a.right_stairs},
            {"cap", a.cap ? json(*a.cap) : json(nullptr)},
            {"pieces", pieces}};
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

ChebyshevApproximant approximant_from_json(const std::string& text) {
  using nlohmann::json;
  const json j = json::parse(text);
  if (j.at("version").get<int>() != kVersion) throw std::runtime_error("approximant: unsupported version");
  auto tail = [](const json& t) -> std::optional<AffineTail> {
    if (t.is_null()) return std::nullopt;
    return AffineTail{t.at("intercept").get<double>(), t.at("slope").get<double>()};
  };
  ChebyshevApproximant a;
  a.factors = j.at("factors").get<int>();
  a.left_cut = j.at("left_cut").get<double>();
  a.right_cut = j.at("right_cut").get<double>();
  a.left_tail = tail(j.at("left_tail"));
  a.right_tail = tail(j.at("right_tail"));
  a.left_stairs = j.at("left_stairs").get<std::vector<double>>();
  a.right_stairs = j.at("right_stairs").get<std::vector<double>>();
  if (!j.at("cap").is_null()) a.cap = j.at("cap").get<double>();
  for (const auto& jp : j.at("pieces")) {
    ChebPiece p;
    p.lo = jp.at("lo").get<double>();
    p.hi = jp.at("hi").get<double>();
    p.var_lo = jp.at("var_lo").get<double>();
    p.var_hi = jp.at("var_hi").get<double>();
    const auto& rows = jp.at("coeffs");
    const auto cols = rows.empty() ? 0 : rows.front().size();
    p.coeffs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) p.coeffs(i, c) = rows[i].at(c).get<double>();
    a.pieces.push_back(std::move(p));
  }
  return a;
}

}  // namespace ccr
