#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

// Chebyshev interpolation on the Lobatto grid x_k = cos(pi k / n), k = 0..n.
// Coefficients are indexed by polynomial degree; a 2D coefficient matrix C
// holds c_{ij} for T_i(x) T_j(y).
namespace ccr::cheb {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Node k of the degree-n grid. The sine form keeps the grid exactly
/// symmetric and makes node k of degree n bitwise equal to node 2k of 2n.
template <typename Scalar = double>
Scalar node(int n, int k) {
  if (n == 0) return Scalar(1);
  return std::sin(Scalar(std::numbers::pi) * Scalar(n - 2 * k) / Scalar(2 * n));
}

template <typename Scalar = double>
Vector<Scalar> nodes(int n) {
  if (n < 0) throw std::invalid_argument("chebyshev: negative degree");
  Vector<Scalar> x(n + 1);
  for (int k = 0; k <= n; ++k) x(k) = node<Scalar>(n, k);
  return x;
}

template <typename Scalar>
Scalar to_unit(Scalar s, Scalar a, Scalar b) {
  return (Scalar(2) * s - a - b) / (b - a);
}

template <typename Scalar>
Scalar from_unit(Scalar x, Scalar a, Scalar b) {
  return Scalar(0.5) * (a + b) + Scalar(0.5) * (b - a) * x;
}

/// (n+1)x(n+1) matrix A with c = A f for values f at the degree-n nodes.
template <typename Scalar = double>
Matrix<Scalar> transform_matrix(int n) {
  if (n < 1) throw std::invalid_argument("chebyshev: degree must be at least 1");
  // cos(pi j k / n) depends only on j k mod 2n.
  Vector<Scalar> table(2 * n);
  for (int q = 0; q < 2 * n; ++q) table(q) = std::cos(Scalar(std::numbers::pi) * Scalar(q) / Scalar(n));
  Matrix<Scalar> a(n + 1, n + 1);
  for (int j = 0; j <= n; ++j) {
    const Scalar row_weight = (j == 0 || j == n) ? Scalar(1) / Scalar(n) : Scalar(2) / Scalar(n);
    for (int k = 0; k <= n; ++k) {
      const Scalar col_weight = (k == 0 || k == n) ? Scalar(0.5) : Scalar(1);
      a(j, k) = row_weight * col_weight * table((static_cast<long>(j) * k) % (2 * n));
    }
  }
  return a;
}

template <typename Derived>
Vector<typename Derived::Scalar> fit(const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const int n = static_cast<int>(values.size()) - 1;
  if (n == 0) return Vector<Scalar>::Constant(1, values(0));
  return transform_matrix<Scalar>(n) * values;
}

/// C = A_x F A_y^T for F(k, l) = f(x_k, y_l).
template <typename Derived>
Matrix<typename Derived::Scalar> fit2d(const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const int nx = static_cast<int>(values.rows()) - 1;
  const int ny = static_cast<int>(values.cols()) - 1;
  return transform_matrix<Scalar>(nx) * values * transform_matrix<Scalar>(ny).transpose();
}

template <typename Derived>
typename Derived::Scalar clenshaw(const Eigen::MatrixBase<Derived>& c, typename Derived::Scalar x) {
  using Scalar = typename Derived::Scalar;
  Scalar b1(0), b2(0);
  const Scalar two_x = Scalar(2) * x;
  for (Eigen::Index j = c.size() - 1; j >= 1; --j) {
    const Scalar b0 = c(j) + two_x * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return c(0) + x * b1 - b2;
}

/// Evaluates sum_ij c_ij T_i(x) T_j(y): inner sums along y, then along x.
template <typename Derived>
typename Derived::Scalar clenshaw2d(const Eigen::MatrixBase<Derived>& c, typename Derived::Scalar x,
                                    typename Derived::Scalar y) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> row(c.rows());
  for (Eigen::Index i = 0; i < c.rows(); ++i) row(i) = clenshaw(c.row(i).transpose(), y);
  return clenshaw(row, x);
}

/// Coefficients of d/dx of the series on [-1, 1].
template <typename Derived>
Vector<typename Derived::Scalar> derivative(const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = c.size() - 1;
  if (n < 1) return Vector<Scalar>::Zero(1);
  Vector<Scalar> d = Vector<Scalar>::Zero(n + 2);
  for (Eigen::Index j = n; j >= 1; --j) d(j - 1) = d(j + 1) + Scalar(2 * j) * c(j);
  d(0) *= Scalar(0.5);
  d.conservativeResize(n);
  return d;
}

/// Derivative of the 2D series in its first argument.
template <typename Derived>
Matrix<typename Derived::Scalar> derivative2d_x(const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> d(std::max<Eigen::Index>(c.rows() - 1, 1), c.cols());
  for (Eigen::Index j = 0; j < c.cols(); ++j) d.col(j) = derivative(c.col(j));
  return d;
}

}  // namespace ccr::cheb
