#pragma once
// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the code path it is used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Central differences with step h_k = rel * max(1, |x_k|).
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double rel) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel * std::max(1.0, std::fabs(x[k]));
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// (1/n) sum_i (y_i - E[y_i | y_{-i}])^2 with each conditional mean from an
/// explicit (n-1)x(n-1) solve.
inline double loo_direct(const Matrix& r, const Vector& y) {
  const Eigen::Index n = r.rows();
  if (n == 1) return y[0] * y[0];
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix sub(n - 1, n - 1);
    Vector cross(n - 1), rest(n - 1);
    for (Eigen::Index a = 0, ia = 0; a < n; ++a) {
      if (a == i) continue;
      cross[ia] = r(i, a);
      rest[ia] = y[a];
      for (Eigen::Index b = 0, ib = 0; b < n; ++b) {
        if (b == i) continue;
        sub(ia, ib) = r(a, b);
        ++ib;
      }
      ++ia;
    }
    const double pred = cross.dot(sub.partialPivLu().solve(rest));
    total += (y[i] - pred) * (y[i] - pred);
  }
  return total / static_cast<double>(n);
}

inline Matrix random_spd(Eigen::Index n, std::uint64_t seed, double ridge = 0.5) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = nd(gen);
  Matrix a = g * g.transpose() / static_cast<double>(n) + ridge * Matrix::Identity(n, n);
  return 0.5 * (a + a.transpose());
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(gen);
  return m;
}

/// Sample covariance of the rows of `x`.
inline Matrix sample_covariance(const Matrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

inline double rel_frobenius(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

/// Composite Simpson rule on [a, b] with m (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int m) {
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int i = 1; i < m; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace oracle
