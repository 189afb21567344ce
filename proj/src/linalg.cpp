#include "mest/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mest/error.hpp"

#if defined(__SSE2__)
#include <immintrin.h>
#define MEST_HAVE_MXCSR 1
#endif

namespace mest {

#ifdef MEST_HAVE_MXCSR
FlushDenormals::FlushDenormals() noexcept : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
FlushDenormals::~FlushDenormals() { _mm_setcsr(saved_); }
#else
FlushDenormals::FlushDenormals() noexcept {}
FlushDenormals::~FlushDenormals() {}
#endif

namespace {

constexpr double kPsdClamp = 1e-10;
constexpr double kInvertibleRatio = 1e-12;

// Eigen returns ascending order; flip to the descending convention.
Spectrum descending(const Eigen::SelfAdjointEigenSolver<Matrix>& es) {
  Spectrum s;
  s.eigenvalues = es.eigenvalues().reverse();
  s.eigenvectors = es.eigenvectors().rowwise().reverse();
  return s;
}

Matrix compose(const Spectrum& s, const Vector& f) {
  Matrix m = s.eigenvectors * f.asDiagonal() * s.eigenvectors.transpose();
  return symmetrize(m);
}

void require_invertible(const Spectrum& s, const char* what) {
  const double lmax = s.largest();
  const double lmin = s.smallest();
  if (!(lmin > 0.0) || !(lmin > kInvertibleRatio * lmax)) {
    throw NotInvertible(std::string(what) + ": smallest eigenvalue " + std::to_string(lmin) +
                            " too small relative to largest " + std::to_string(lmax),
                        lmin);
  }
}

}  // namespace

bool all_finite(const Matrix& a) { return a.allFinite(); }

bool is_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < a.rows(); ++i) {
      const double scale = std::max(1.0, std::fabs(a(i, j)));
      if (std::fabs(a(i, j) - a(j, i)) > tol * scale) return false;
    }
  }
  return true;
}

void require_symmetric(const Matrix& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw InvalidMatrix(std::string(what) + ": expected a non-empty square matrix");
  }
  if (!a.allFinite()) throw InvalidMatrix(std::string(what) + ": non-finite entry");
  if (!is_symmetric(a)) throw InvalidMatrix(std::string(what) + ": not symmetric");
}

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Spectrum sym_eig(const Matrix& a) {
  require_symmetric(a, "sym_eig");
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw InvalidMatrix("sym_eig: eigensolver did not converge");
  return descending(es);
}

Vector sym_eigenvalues(const Matrix& a) {
  require_symmetric(a, "sym_eigenvalues");
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw InvalidMatrix("sym_eigenvalues: eigensolver did not converge");
  return es.eigenvalues().reverse();
}

Matrix sym_sqrt(const Matrix& a) {
  const Spectrum s = sym_eig(a);
  const double lmax = s.largest();
  const double lmin = s.smallest();
  if (lmin < -kPsdClamp * std::fabs(lmax) || (lmax < 0.0)) {
    throw NotPSD("sym_sqrt: eigenvalue " + std::to_string(lmin) + " is below the clamping threshold", lmin);
  }
  Vector f = s.eigenvalues.unaryExpr([](double l) { return std::sqrt(std::max(l, 0.0)); });
  return compose(s, f);
}

Matrix sym_inv_sqrt(const Matrix& a) {
  const Spectrum s = sym_eig(a);
  require_invertible(s, "sym_inv_sqrt");
  Vector f = s.eigenvalues.unaryExpr([](double l) { return 1.0 / std::sqrt(l); });
  return compose(s, f);
}

Matrix sym_inverse(const Matrix& a) {
  const Spectrum s = sym_eig(a);
  require_invertible(s, "sym_inverse");
  Vector f = s.eigenvalues.cwiseInverse();
  return compose(s, f);
}

Matrix diag_part(const Matrix& a) {
  if (a.rows() != a.cols()) throw InvalidMatrix("diag_part: expected a square matrix");
  Matrix d = Matrix::Zero(a.rows(), a.cols());
  d.diagonal() = a.diagonal();
  return d;
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues()[0];
}

}  // namespace mest
