#pragma once

#include <Eigen/Dense>

namespace mest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Flushes subnormal results and operands to zero on this thread while alive.
/// No-op off x86.
class FlushDenormals {
 public:
  FlushDenormals() noexcept;
  ~FlushDenormals();
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending
/// (lambda_1 >= ... >= lambda_p) with matching orthonormal eigenvector columns.
struct Spectrum {
  Vector eigenvalues;
  Matrix eigenvectors;

  double largest() const { return eigenvalues[0]; }
  double smallest() const { return eigenvalues[eigenvalues.size() - 1]; }
};

/// True when every |a_ij - a_ji| <= tol * max(1, |a_ij|).
bool is_symmetric(const Matrix& a, double tol = 1e-12);
bool all_finite(const Matrix& a);

/// Throws InvalidMatrix unless `a` is square, finite and symmetric.
void require_symmetric(const Matrix& a, const char* what = "matrix");

/// (A + A^T) / 2.
Matrix symmetrize(const Matrix& a);

Spectrum sym_eig(const Matrix& a);

/// Eigenvalues only, descending. Cheaper than sym_eig for large matrices.
Vector sym_eigenvalues(const Matrix& a);

/// Unique symmetric PSD square root. Eigenvalues in [-1e-10 lambda_1, 0) are
/// clamped to zero; anything more negative raises NotPSD.
Matrix sym_sqrt(const Matrix& a);

/// (A^{1/2})^{-1}. Requires lambda_p > 1e-12 lambda_1, otherwise NotInvertible.
Matrix sym_inv_sqrt(const Matrix& a);

/// Inverse of a symmetric positive definite matrix, same threshold as sym_inv_sqrt.
Matrix sym_inverse(const Matrix& a);

/// Off-diagonal entries set to zero. Accepts any square matrix.
Matrix diag_part(const Matrix& a);

/// Largest singular value rho_1(A) of an arbitrary matrix.
double spectral_norm(const Matrix& a);

}  // namespace mest
