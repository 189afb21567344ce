#include <doctest.h>

#include <cmath>

#include "mest/error.hpp"
#include "mest/linalg.hpp"
#include "oracles.hpp"

using namespace mest;

namespace {
Matrix mat2(double a, double b, double c, double d) { return (Matrix(2, 2) << a, b, c, d).finished(); }
}  // namespace

TEST_CASE("sym_eig closed-form cases") {
  CHECK(sym_eig(Matrix::Identity(3, 3)).eigenvalues.isApprox(Vector::Ones(3)));

  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4.0, 9.0;
  const Spectrum s = sym_eig(d);
  CHECK(s.eigenvalues[0] == doctest::Approx(9.0));
  CHECK(s.eigenvalues[1] == doctest::Approx(4.0));

  const Spectrum t = sym_eig(mat2(2, 1, 1, 2));
  CHECK(t.eigenvalues[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(t.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sym_eig rejects bad input") {
  Matrix a = Matrix::Identity(2, 2);
  a(0, 1) = std::nan("");
  CHECK_THROWS_AS(sym_eig(a), InvalidMatrix);
  CHECK_THROWS_AS(sym_eig(mat2(1, 2, 0, 1)), InvalidMatrix);
  CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), InvalidMatrix);
}

TEST_CASE("spectrum invariants on random symmetric matrices") {
  for (int n : {1, 2, 5, 20, 60}) {
    std::mt19937_64 gen(1000 + n);
    Matrix g = oracle::random_matrix(n, n, gen);
    const Matrix a = 0.5 * (g + g.transpose());
    const Spectrum s = sym_eig(a);
    const double scale = std::max(1.0, a.norm());
    CHECK((s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose() - a).norm() <= 1e-10 * scale);
    CHECK((s.eigenvectors.transpose() * s.eigenvectors - Matrix::Identity(n, n)).norm() <= 1e-10);
    for (int i = 1; i < n; ++i) CHECK(s.eigenvalues[i] <= s.eigenvalues[i - 1]);
  }
}

TEST_CASE("sym_sqrt") {
  CHECK(sym_sqrt(Matrix::Identity(2, 2)).isApprox(Matrix::Identity(2, 2)));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4.0, 9.0;
  const Matrix sd = sym_sqrt(d);
  CHECK(sd(0, 0) == doctest::Approx(2.0));
  CHECK(sd(1, 1) == doctest::Approx(3.0));
  CHECK(std::fabs(sd(0, 1)) < 1e-15);

  // Reconstruct through an independent eigendecomposition.
  const Matrix a = mat2(2, 1, 1, 2);
  const Matrix s = sym_sqrt(a);
  CHECK((s * s - a).norm() <= 1e-10 * a.norm());
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  CHECK(es.eigenvalues()[0] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(es.eigenvalues()[1] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-13));
}

TEST_CASE("sym_sqrt clamps tiny negative eigenvalues and rejects larger ones") {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << 1.0, -1e-12;
  const Matrix s = sym_sqrt(a);
  CHECK(s(1, 1) == 0.0);
  a(1, 1) = -1e-6;
  CHECK_THROWS_AS(sym_sqrt(a), NotPSD);
  CHECK(sym_sqrt(Matrix::Zero(3, 3)).isZero());
}

TEST_CASE("sym_sqrt reconstruction on random SPD matrices up to dim 200") {
  for (int n : {3, 17, 64, 200}) {
    const Matrix a = oracle::random_spd(n, 77 + n);
    const Matrix s = sym_sqrt(a);
    CHECK((s * s - a).norm() <= 1e-10 * a.norm());
    CHECK(is_symmetric(s));
  }
}

TEST_CASE("sym_inv_sqrt") {
  CHECK(sym_inv_sqrt(Matrix::Identity(2, 2)).isApprox(Matrix::Identity(2, 2)));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4.0, 9.0;
  const Matrix t = sym_inv_sqrt(d);
  CHECK(t(0, 0) == doctest::Approx(0.5));
  CHECK(t(1, 1) == doctest::Approx(1.0 / 3.0));

  const Matrix a = oracle::random_spd(4, 4242);
  const Matrix ta = sym_inv_sqrt(a);
  CHECK((ta * a * ta - Matrix::Identity(4, 4)).norm() <= 1e-9);

  for (int n : {5, 40, 120}) {
    const Matrix b = oracle::random_spd(n, 900 + n);
    const Matrix inv_of_sqrt = sym_sqrt(b).inverse();
    CHECK((sym_inv_sqrt(b) - inv_of_sqrt).norm() <= 1e-9 * inv_of_sqrt.norm());
  }
}

TEST_CASE("sym_inv_sqrt reports near-singular input") {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << 1.0, 1e-14;
  try {
    sym_inv_sqrt(a);
    FAIL("expected NotInvertible");
  } catch (const NotInvertible& e) {
    CHECK(e.lambda_min() == doctest::Approx(1e-14));
  }
}

TEST_CASE("diag_part") {
  CHECK(diag_part(mat2(2, 1, 1, 2)) == mat2(2, 0, 0, 2));
  CHECK(diag_part(mat2(5, 0, 0, 7)) == mat2(5, 0, 0, 7));
  CHECK(diag_part(Matrix::Zero(3, 3)).isZero());

  std::mt19937_64 gen(5);
  const Matrix m = oracle::random_matrix(6, 6, gen);
  CHECK(diag_part(diag_part(m)) == diag_part(m));
  CHECK(diag_part(m.transpose()) == diag_part(m).transpose());
  CHECK_THROWS_AS(diag_part(Matrix(2, 3)), InvalidMatrix);
}

TEST_CASE("spectral_norm matches the largest singular value") {
  CHECK(spectral_norm(mat2(3, 0, 0, -4)) == doctest::Approx(4.0));
  CHECK(spectral_norm(mat2(0, 2, 0, 0)) == doctest::Approx(2.0));
}
