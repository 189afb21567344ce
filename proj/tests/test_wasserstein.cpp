#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "mest/error.hpp"
#include "mest/linalg.hpp"
#include "mest/random.hpp"
#include "mest/wasserstein.hpp"
#include "oracles.hpp"

using namespace mest;
using namespace mest::w1;

namespace {

Matrix gaussian_rows(Eigen::Index r, Eigen::Index p, std::uint64_t seed) {
  auto rng = CounterRng::keyed({seed, 0xABCD});
  Matrix m(r, p);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < p; ++k) m(i, k) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("quantile grid is antisymmetric and sorted") {
  for (Eigen::Index r : {2, 7, 1000}) {
    const Vector g = quantile_grid(r);
    for (Eigen::Index i = 0; i < r; ++i) CHECK(g[i] == -g[r - 1 - i]);
    for (Eigen::Index i = 1; i < r; ++i) CHECK(g[i] > g[i - 1]);
  }
}

TEST_CASE("1D estimator: grid sample has zero distance") {
  const Vector g = quantile_grid(500);
  CHECK(w1_to_quantile_grid(g) == 0.0);
  CHECK_THROWS_AS(w1_1d_vs_gaussian(Vector::Zero(1)), TooFewSamples);
}

TEST_CASE("1D estimator: mean shift and scale limits at R = 1e5") {
  const Matrix z = gaussian_rows(100000, 1, 5);
  const W1Estimate shifted = w1_1d_vs_gaussian(z.col(0).array() + 0.5);
  CHECK(shifted.value == doctest::Approx(0.5).epsilon(0.04));
  CHECK(std::fabs(shifted.value - 0.5) <= 0.02);
  const W1Estimate scaled = w1_1d_vs_gaussian(2.0 * z.col(0));
  CHECK(std::fabs(scaled.value - std::sqrt(2.0 / std::numbers::pi)) <= 0.02);
  CHECK(shifted.floor > 0.0);
  CHECK(shifted.floor < 0.01);
}

TEST_CASE("floor is memoized and scales like R^{-1/2}") {
  const double f1 = gaussian_floor(1000);
  CHECK(gaussian_floor(1000) == f1);
  const double f4 = gaussian_floor(4000);
  CHECK(f4 / f1 == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("exact pair: hand cases") {
  const EmpiricalSample a = EmpiricalSample::make((Matrix(2, 1) << 0, 2).finished());
  const EmpiricalSample b = EmpiricalSample::make((Matrix(2, 1) << 1, 3).finished());
  CHECK(w1_exact_pair(a, b).value == doctest::Approx(1.0));
  CHECK(w1_exact_pair(a, a).value == 0.0);

  const EmpiricalSample c = EmpiricalSample::make((Matrix(2, 2) << 0, 0, 1, 0).finished());
  const EmpiricalSample d = EmpiricalSample::make((Matrix(2, 2) << 0, 1, 1, 1).finished());
  CHECK(w1_exact_pair(c, d).value == doctest::Approx(1.0));
  CHECK(w1_exact_pair(c, c).value == 0.0);
}

TEST_CASE("exact pair: errors") {
  const EmpiricalSample a = EmpiricalSample::make(Matrix::Zero(3, 2));
  const EmpiricalSample b = EmpiricalSample::make(Matrix::Zero(4, 2));
  CHECK_THROWS_AS(w1_exact_pair(a, b), SizeMismatch);
  CHECK_THROWS_AS(EmpiricalSample::make(Matrix::Zero(1, 2)), TooFewSamples);
  const EmpiricalSample big = EmpiricalSample::make(Matrix::Zero(4097, 2));
  CHECK_THROWS_AS(w1_exact_pair(big, big), TooLarge);
  // The 1D sorted coupling has no size limit.
  const EmpiricalSample big1 = EmpiricalSample::make(Matrix::Zero(5000, 1));
  CHECK(w1_exact_pair(big1, big1).value == 0.0);
}

TEST_CASE("assignment solver is optimal on small instances (brute force)") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6;
    Matrix cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = u(gen);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += cost(i, perm[i]);
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(solve_assignment(cost).total_cost == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("1D assignment equals sorted coupling") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_matrix(30 + trial, 1, gen);
    const Matrix b = oracle::random_matrix(30 + trial, 1, gen, 2.0);
    CHECK(std::fabs(w1_assignment(a, b) - w1_sorted(a.col(0), b.col(0))) <= 1e-12);
  }
}

TEST_CASE("exact pair metric properties") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = oracle::random_matrix(25, 2, gen);
    const Matrix b = oracle::random_matrix(25, 2, gen, 1.5);
    const Matrix c = oracle::random_matrix(25, 2, gen, 0.5);
    CHECK(w1_assignment(a, c) <= w1_assignment(a, b) + w1_assignment(b, c) + 1e-9);

    const Eigen::RowVector2d shift(0.3, -0.7);
    const Matrix moved = a.rowwise() + shift;
    CHECK(w1_assignment(a, moved) == doctest::Approx(shift.norm()).epsilon(1e-12));
    CHECK(w1_assignment(b, moved) <= w1_assignment(b, a) + shift.norm() + 1e-9);

    const Matrix l = oracle::random_matrix(2, 2, gen);
    CHECK(w1_assignment(a * l.transpose(), b * l.transpose()) <= spectral_norm(l) * w1_assignment(a, b) + 1e-9);
  }
}

TEST_CASE("sliced estimator reduces to the 1D estimator when p = 1") {
  const Matrix z = gaussian_rows(3000, 1, 8).array() * 1.3 + 0.2;
  const EmpiricalSample s = EmpiricalSample::make(z);
  const W1Estimate sliced = w1_sliced_vs_gaussian(s, 7, 99);
  const W1Estimate one = w1_1d_vs_gaussian(z.col(0));
  CHECK(sliced.value == doctest::Approx(one.value).epsilon(1e-12));
  CHECK(sliced.floor == one.floor);
  CHECK(sliced.n_slices == 7);
}

TEST_CASE("sliced estimator on standard normal data sits at the floor") {
  const EmpiricalSample s = EmpiricalSample::make(gaussian_rows(100000, 2, 21));
  const W1Estimate est = w1_sliced_vs_gaussian(s, 100, 5);
  CHECK(est.value <= est.floor + 0.01);
}

TEST_CASE("sliced estimator on a unit shift approaches 2/pi") {
  // E|u_1| over uniform directions on the circle, by quadrature.
  const double expected =
      oracle::simpson([](double t) { return std::fabs(std::cos(t)); }, 0.0, 2.0 * std::numbers::pi, 4000) /
      (2.0 * std::numbers::pi);
  CHECK(expected == doctest::Approx(2.0 / std::numbers::pi).epsilon(1e-9));
  Matrix z = gaussian_rows(100000, 2, 22);
  z.col(0).array() += 1.0;
  const W1Estimate est = w1_sliced_vs_gaussian(EmpiricalSample::make(z), 1000, 6);
  CHECK(std::fabs(est.value - expected) <= 0.02);
}

TEST_CASE("sliced value does not exceed the exact pair distance plus the floor") {
  Matrix a = gaussian_rows(600, 2, 31);
  a.col(1).array() *= 1.4;
  a.col(0).array() += 0.3;
  const Matrix b = gaussian_rows(600, 2, 32);
  const W1Estimate sliced = w1_sliced_vs_gaussian(EmpiricalSample::make(a), 200, 1);
  const W1Estimate exact = w1_exact_pair(EmpiricalSample::make(a), EmpiricalSample::make(b));
  CHECK(sliced.value <= exact.value + sliced.floor);
}

TEST_CASE("debias") {
  CHECK(debias({0.05, Method::kExact1d, 0.05, 0}) == 0.0);
  CHECK(debias({0.12, Method::kExact1d, 0.05, 0}) == doctest::Approx(0.07));
  CHECK(debias({0.01, Method::kSliced, 0.05, 3}) == 0.0);
}
