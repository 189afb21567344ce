#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mest/linalg.hpp"
#include "mest/mestim.hpp"

namespace mest::gp {

/// Observation locations, one row per point.
struct PointSet {
  Matrix points;
  // Unset for a single point.
  std::optional<double> min_pairwise_distance;

  Eigen::Index n() const { return points.rows(); }
  Eigen::Index d() const { return points.cols(); }
};

enum class KernelKind { kExponential, kPoweredExponential };

/// Stationary isotropic correlation family.
///   exponential:          k(x) = exp(-rate |x|),          theta = (rate)
///   powered-exponential:  k(x) = exp(-rate |x|^power),    theta = (rate, power), power in [0.5, 1.5]
struct KernelFamily {
  KernelKind kind = KernelKind::kExponential;
  int d = 1;

  static KernelFamily exponential(int d) { return {KernelKind::kExponential, d}; }
  static KernelFamily powered_exponential(int d) { return {KernelKind::kPoweredExponential, d}; }
  static KernelFamily parse(const std::string& name, int d);

  int p() const { return kind == KernelKind::kExponential ? 1 : 2; }
  std::string name() const;
  bool valid(const Vector& theta) const;
  /// Throws InvalidArgument unless valid(theta).
  void require_valid(const Vector& theta) const;
  /// Lower/upper limits of the admissible parameter region (rate > 0 is open).
  Vector valid_lower() const;
  Vector valid_upper() const;
};

struct KernelValue {
  double value = 0.0;
  Vector gradient;  // d/dtheta
};

KernelValue kernel_eval(const KernelFamily& family, const Vector& theta, const Vector& lag);
/// Same as kernel_eval for a lag of Euclidean norm `distance`.
KernelValue kernel_eval_distance(const KernelFamily& family, const Vector& theta, double distance);

/// sup over `radii` of max(|k|, |dk/dtheta_j|) * (1 + r^{d + decay_exponent}); finite
/// and small when the family decays faster than the given power.
double decay_constant(const KernelFamily& family, const Vector& theta, double decay_exponent,
                      const std::vector<double>& radii);

/// Perturbed regular grid: spacing `spacing` in [0, spacing * ceil(n^{1/d})]^d,
/// first n nodes in lexicographic order, every coordinate shifted by at most
/// jitter * spacing. Needs jitter < 0.5.
PointSet build_points(Eigen::Index n, int d, double spacing, double jitter, std::uint64_t seed);

/// Exact O(n^2) scan; unset for n < 2.
std::optional<double> min_pairwise_distance(const Matrix& points);

struct CorrOptions {
  bool spectrum = true;     // compute lambda_n(R)
  bool derivatives = true;  // fill dr
};

struct CorrMatrices {
  Matrix r;
  Matrix chol_lower;  // R = L L^T
  Matrix r_inv;
  Vector d_inv;  // diag(R^{-1})^{-1}, stored as a vector
  std::vector<Matrix> dr;
  std::optional<double> lambda_min;

  Eigen::Index n() const { return r.rows(); }
};

/// R_{ij} = k_theta(x_i - x_j) with R^{-1} from the Cholesky factor. Throws NotPD
/// (with lambda_n) when the factorization breaks down.
CorrMatrices build_corr(const KernelFamily& family, const Vector& theta, const PointSet& points,
                        const CorrOptions& options = {});

/// y = L z, z i.i.d. N(0, 1) from the stream keyed by (seed, replication).
Vector sample_field(const CorrMatrices& corr, std::uint64_t seed, std::uint64_t replication = 0);
Vector field_from_normals(const CorrMatrices& corr, const Vector& z);

/// (1/n) y^T R^{-1} diag(R^{-1})^{-2} R^{-1} y, the mean squared leave-one-out error.
double cv_objective(const CorrMatrices& corr, const Vector& y);

struct GradMatrices {
  std::vector<Matrix> b;
  std::vector<Matrix> b_sym;
};

/// Gradient (1/n) y^T B_j y with
///   B_j = 2 R^{-1} D^{-2} (diag(R^{-1} dR_j R^{-1}) D^{-1} - R^{-1} dR_j) R^{-1},  D = diag(R^{-1}).
struct CvGradient {
  Vector gradient;
  GradMatrices matrices;
};
CvGradient cv_gradient(const CorrMatrices& corr, const Vector& y);

/// B_j and their symmetrized versions, without a data vector.
GradMatrices gradient_matrices(const CorrMatrices& corr);

/// Same value and gradient as cv_objective / cv_gradient, without forming B_j.
double cv_value_and_gradient(const CorrMatrices& corr, const Vector& y, Vector& gradient);

/// rho_1(B_j) for every j.
std::vector<double> gradient_matrix_norms(const GradMatrices& m);

/// Hessian by central differences of the analytic gradient, step
/// 1e-5 max(1, |theta_k|), symmetrized. `asymmetry` (optional) receives
/// ||H - H^T||_F / max(1e-300, ||H||_F) before symmetrization.
Matrix cv_hessian(const KernelFamily& family, const Vector& theta, const PointSet& points, const Vector& y,
                  double* asymmetry = nullptr);

/// C_jk = (2/n) Tr(R B~_j R B~_k) and H from differentiating the expected
/// gradient g_j(theta) = (1/n) Tr(R_{theta0} B~_{theta,j}). Throws
/// ModelInconsistency if |Tr(R B~_j)| > 1e-8 n at theta0.
SandwichPair cv_sandwich_at_truth(const KernelFamily& family, const Vector& theta0, const PointSet& points);

/// Tr(R_{theta0} B~_j) for every j; zero in exact arithmetic.
Vector expected_gradient_traces(const CorrMatrices& corr0, const GradMatrices& m);

enum class CovConvention { kTrace, kChaos };

struct QuadformBound {
  double bound = 0.0;
  Matrix c;
  double trace_sum = 0.0;  // sum_{i,j} Tr((K A_i K A_j)^2)
};

/// W1 bound between X = (Y^T A_i Y)_i, Y ~ N(0, K), and N(0, C):
///   sqrt(lambda_1(C)) / lambda_p(C) * sqrt(2 sum_{i,j} Tr((K A_i K A_j)^2)),
/// with C_ij = Tr(K A_i K A_j) (kTrace) or 2 Tr(K A_i K A_j) (kChaos).
QuadformBound quadform_w1_bound(const Matrix& k, const std::vector<Matrix>& a_list, CovConvention convention);

}  // namespace mest::gp
