#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mest/linalg.hpp"

namespace mest {

/// Compact hyper-rectangle parameter space with the radius of the ball around
/// the true parameter that must sit strictly inside it.
struct ParamBox {
  Vector lower;
  Vector upper;
  double interior_margin = 0.0;

  /// Validates lower < upper componentwise and margin > 0.
  static ParamBox make(Vector lower, Vector upper, double interior_margin);
  /// Box [center - half_width, center + half_width] in every coordinate.
  static ParamBox around(const Vector& center, double half_width, double interior_margin);

  Eigen::Index dim() const { return lower.size(); }
  Vector project(const Vector& x) const;
  bool contains(const Vector& x) const;
  /// The ball of radius interior_margin around theta0 lies in the interior.
  bool margin_fits(const Vector& theta0) const;
  /// Smallest distance from x to any face of the box.
  double distance_to_boundary(const Vector& x) const;
  Vector center() const { return 0.5 * (lower + upper); }
};

enum class EvalMode { kAnalytic, kFiniteDifference };

/// Value, gradient and Hessian of an objective at one point.
struct ObjectiveEval {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
  EvalMode gradient_mode = EvalMode::kAnalytic;
  EvalMode hessian_mode = EvalMode::kAnalytic;
};

/// Score covariance C and expected Hessian H at the true parameter.
struct SandwichPair {
  Matrix c_bar;
  Matrix h_bar;
  double lambda_min_c = 0.0;
  double lambda_min_h = 0.0;

  /// Fills the lambda fields from the matrices; both must be symmetric.
  static SandwichPair make(Matrix c_bar, Matrix h_bar);
};

struct EstimRun {
  Vector theta_hat;
  double objective_at_min = 0.0;
  int n_starts = 0;
  bool converged = false;
  double gradient_norm_at_min = 0.0;  // projected gradient norm
  std::size_t best_start = 0;
  int iterations = 0;
};

struct MinimizerConfig {
  double armijo_c = 1e-4;
  double shrink = 0.5;
  double gradient_tolerance = 1e-9;
  // Accept a roundoff-limited line-search failure as converged below this.
  double stall_tolerance = 1e-7;
  int max_iterations = 500;
  int max_backtracks = 50;
  unsigned workers = 1;
};

/// Returns M(theta) and writes its gradient into `gradient` (already sized).
using Objective = std::function<double(const Vector& theta, Vector& gradient)>;

/// Multi-start projected BFGS with Armijo backtracking over a box. The best
/// start wins on objective value; ties within 1e-12 go to the lowest index.
EstimRun minimize(const Objective& objective, const ParamBox& box, const std::vector<Vector>& starts,
                  const MinimizerConfig& config = {});

/// C^{-1/2} H, the linear map applied to sqrt(n)(theta_hat - theta0).
Matrix normalization_map(const SandwichPair& sandwich);

/// C^{-1/2} H sqrt(n) (theta_hat - theta0).
Vector normalize_statistic(const Vector& theta_hat, const Vector& theta0, double n, const SandwichPair& sandwich);

/// H^{-1} C H^{-1}, the asymptotic covariance of sqrt(n)(theta_hat - theta0).
Matrix sandwich_covariance(const SandwichPair& sandwich);

/// Explicit Wasserstein bound c0 (beta^{3/2} + p beta) / sqrt(n) for normalized
/// sums of independent vectors whose fourth moments are bounded by beta.
double bonis_bound(double beta, int p, double n, double c0);

/// Central-difference Jacobian of a vector field; column k uses step steps[k].
Matrix central_jacobian(const std::function<Vector(const Vector&)>& field, const Vector& x, const Vector& steps);

/// Central-difference gradient of a scalar function; step h_k = rel_step * max(1, |x_k|).
Vector central_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double rel_step);

}  // namespace mest
