#pragma once

#include <cstdint>
#include <memory>

#include "mest/linalg.hpp"
#include "mest/mestim.hpp"

namespace mest::logistic {

/// Frozen covariates (one row per observation) and the true parameter.
struct LogisticDesign {
  Matrix x;
  Vector theta0;
  double c_x1 = 0.0;                      // bound on every row norm
  double lambda_min_second_moment = 0.0;  // lambda_p((1/n) sum x_i x_i^T)

  /// Throws InvalidArgument when a row norm exceeds c_x1 or shapes disagree.
  static LogisticDesign make(Matrix x, Vector theta0, double c_x1);

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }
};

struct LogisticData {
  std::shared_ptr<const LogisticDesign> design;
  Vector y;  // entries in {0, 1}
  std::uint64_t seed = 0;
};

/// Rows i.i.d. uniform on [-half_width, half_width]^p. Row i comes from its own
/// stream, so the design for n is a prefix of the design for any larger n.
/// Redrawn (with a new attempt key) until lambda_p of the second-moment matrix
/// reaches c_x2; throws ConditionsViolated after max_attempts.
LogisticDesign uniform_design(Eigen::Index n, const Vector& theta0, std::uint64_t seed, double half_width = 1.0,
                              double c_x2 = 0.05, int max_attempts = 100);

/// lambda_p((1/n) sum x_i x_i^T).
double second_moment_min_eigenvalue(const Matrix& x);

/// Logistic function with saturated branches beyond |t| = 30.
double sigmoid(double t);
/// log(1 + e^t) without overflow.
double log1pexp(double t);

double success_prob(const Vector& x_i, const Vector& theta);

/// Independent Bernoulli(success_prob(x_i, theta0)) outcomes; draw i uses the
/// counter stream keyed by (seed, i).
LogisticData sample_outcomes(std::shared_ptr<const LogisticDesign> design, std::uint64_t seed);

/// Negative normalized log-likelihood with analytic gradient and Hessian.
ObjectiveEval objective(const LogisticData& data, const Vector& theta);

/// Value and gradient only; the minimizer's hot path.
double value_and_gradient(const LogisticData& data, const Vector& theta, Vector& gradient);

/// H = (1/n) sum p_i (1 - p_i) x_i x_i^T at theta0, and C = H.
SandwichPair sandwich_at_truth(const LogisticDesign& design);

/// max_i E||C^{-1/2} grad rho(theta0, X_i)||^4, the fourth-moment constant of
/// the normalized per-observation scores. Requires C invertible.
double score_fourth_moment(const LogisticDesign& design, const SandwichPair& sandwich);

}  // namespace mest::logistic
