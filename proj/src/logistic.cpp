#include "mest/logistic.hpp"

#include <cmath>
#include <string>

#include "mest/error.hpp"
#include "mest/random.hpp"

namespace mest::logistic {

namespace {
constexpr double kSaturation = 30.0;
}

LogisticDesign LogisticDesign::make(Matrix x, Vector theta0, double c_x1) {
  if (x.rows() < 1 || x.cols() < 1) throw InvalidArgument("LogisticDesign: empty design");
  if (theta0.size() != x.cols()) throw InvalidArgument("LogisticDesign: theta0 has the wrong dimension");
  if (!x.allFinite() || !theta0.allFinite()) throw InvalidArgument("LogisticDesign: non-finite entries");
  const double max_norm = x.rowwise().norm().maxCoeff();
  if (max_norm > c_x1) {
    throw InvalidArgument("LogisticDesign: row norm " + std::to_string(max_norm) + " exceeds bound " +
                          std::to_string(c_x1));
  }
  LogisticDesign d;
  d.lambda_min_second_moment = second_moment_min_eigenvalue(x);
  d.x = std::move(x);
  d.theta0 = std::move(theta0);
  d.c_x1 = c_x1;
  return d;
}

double second_moment_min_eigenvalue(const Matrix& x) {
  const Matrix m = symmetrize(x.transpose() * x / static_cast<double>(x.rows()));
  return sym_eigenvalues(m).minCoeff();
}

LogisticDesign uniform_design(Eigen::Index n, const Vector& theta0, std::uint64_t seed, double half_width,
                              double c_x2, int max_attempts) {
  const Eigen::Index p = theta0.size();
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Matrix x(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto rng = CounterRng::keyed(Stream::kDesign, {seed, static_cast<std::uint64_t>(attempt),
                                                     static_cast<std::uint64_t>(i)});
      for (Eigen::Index k = 0; k < p; ++k) x(i, k) = rng.uniform(-half_width, half_width);
    }
    if (second_moment_min_eigenvalue(x) >= c_x2) {
      return LogisticDesign::make(std::move(x), theta0, half_width * std::sqrt(static_cast<double>(p)));
    }
  }
  throw ConditionsViolated("uniform_design: no draw reached the second-moment eigenvalue threshold");
}

double sigmoid(double t) {
  if (t < -kSaturation) return std::exp(t);
  if (t > kSaturation) return 1.0 - std::exp(-t);
  return 1.0 / (1.0 + std::exp(-t));
}

double log1pexp(double t) {
  if (t < -kSaturation) return std::exp(t);
  if (t > kSaturation) return t + std::exp(-t);
  return std::log1p(std::exp(t));
}

double success_prob(const Vector& x_i, const Vector& theta) { return sigmoid(x_i.dot(theta)); }

LogisticData sample_outcomes(std::shared_ptr<const LogisticDesign> design, std::uint64_t seed) {
  const Eigen::Index n = design->n();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto rng = CounterRng::keyed(Stream::kOutcomes, {seed, static_cast<std::uint64_t>(i)});
    const double prob = success_prob(design->x.row(i).transpose(), design->theta0);
    y[i] = rng.uniform() < prob ? 1.0 : 0.0;
  }
  return LogisticData{std::move(design), std::move(y), seed};
}

double value_and_gradient(const LogisticData& data, const Vector& theta, Vector& gradient) {
  const Matrix& x = data.design->x;
  const auto n = static_cast<double>(x.rows());
  const Vector t = x * theta;
  double value = 0.0;
  Vector residual(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    value += -data.y[i] * t[i] + log1pexp(t[i]);
    residual[i] = sigmoid(t[i]) - data.y[i];
  }
  gradient = x.transpose() * residual / n;
  return value / n;
}

ObjectiveEval objective(const LogisticData& data, const Vector& theta) {
  const Matrix& x = data.design->x;
  ObjectiveEval ev;
  ev.value = value_and_gradient(data, theta, ev.gradient);
  const Vector t = x * theta;
  Vector w(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double prob = sigmoid(t[i]);
    w[i] = prob * (1.0 - prob);
  }
  ev.hessian = symmetrize(x.transpose() * w.asDiagonal() * x / static_cast<double>(x.rows()));
  ev.gradient_mode = EvalMode::kAnalytic;
  ev.hessian_mode = EvalMode::kAnalytic;
  return ev;
}

SandwichPair sandwich_at_truth(const LogisticDesign& design) {
  const Vector t = design.x * design.theta0;
  Vector w(design.n());
  for (Eigen::Index i = 0; i < design.n(); ++i) {
    const double prob = sigmoid(t[i]);
    w[i] = prob * (1.0 - prob);
  }
  Matrix h = symmetrize(design.x.transpose() * w.asDiagonal() * design.x / static_cast<double>(design.n()));
  // Well-specified likelihood: Cov(sqrt(n) grad M_n(theta0)) equals the Hessian.
  return SandwichPair::make(h, h);
}

double score_fourth_moment(const LogisticDesign& design, const SandwichPair& sandwich) {
  const Matrix c_inv_sqrt = sym_inv_sqrt(sandwich.c_bar);
  double beta = 0.0;
  for (Eigen::Index i = 0; i < design.n(); ++i) {
    const Vector xi = design.x.row(i).transpose();
    const double prob = success_prob(xi, design.theta0);
    const double moment4 = prob * (1.0 - prob) * (1.0 - 3.0 * prob + 3.0 * prob * prob);
    const double norm2 = (c_inv_sqrt * xi).squaredNorm();
    beta = std::max(beta, norm2 * norm2 * moment4);
  }
  return beta;
}

}  // namespace mest::logistic
