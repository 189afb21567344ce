#include "mest/gp_cv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mest/error.hpp"
#include "mest/random.hpp"

namespace mest::gp {

namespace {

constexpr double kPowerLow = 0.5;
constexpr double kPowerHigh = 1.5;
constexpr double kCenteringTolerance = 1e-8;

double trace_of_product(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b.transpose()).sum(); }

Vector hessian_steps(const Vector& theta) {
  return theta.unaryExpr([](double t) { return 1e-5 * std::max(1.0, std::fabs(t)); });
}

void require_steps_inside(const KernelFamily& family, const Vector& theta, const Vector& steps, const char* what) {
  const Vector lo = family.valid_lower();
  const Vector hi = family.valid_upper();
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    if (!(theta[k] - 2.0 * steps[k] > lo[k]) || !(theta[k] + 2.0 * steps[k] < hi[k])) {
      throw StepOutOfDomain(std::string(what) + ": theta component " + std::to_string(k) +
                            " is within two difference steps of the admissible boundary");
    }
  }
}

}  // namespace

KernelFamily KernelFamily::parse(const std::string& name, int d) {
  if (d < 1) throw InvalidArgument("kernel dimension must be positive");
  if (name == "exponential") return exponential(d);
  if (name == "powered-exponential") return powered_exponential(d);
  throw InvalidArgument("unknown kernel family '" + name + "'");
}

std::string KernelFamily::name() const {
  return kind == KernelKind::kExponential ? "exponential" : "powered-exponential";
}

bool KernelFamily::valid(const Vector& theta) const {
  if (theta.size() != p() || !theta.allFinite()) return false;
  if (!(theta[0] > 0.0)) return false;
  if (kind == KernelKind::kPoweredExponential && !(theta[1] >= kPowerLow && theta[1] <= kPowerHigh)) return false;
  return true;
}

void KernelFamily::require_valid(const Vector& theta) const {
  if (!valid(theta)) throw InvalidArgument("kernel parameter outside the admissible region of " + name());
}

Vector KernelFamily::valid_lower() const {
  if (kind == KernelKind::kExponential) return Vector::Constant(1, 0.0);
  return (Vector(2) << 0.0, kPowerLow).finished();
}

Vector KernelFamily::valid_upper() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (kind == KernelKind::kExponential) return Vector::Constant(1, inf);
  return (Vector(2) << inf, kPowerHigh).finished();
}

KernelValue kernel_eval_distance(const KernelFamily& family, const Vector& theta, double distance) {
  KernelValue out;
  out.gradient = Vector::Zero(family.p());
  if (distance == 0.0) {
    out.value = 1.0;
    return out;
  }
  if (family.kind == KernelKind::kExponential) {
    out.value = std::exp(-theta[0] * distance);
    out.gradient[0] = -distance * out.value;
  } else {
    const double log_r = std::log(distance);
    const double rp = std::exp(theta[1] * log_r);
    out.value = std::exp(-theta[0] * rp);
    out.gradient[0] = -rp * out.value;
    out.gradient[1] = -theta[0] * rp * log_r * out.value;
  }
  return out;
}

KernelValue kernel_eval(const KernelFamily& family, const Vector& theta, const Vector& lag) {
  family.require_valid(theta);
  if (lag.size() != family.d) throw InvalidArgument("kernel_eval: lag has the wrong dimension");
  return kernel_eval_distance(family, theta, lag.norm());
}

double decay_constant(const KernelFamily& family, const Vector& theta, double decay_exponent,
                      const std::vector<double>& radii) {
  family.require_valid(theta);
  double sup = 0.0;
  for (double r : radii) {
    const KernelValue kv = kernel_eval_distance(family, theta, r);
    const double envelope = 1.0 + std::pow(r, family.d + decay_exponent);
    double m = std::fabs(kv.value);
    for (Eigen::Index j = 0; j < kv.gradient.size(); ++j) m = std::max(m, std::fabs(kv.gradient[j]));
    sup = std::max(sup, m * envelope);
  }
  return sup;
}

std::optional<double> min_pairwise_distance(const Matrix& points) {
  if (points.rows() < 2) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      best = std::min(best, (points.row(i) - points.row(j)).squaredNorm());
    }
  }
  return std::sqrt(best);
}

PointSet build_points(Eigen::Index n, int d, double spacing, double jitter, std::uint64_t seed) {
  if (n < 1 || d < 1) throw InvalidArgument("build_points: need n >= 1 and d >= 1");
  if (!(spacing > 0.0)) throw InvalidArgument("build_points: spacing must be positive");
  if (!(jitter >= 0.0 && jitter < 0.5)) throw InvalidArgument("build_points: jitter must lie in [0, 0.5)");

  // Smallest m with m^d >= n.
  Eigen::Index m = 1;
  auto power = [d](Eigen::Index base) {
    Eigen::Index v = 1;
    for (int k = 0; k < d; ++k) v *= base;
    return v;
  };
  while (power(m) < n) ++m;

  PointSet ps;
  ps.points.resize(n, d);
  const double amplitude = jitter * spacing;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto rng = CounterRng::keyed(Stream::kPoints, {seed, static_cast<std::uint64_t>(i)});
    Eigen::Index rest = i;
    for (int k = d - 1; k >= 0; --k) {
      const Eigen::Index digit = rest % m;
      rest /= m;
      ps.points(i, k) = spacing * static_cast<double>(digit);
    }
    for (int k = 0; k < d; ++k) ps.points(i, k) += rng.uniform(-amplitude, amplitude);
  }
  ps.min_pairwise_distance = min_pairwise_distance(ps.points);
  return ps;
}

CorrMatrices build_corr(const KernelFamily& family, const Vector& theta, const PointSet& points,
                        const CorrOptions& options) {
  FlushDenormals ftz;
  family.require_valid(theta);
  if (points.d() != family.d) throw InvalidArgument("build_corr: point dimension does not match the kernel");
  const Eigen::Index n = points.n();
  const int p = family.p();

  CorrMatrices c;
  c.r = Matrix::Identity(n, n);
  if (options.derivatives) c.dr.assign(p, Matrix::Zero(n, n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double dist = (points.points.row(i) - points.points.row(j)).norm();
      const KernelValue kv = kernel_eval_distance(family, theta, dist);
      c.r(i, j) = c.r(j, i) = kv.value;
      if (options.derivatives) {
        for (int k = 0; k < p; ++k) c.dr[k](i, j) = c.dr[k](j, i) = kv.gradient[k];
      }
    }
  }

  Eigen::LLT<Matrix> llt(c.r);
  if (llt.info() != Eigen::Success) {
    const double lmin = sym_eigenvalues(c.r).minCoeff();
    throw NotPD("build_corr: Cholesky factorization failed, lambda_n = " + std::to_string(lmin), lmin);
  }
  c.chol_lower = llt.matrixL();
  Matrix w = Matrix::Identity(n, n);
  llt.matrixL().solveInPlace(w);
  c.r_inv.noalias() = w.transpose().triangularView<Eigen::Upper>() * w;
  c.r_inv = symmetrize(c.r_inv);
  c.d_inv = c.r_inv.diagonal().cwiseInverse();
  if (options.spectrum) c.lambda_min = sym_eigenvalues(c.r).minCoeff();
  return c;
}

Vector field_from_normals(const CorrMatrices& corr, const Vector& z) {
  if (z.size() != corr.n()) throw InvalidArgument("field_from_normals: size mismatch");
  return corr.chol_lower.triangularView<Eigen::Lower>() * z;
}

Vector sample_field(const CorrMatrices& corr, std::uint64_t seed, std::uint64_t replication) {
  auto rng = CounterRng::keyed(Stream::kField, {seed, replication});
  return field_from_normals(corr, rng.normal_vector(corr.n()));
}

double cv_objective(const CorrMatrices& corr, const Vector& y) {
  if (y.size() != corr.n()) throw InvalidArgument("cv_objective: size mismatch");
  const Vector residual = (corr.r_inv * y).cwiseProduct(corr.d_inv);
  return residual.squaredNorm() / static_cast<double>(corr.n());
}

GradMatrices gradient_matrices(const CorrMatrices& corr) {
  FlushDenormals ftz;
  if (corr.dr.empty()) throw InvalidArgument("gradient_matrices: correlation derivatives were not built");
  const Vector d_inv2 = corr.d_inv.cwiseAbs2();
  const Matrix left = 2.0 * corr.r_inv * d_inv2.asDiagonal();  // 2 R^{-1} D^{-2}
  GradMatrices m;
  for (const Matrix& dr : corr.dr) {
    const Matrix rinv_dr = corr.r_inv * dr;
    // diag(R^{-1} dR R^{-1})
    const Vector q = rinv_dr.cwiseProduct(corr.r_inv.transpose()).rowwise().sum();
    Matrix inner = -rinv_dr;
    inner.diagonal() += q.cwiseProduct(corr.d_inv);
    Matrix b = left * inner * corr.r_inv;
    m.b_sym.push_back(symmetrize(b));
    m.b.push_back(std::move(b));
  }
  return m;
}

CvGradient cv_gradient(const CorrMatrices& corr, const Vector& y) {
  if (y.size() != corr.n()) throw InvalidArgument("cv_gradient: size mismatch");
  CvGradient out;
  out.matrices = gradient_matrices(corr);
  const auto n = static_cast<double>(corr.n());
  out.gradient.resize(static_cast<Eigen::Index>(out.matrices.b.size()));
  for (std::size_t j = 0; j < out.matrices.b.size(); ++j) {
    out.gradient[static_cast<Eigen::Index>(j)] = y.dot(out.matrices.b[j] * y) / n;
  }
  return out;
}

double cv_value_and_gradient(const CorrMatrices& corr, const Vector& y, Vector& gradient) {
  FlushDenormals ftz;
  if (y.size() != corr.n()) throw InvalidArgument("cv_value_and_gradient: size mismatch");
  if (corr.dr.empty()) throw InvalidArgument("cv_value_and_gradient: correlation derivatives were not built");
  const auto n = static_cast<double>(corr.n());
  const Vector a = corr.r_inv * y;
  const Vector d_inv2 = corr.d_inv.cwiseAbs2();
  const Vector u = a.cwiseProduct(d_inv2);  // D^{-2} R^{-1} y
  const Vector w = a.cwiseAbs2().cwiseProduct(d_inv2).cwiseProduct(corr.d_inv);
  gradient.resize(static_cast<Eigen::Index>(corr.dr.size()));
  Matrix rinv_dr(corr.n(), corr.n());
  for (std::size_t j = 0; j < corr.dr.size(); ++j) {
    rinv_dr.noalias() = corr.r_inv * corr.dr[j];
    const Vector q = rinv_dr.cwiseProduct(corr.r_inv).rowwise().sum();
    const double first = w.dot(q);
    const double second = u.dot(rinv_dr * a);
    gradient[static_cast<Eigen::Index>(j)] = 2.0 * (first - second) / n;
  }
  return a.cwiseProduct(corr.d_inv).squaredNorm() / n;
}

std::vector<double> gradient_matrix_norms(const GradMatrices& m) {
  std::vector<double> out;
  out.reserve(m.b.size());
  for (const Matrix& b : m.b) out.push_back(spectral_norm(b));
  return out;
}

Matrix cv_hessian(const KernelFamily& family, const Vector& theta, const PointSet& points, const Vector& y,
                  double* asymmetry) {
  family.require_valid(theta);
  const Vector steps = hessian_steps(theta);
  require_steps_inside(family, theta, steps, "cv_hessian");
  auto grad_at = [&](const Vector& t) {
    const CorrMatrices c = build_corr(family, t, points, {.spectrum = false, .derivatives = true});
    Vector g;
    cv_value_and_gradient(c, y, g);
    return g;
  };
  const Matrix jac = central_jacobian(grad_at, theta, steps);
  if (asymmetry != nullptr) {
    const double scale = std::max(1e-300, jac.norm());
    *asymmetry = (jac - jac.transpose()).norm() / scale;
  }
  return symmetrize(jac);
}

Vector expected_gradient_traces(const CorrMatrices& corr0, const GradMatrices& m) {
  Vector t(static_cast<Eigen::Index>(m.b_sym.size()));
  for (std::size_t j = 0; j < m.b_sym.size(); ++j) {
    t[static_cast<Eigen::Index>(j)] = corr0.r.cwiseProduct(m.b_sym[j]).sum();
  }
  return t;
}

SandwichPair cv_sandwich_at_truth(const KernelFamily& family, const Vector& theta0, const PointSet& points) {
  FlushDenormals ftz;
  family.require_valid(theta0);
  const auto n = static_cast<double>(points.n());
  const int p = family.p();
  const CorrMatrices corr0 = build_corr(family, theta0, points, {.spectrum = false, .derivatives = true});
  const GradMatrices m0 = gradient_matrices(corr0);

  const Vector traces = expected_gradient_traces(corr0, m0);
  for (int j = 0; j < p; ++j) {
    if (std::fabs(traces[j]) > kCenteringTolerance * n) {
      throw ModelInconsistency("cv_sandwich_at_truth: Tr(R B_" + std::to_string(j) +
                               ") = " + std::to_string(traces[j]) + " at theta0; expected zero");
    }
  }

  std::vector<Matrix> rb;
  for (const Matrix& b : m0.b_sym) rb.push_back(corr0.r * b);
  Matrix c_bar(p, p);
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k <= j; ++k) c_bar(j, k) = c_bar(k, j) = 2.0 * trace_of_product(rb[j], rb[k]) / n;
  }

  const Vector steps = hessian_steps(theta0);
  require_steps_inside(family, theta0, steps, "cv_sandwich_at_truth");
  auto expected_gradient = [&](const Vector& t) {
    const CorrMatrices c = build_corr(family, t, points, {.spectrum = false, .derivatives = true});
    const GradMatrices m = gradient_matrices(c);
    return Vector(expected_gradient_traces(corr0, m) / n);
  };
  const Matrix h_bar = symmetrize(central_jacobian(expected_gradient, theta0, steps));
  return SandwichPair::make(c_bar, h_bar);
}

QuadformBound quadform_w1_bound(const Matrix& k, const std::vector<Matrix>& a_list, CovConvention convention) {
  FlushDenormals ftz;
  require_symmetric(k, "quadform_w1_bound: K");
  if (a_list.empty()) throw InvalidArgument("quadform_w1_bound: no matrices");
  const Eigen::Index n = k.rows();
  const auto p = static_cast<Eigen::Index>(a_list.size());
  std::vector<Matrix> ka;
  for (Eigen::Index i = 0; i < p; ++i) {
    const Matrix& a = a_list[static_cast<std::size_t>(i)];
    if (a.rows() != n) throw SizeMismatch("quadform_w1_bound: A and K sizes differ");
    require_symmetric(a, "quadform_w1_bound: A");
    const double centering = trace_of_product(a, k);
    if (std::fabs(centering) > kCenteringTolerance * static_cast<double>(n)) {
      throw NotCentered("quadform_w1_bound: Tr(A_" + std::to_string(i) + " K) = " + std::to_string(centering));
    }
    ka.push_back(k * a);
  }

  QuadformBound out;
  const double factor = convention == CovConvention::kChaos ? 2.0 : 1.0;
  out.c.resize(p, p);
  out.trace_sum = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const Matrix prod = ka[static_cast<std::size_t>(i)] * ka[static_cast<std::size_t>(j)];
      out.c(i, j) = factor * prod.trace();
      out.trace_sum += trace_of_product(prod, prod);
    }
  }
  out.c = symmetrize(out.c);
  const Vector lambda = sym_eigenvalues(out.c);
  const double lmax = lambda[0];
  const double lmin = lambda[p - 1];
  if (!(lmin > 0.0) || !(lmin > 1e-12 * lmax)) {
    throw DegenerateC("quadform_w1_bound: C is singular (lambda_p = " + std::to_string(lmin) + ")");
  }
  out.bound = std::sqrt(lmax) / lmin * std::sqrt(2.0 * out.trace_sum);
  return out;
}

}  // namespace mest::gp
