#include "mest/mestim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "mest/error.hpp"

namespace mest {

ParamBox ParamBox::make(Vector lower, Vector upper, double interior_margin) {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw InvalidArgument("ParamBox: lower and upper must be non-empty and of equal size");
  }
  if (!(lower.array() < upper.array()).all()) throw InvalidArgument("ParamBox: need lower < upper componentwise");
  if (!(interior_margin > 0.0)) throw InvalidArgument("ParamBox: interior margin must be positive");
  return ParamBox{std::move(lower), std::move(upper), interior_margin};
}

ParamBox ParamBox::around(const Vector& center, double half_width, double interior_margin) {
  return make(center.array() - half_width, center.array() + half_width, interior_margin);
}

Vector ParamBox::project(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

bool ParamBox::contains(const Vector& x) const {
  return x.size() == dim() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

bool ParamBox::margin_fits(const Vector& theta0) const {
  return theta0.size() == dim() && (theta0.array() - interior_margin > lower.array()).all() &&
         (theta0.array() + interior_margin < upper.array()).all();
}

double ParamBox::distance_to_boundary(const Vector& x) const {
  return std::min((x - lower).minCoeff(), (upper - x).minCoeff());
}

SandwichPair SandwichPair::make(Matrix c_bar, Matrix h_bar) {
  require_symmetric(c_bar, "SandwichPair::c_bar");
  require_symmetric(h_bar, "SandwichPair::h_bar");
  SandwichPair s;
  s.lambda_min_c = sym_eigenvalues(c_bar).minCoeff();
  s.lambda_min_h = sym_eigenvalues(h_bar).minCoeff();
  s.c_bar = std::move(c_bar);
  s.h_bar = std::move(h_bar);
  return s;
}

namespace {

struct StartResult {
  Vector x;
  double f = std::numeric_limits<double>::infinity();
  double pg_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool stalled = false;
  int iterations = 0;
  std::exception_ptr error;
};

double projected_gradient_norm(const ParamBox& box, const Vector& x, const Vector& g) {
  return (x - box.project(x - g)).norm();
}

StartResult run_start(const Objective& objective, const ParamBox& box, const Vector& start, std::size_t index,
                      const MinimizerConfig& cfg) {
  const Eigen::Index p = box.dim();
  StartResult out;
  if (start.size() != p || !box.contains(start)) {
    throw InvalidArgument("minimize: start " + std::to_string(index) + " lies outside the box");
  }
  Vector x = start;
  Vector g = Vector::Zero(p);
  double f = objective(x, g);
  if (!std::isfinite(f) || !g.allFinite()) {
    throw BadStart("minimize: objective is not finite at start " + std::to_string(index), index);
  }

  Matrix inv_h = Matrix::Identity(p, p);
  bool fresh_metric = true;
  Vector g_new(p);

  for (int iter = 0;; ++iter) {
    out.iterations = iter;
    const double pgn = projected_gradient_norm(box, x, g);
    const double scale = std::max(1.0, std::fabs(f));
    if (pgn <= cfg.gradient_tolerance * scale) {
      out.converged = true;
      break;
    }
    if (iter >= cfg.max_iterations) break;

    // Variables pinned at a face with the gradient pushing outward stay fixed.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < p; ++i) {
      const bool at_lower = x[i] <= box.lower[i] && g[i] > 0.0;
      const bool at_upper = x[i] >= box.upper[i] && g[i] < 0.0;
      if (!at_lower && !at_upper) free.push_back(i);
    }
    if (free.empty()) {
      out.converged = true;
      break;
    }

    auto direction = [&](const Matrix& metric) {
      Vector d = Vector::Zero(p);
      for (Eigen::Index a : free) {
        double s = 0.0;
        for (Eigen::Index b : free) s -= metric(a, b) * g[b];
        d[a] = s;
      }
      return d;
    };

    Vector d = direction(inv_h);
    if (!(g.dot(d) < 0.0)) {
      inv_h.setIdentity();
      fresh_metric = true;
      d = direction(inv_h);
    }

    bool accepted = false;
    Vector x_new(p);
    double f_new = 0.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double t = 1.0;
      for (int k = 0; k < cfg.max_backtracks; ++k, t *= cfg.shrink) {
        x_new = box.project(x + t * d);
        const Vector s = x_new - x;
        if (s.squaredNorm() == 0.0) break;
        f_new = objective(x_new, g_new);
        if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f + cfg.armijo_c * g.dot(s)) {
          accepted = true;
          break;
        }
      }
      if (!accepted && !fresh_metric) {
        inv_h.setIdentity();
        fresh_metric = true;
        d = direction(inv_h);
      } else {
        break;
      }
    }

    if (!accepted) {
      // Roundoff-limited: no representable decrease remains.
      if (pgn <= cfg.stall_tolerance * scale) {
        out.converged = true;
      } else {
        out.stalled = true;
      }
      break;
    }

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh_metric) {
        inv_h = (sy / y.squaredNorm()) * Matrix::Identity(p, p);
        fresh_metric = false;
      }
      const double rho = 1.0 / sy;
      const Matrix left = Matrix::Identity(p, p) - rho * s * y.transpose();
      inv_h = left * inv_h * left.transpose() + rho * s * s.transpose();
      inv_h = symmetrize(inv_h);
    }
    x = x_new;
    f = f_new;
    g = g_new;
  }

  out.x = x;
  out.f = f;
  out.pg_norm = projected_gradient_norm(box, x, g);
  return out;
}

}  // namespace

EstimRun minimize(const Objective& objective, const ParamBox& box, const std::vector<Vector>& starts,
                  const MinimizerConfig& config) {
  if (starts.empty()) throw InvalidArgument("minimize: no starting points");
  const std::size_t m = starts.size();
  std::vector<StartResult> results(m);

  auto work = [&](std::size_t i) {
    try {
      results[i] = run_start(objective, box, starts[i], i, config);
    } catch (...) {
      results[i].error = std::current_exception();
    }
  };

  const std::size_t workers = std::min<std::size_t>(std::max(1u, config.workers), m);
  if (workers <= 1) {
    for (std::size_t i = 0; i < m; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < m; i += workers) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  for (const auto& r : results) {
    if (r.error) std::rethrow_exception(r.error);
  }

  std::size_t best = m;
  for (std::size_t i = 0; i < m; ++i) {
    if (results[i].stalled) continue;
    if (best == m) {
      best = i;
      continue;
    }
    const double tie = 1e-12 * std::max(1.0, std::fabs(results[best].f));
    if (results[i].f < results[best].f - tie) best = i;
  }
  if (best == m) throw StalledStart("minimize: line search stalled from every start");

  EstimRun run;
  run.theta_hat = results[best].x;
  run.objective_at_min = results[best].f;
  run.n_starts = static_cast<int>(m);
  run.converged = results[best].converged;
  run.gradient_norm_at_min = results[best].pg_norm;
  run.best_start = best;
  run.iterations = results[best].iterations;
  return run;
}

Matrix normalization_map(const SandwichPair& sandwich) {
  if (!(sandwich.lambda_min_c > 1e-10)) {
    throw NotInvertible("normalization_map: score covariance is degenerate", sandwich.lambda_min_c);
  }
  return sym_inv_sqrt(sandwich.c_bar) * sandwich.h_bar;
}

Vector normalize_statistic(const Vector& theta_hat, const Vector& theta0, double n, const SandwichPair& sandwich) {
  if (theta_hat.size() != theta0.size() || theta_hat.size() != sandwich.c_bar.rows()) {
    throw InvalidArgument("normalize_statistic: dimension mismatch");
  }
  return normalization_map(sandwich) * (std::sqrt(n) * (theta_hat - theta0));
}

Matrix sandwich_covariance(const SandwichPair& sandwich) {
  const Matrix h_inv = sym_inverse(sandwich.h_bar);
  return symmetrize(h_inv * sandwich.c_bar * h_inv);
}

double bonis_bound(double beta, int p, double n, double c0) {
  if (!(beta > 0.0) || p < 1 || !(n >= 1.0) || !(c0 > 0.0)) {
    throw InvalidArgument("bonis_bound: need beta > 0, p >= 1, n >= 1, c0 > 0");
  }
  return c0 * (std::pow(beta, 1.5) + p * beta) / std::sqrt(n);
}

Matrix central_jacobian(const std::function<Vector(const Vector&)>& field, const Vector& x, const Vector& steps) {
  const Eigen::Index p = x.size();
  Matrix jac;
  for (Eigen::Index k = 0; k < p; ++k) {
    Vector xp = x, xm = x;
    xp[k] += steps[k];
    xm[k] -= steps[k];
    const Vector col = (field(xp) - field(xm)) / (2.0 * steps[k]);
    if (k == 0) jac.resize(col.size(), p);
    jac.col(k) = col;
  }
  return jac;
}

Vector central_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double rel_step) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel_step * std::max(1.0, std::fabs(x[k]));
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

}  // namespace mest
