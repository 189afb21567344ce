#include "mest/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

#include "mest/error.hpp"
#include "mest/normal.hpp"
#include "mest/random.hpp"

namespace mest::w1 {

namespace {

double sorted_distance_to_grid(Vector sample, const Vector& grid) {
  std::sort(sample.data(), sample.data() + sample.size());
  return (sample - grid).cwiseAbs().mean();
}

void require_samples(Eigen::Index r) {
  if (r < 2) throw TooFewSamples("W1 estimators need at least two samples");
}

}  // namespace

EmpiricalSample EmpiricalSample::make(Matrix data, std::string label) {
  require_samples(data.rows());
  if (data.cols() < 1) throw InvalidArgument("EmpiricalSample: statistic dimension must be positive");
  if (!data.allFinite()) throw InvalidArgument("EmpiricalSample: non-finite entries");
  return EmpiricalSample{std::move(data), std::move(label)};
}

Vector quantile_grid(Eigen::Index r) {
  Vector g(r);
  const auto rd = static_cast<double>(r);
  for (Eigen::Index i = 0; i < r / 2; ++i) {
    const double q = normal_quantile((static_cast<double>(i) + 0.5) / rd);
    g[i] = q;
    g[r - 1 - i] = -q;
  }
  if (r % 2 == 1) g[r / 2] = 0.0;
  return g;
}

double w1_to_quantile_grid(const Vector& sample) {
  require_samples(sample.size());
  return sorted_distance_to_grid(sample, quantile_grid(sample.size()));
}

double gaussian_floor(Eigen::Index r, int replicates, std::uint64_t seed) {
  require_samples(r);
  if (replicates < 1) throw InvalidArgument("gaussian_floor: need at least one replicate");
  static std::mutex mutex;
  static std::map<std::tuple<Eigen::Index, int, std::uint64_t>, double> memo;
  const auto key = std::make_tuple(r, replicates, seed);
  std::lock_guard<std::mutex> lock(mutex);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  const Vector grid = quantile_grid(r);
  double total = 0.0;
  for (int k = 0; k < replicates; ++k) {
    auto rng = CounterRng::keyed(Stream::kFloor, {seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(k)});
    total += sorted_distance_to_grid(rng.normal_vector(r), grid);
  }
  const double floor = total / replicates;
  memo.emplace(key, floor);
  return floor;
}

W1Estimate w1_1d_vs_gaussian(const Vector& sample) {
  W1Estimate est;
  est.value = w1_to_quantile_grid(sample);
  est.method = Method::kExact1d;
  est.floor = gaussian_floor(sample.size());
  return est;
}

double w1_sorted(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw SizeMismatch("w1_sorted: samples differ in size");
  require_samples(a.size());
  Vector sa = a, sb = b;
  std::sort(sa.data(), sa.data() + sa.size());
  std::sort(sb.data(), sb.data() + sb.size());
  return (sa - sb).cwiseAbs().mean();
}

Assignment solve_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw SizeMismatch("solve_assignment: cost matrix must be square");
  const Eigen::Index n = cost.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting paths with row/column potentials (1-based, column 0 is a sentinel).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (Eigen::Index i = 1; i <= n; ++i) {
    match[0] = i;
    Eigen::Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = match[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment out;
  out.row_to_col.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index j = 1; j <= n; ++j) out.row_to_col[static_cast<std::size_t>(match[j] - 1)] = j - 1;
  for (Eigen::Index i = 0; i < n; ++i) out.total_cost += cost(i, out.row_to_col[static_cast<std::size_t>(i)]);
  return out;
}

double w1_assignment(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw SizeMismatch("w1_assignment: sample shapes differ");
  require_samples(a.rows());
  if (a.rows() > kMaxAssignmentSize) throw TooLarge("w1_assignment: more than 4096 samples");
  const Eigen::Index r = a.rows();
  Matrix cost(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) cost(i, j) = (a.row(i) - b.row(j)).norm();
  }
  return solve_assignment(cost).total_cost / static_cast<double>(r);
}

W1Estimate w1_exact_pair(const EmpiricalSample& a, const EmpiricalSample& b) {
  if (a.replications() != b.replications() || a.dim() != b.dim()) {
    throw SizeMismatch("w1_exact_pair: samples differ in size or dimension");
  }
  W1Estimate est;
  est.method = Method::kExactAssignment;
  est.floor = 0.0;
  if (a.dim() == 1) {
    est.value = w1_sorted(a.data.col(0), b.data.col(0));
  } else {
    est.value = w1_assignment(a.data, b.data);
  }
  return est;
}

Matrix slice_directions(Eigen::Index p, int n_slices, std::uint64_t seed) {
  if (p < 1 || n_slices < 1) throw InvalidArgument("slice_directions: need p >= 1 and n_slices >= 1");
  Matrix dirs(p, n_slices);
  for (int s = 0; s < n_slices; ++s) {
    auto rng = CounterRng::keyed(Stream::kSlices, {seed, static_cast<std::uint64_t>(s)});
    Vector z;
    do {
      z = rng.normal_vector(p);
    } while (z.squaredNorm() == 0.0);
    dirs.col(s) = z / z.norm();
  }
  return dirs;
}

W1Estimate w1_sliced_vs_gaussian(const EmpiricalSample& sample, int n_slices, std::uint64_t seed) {
  const Matrix dirs = slice_directions(sample.dim(), n_slices, seed);
  const Vector grid = quantile_grid(sample.replications());
  double total = 0.0;
  for (int s = 0; s < n_slices; ++s) total += sorted_distance_to_grid(sample.data * dirs.col(s), grid);
  W1Estimate est;
  est.value = total / n_slices;
  est.method = Method::kSliced;
  // Every projection of N(0, I_p) is N(0, 1), so the sliced floor has the same
  // expectation as the 1D floor.
  est.floor = gaussian_floor(sample.replications());
  est.n_slices = n_slices;
  return est;
}

double debias(const W1Estimate& est) { return std::max(est.value - est.floor, 0.0); }

}  // namespace mest::w1
