#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mest/linalg.hpp"

namespace mest::w1 {

/// R replications (rows) of a p-vector statistic.
struct EmpiricalSample {
  Matrix data;
  std::string label;

  /// Throws TooFewSamples for R < 2, InvalidArgument for non-finite data.
  static EmpiricalSample make(Matrix data, std::string label = {});

  Eigen::Index replications() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }
};

enum class Method { kExact1d, kExactAssignment, kSliced };

struct W1Estimate {
  double value = 0.0;
  Method method = Method::kExact1d;
  double floor = 0.0;
  int n_slices = 0;
};

inline constexpr std::uint64_t kDefaultFloorSeed = 0x5EEDF100Du;
inline constexpr int kDefaultFloorReplicates = 50;
/// Largest sample the O(R^3) assignment solver accepts.
inline constexpr Eigen::Index kMaxAssignmentSize = 4096;

/// Phi^{-1}((i - 0.5) / R), i = 1..R, exactly antisymmetric.
Vector quantile_grid(Eigen::Index r);

/// (1/R) sum |x_(i) - Phi^{-1}((i - 0.5) / R)|; the floor is not computed.
double w1_to_quantile_grid(const Vector& sample);

/// Mean of w1_to_quantile_grid over `replicates` standard-normal samples of size
/// R. Memoized per (R, replicates, seed); thread-safe.
double gaussian_floor(Eigen::Index r, int replicates = kDefaultFloorReplicates,
                      std::uint64_t seed = kDefaultFloorSeed);

W1Estimate w1_1d_vs_gaussian(const Vector& sample);

/// Exact W1 between two equal-size empirical measures. For p = 1 the sorted
/// coupling is optimal and is used at any R; for p >= 2 an optimal assignment
/// is solved, limited to R <= 4096.
W1Estimate w1_exact_pair(const EmpiricalSample& a, const EmpiricalSample& b);

/// Always solves the assignment problem (any p), R <= 4096.
double w1_assignment(const Matrix& a, const Matrix& b);

/// Sorted-coupling distance for two equal-size 1D samples.
double w1_sorted(const Vector& a, const Vector& b);

/// Mean over n_slices random unit directions u of the 1D estimate for sample * u.
/// Direction s is drawn from the stream keyed by (seed, s).
W1Estimate w1_sliced_vs_gaussian(const EmpiricalSample& sample, int n_slices, std::uint64_t seed);

/// Directions used by w1_sliced_vs_gaussian, one per column.
Matrix slice_directions(Eigen::Index p, int n_slices, std::uint64_t seed);

/// max(value - floor, 0).
double debias(const W1Estimate& est);

/// Minimum-cost perfect matching on a square cost matrix.
struct Assignment {
  std::vector<Eigen::Index> row_to_col;
  double total_cost = 0.0;
};
Assignment solve_assignment(const Matrix& cost);

}  // namespace mest::w1
