#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mest/gp_cv.hpp"
#include "mest/linalg.hpp"
#include "mest/logistic.hpp"
#include "mest/mestim.hpp"

namespace mest::harness {

inline constexpr const char* kVersion = "mest 1.0.0";

enum class ModelKind { kLogistic, kGpCv, kSynthetic };

struct LogisticBlock {
  int p = 2;
  std::vector<double> theta0{0.5, -0.5};
  double half_width = 1.0;      // design rows uniform on [-half_width, half_width]^p
  double box_half_width = 3.0;  // Theta = theta0 +- box_half_width
  double interior_margin = 0.1;
};

struct GpBlock {
  std::string kernel = "exponential";
  std::vector<double> theta0{1.0};
  int d = 1;
  double spacing = 1.0;
  double jitter = 0.2;
  std::vector<double> box_lower{0.2};
  std::vector<double> box_upper{5.0};
  double interior_margin = 0.1;
};

/// Statistic drawn directly as N(0, I_p) + shift * n^{-1/2} * (1, ..., 1).
struct SyntheticBlock {
  int p = 2;
  double shift = 0.0;
};

struct MinimizerBlock {
  int n_starts = 1;
  double gradient_tolerance = 1e-9;
  double stall_tolerance = 1e-7;
  int max_iterations = 500;
};

struct W1Block {
  int n_slices = 100;
  int floor_replicates = 50;
};

/// Pass thresholds for verify_conditions.
struct ConditionsBlock {
  double c_x2 = 0.05;  // lambda_p of the design second moment
  double c_x = 0.5;    // minimum pairwise distance
  double c_r1 = 1e-3;  // lambda_n(R) over the parameter grid
  double c_h = 1e-6;   // lambda_p(H)
  double c_c = 1e-6;   // lambda_p(C)
  int theta_grid = 21;
};

struct BoundsBlock {
  double c0 = 1.0;
  int mc_draws = 10000;
  std::vector<double> beta;  // plug-in values for the Bonis table
};

struct ExperimentConfig {
  std::string name = "experiment";
  ModelKind model = ModelKind::kLogistic;
  std::vector<Eigen::Index> n_grid;
  Eigen::Index replications = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  LogisticBlock logistic;
  GpBlock gp;
  SyntheticBlock synthetic;
  MinimizerBlock minimizer;
  W1Block w1;
  ConditionsBlock conditions;
  BoundsBlock bounds;

  /// Throws ConfigError on unknown keys, wrong types or violated invariants.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
  /// Number of parameters of the configured model.
  int p() const;
};

std::string model_name(ModelKind m);

struct RateRow {
  Eigen::Index n = 0;
  Eigen::Index replications = 0;  // successful replications
  Eigen::Index failures = 0;
  double coordmax_raw = 0.0;
  double coordmax_floor = 0.0;
  double coordmax_debiased = 0.0;
  double sliced_raw = 0.0;
  double sliced_floor = 0.0;
  double sliced_debiased = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double se = 0.0;
  int points = 0;
};

struct RateReport {
  std::vector<RateRow> rows;
  std::optional<SlopeFit> fit;  // unset when fewer than 3 rows have w1_debiased > 0
  nlohmann::json config;
  std::string version = kVersion;

  std::string csv() const;
  nlohmann::json meta() const;
  /// Count of n_grid steps where coordmax_debiased fails to strictly decrease.
  int inversions() const;
};

/// Least-squares slope of log(y) on log(x) over the points with y > 0.
std::optional<SlopeFit> fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Independent stream key for replication `rep` at sample size n.
std::uint64_t replication_key(std::uint64_t seed, Eigen::Index n, Eigen::Index rep);

/// One row per n: freeze the design, compute the sandwich at theta0, run the
/// replications, and compare the normalized statistic with N(0, I_p).
/// Throws ConditionsViolated when verify_conditions fails and UnstableExperiment
/// when more than 1% of the replications at some n fail.
RateReport run_rate_study(const ExperimentConfig& config);

/// Normalized statistics (successful replications only) for one n.
struct Replications {
  Matrix statistic;
  Eigen::Index failures = 0;
};
Replications run_replications(const ExperimentConfig& config, Eigen::Index n);

enum class Status { kPass, kFail, kNotApplicable };
std::string status_name(Status s);

struct Diagnostic {
  std::string name;
  Eigen::Index n = 0;
  std::optional<double> value;
  double threshold = 0.0;
  Status status = Status::kNotApplicable;
};

struct ConditionsReport {
  std::vector<Diagnostic> diagnostics;
  bool all_pass() const;
  std::string csv() const;
  nlohmann::json to_json() const;
};

ConditionsReport verify_conditions(const ExperimentConfig& config);
/// Design-level checks for a given logistic design.
std::vector<Diagnostic> logistic_diagnostics(const logistic::LogisticDesign& design, const ConditionsBlock& thresholds);

struct QuadformRow {
  Eigen::Index n = 0;
  double bound_trace = 0.0;
  double bound_chaos = 0.0;
  double mc_w1 = 0.0;     // exact pair distance of sqrt(n) grad M_n(theta0) vs N(0, C)
  double mc_floor = 0.0;  // same estimator between two N(0, C) samples
  int draws = 0;
};

struct BonisRow {
  Eigen::Index n = 0;
  int p = 0;
  double beta = 0.0;
  double c0 = 0.0;
  double bound = 0.0;
};

struct BoundReport {
  std::vector<QuadformRow> quadform;
  std::vector<BonisRow> bonis;
  std::string quadform_csv() const;
  std::string bonis_csv() const;
  nlohmann::json to_json() const;
};

BoundReport run_bound_eval(const ExperimentConfig& config);

/// Quadratic-form bound and Monte Carlo W1 for the CV gradient on a given design.
QuadformRow quadform_row(const gp::KernelFamily& family, const Vector& theta0, const gp::PointSet& points, int draws,
                         std::uint64_t seed);

}  // namespace mest::harness
