// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mest/error.hpp"
#include "mest/gp_cv.hpp"
#include "mest/harness.hpp"
#include "mest/linalg.hpp"
#include "mest/logistic.hpp"
#include "mest/random.hpp"
#include "mest/wasserstein.hpp"
#include "oracles.hpp"

using namespace mest;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

harness::ExperimentConfig config_file(const std::string& name) {
  return harness::ExperimentConfig::load(std::string(MEST_SOURCE_DIR) + "/configs/" + name);
}

std::string rows_summary(const harness::RateReport& r) {
  std::string s;
  for (const auto& row : r.rows) s += " n=" + std::to_string(row.n) + ":" + num(row.coordmax_debiased, 4);
  return s;
}

Outcome logistic_rate() {
  const harness::ExperimentConfig c = config_file("logistic_rate.json");
  const harness::ConditionsReport cond = harness::verify_conditions(c);
  const harness::RateReport r = harness::run_rate_study(c);
  if (!r.fit) return {false, "slope unavailable;" + rows_summary(r)};
  const double slope = r.fit->slope;
  const int inv = r.inversions();
  const bool ok = cond.all_pass() && slope >= -0.65 && slope <= -0.35 && inv <= 1;
  return {ok, "slope " + num(slope, 4) + " (se " + num(r.fit->se, 3) + "), inversions " + std::to_string(inv) +
                  ", conditions " + (cond.all_pass() ? "pass" : "fail") + ";" + rows_summary(r)};
}

Outcome gp_rate() {
  const harness::ExperimentConfig c = config_file("gp_cv_rate.json");
  const harness::RateReport r = harness::run_rate_study(c);
  if (!r.fit) return {false, "slope unavailable;" + rows_summary(r)};
  const double slope = r.fit->slope;
  return {slope >= -0.75 && slope <= -0.25,
          "slope " + num(slope, 4) + " (se " + num(r.fit->se, 3) + ");" + rows_summary(r)};
}

Outcome gradient_oracles() {
  double worst_logistic = 0.0, worst_cv = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index n = 20 + 4 * static_cast<Eigen::Index>(seed);
    const int p = 1 + static_cast<int>(seed % 3);
    Vector theta0 = Vector::LinSpaced(p, 0.5, -0.5);
    auto design = std::make_shared<const logistic::LogisticDesign>(
        logistic::uniform_design(n, theta0, seed, 1.0, 0.0));
    const logistic::LogisticData data = logistic::sample_outcomes(design, seed + 1000);
    const Vector theta = theta0.array() + 0.7;
    const Vector g = logistic::objective(data, theta).gradient;
    const Vector fd =
        oracle::fd_gradient([&](const Vector& t) { return logistic::objective(data, t).value; }, theta, 1e-6);
    worst_logistic = std::max(worst_logistic, (g - fd).norm() / fd.norm());
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index n = 10 + 4 * static_cast<Eigen::Index>(seed);
    const int d = seed % 2 == 0 ? 1 : 2;
    const gp::KernelFamily fam = seed % 4 < 2 ? gp::KernelFamily::exponential(d)
                                              : gp::KernelFamily::powered_exponential(d);
    const Vector theta0 = fam.p() == 1 ? Vector::Constant(1, 1.0) : (Vector(2) << 1.0, 1.0).finished();
    const gp::PointSet pts = gp::build_points(n, d, 1.0, 0.2, seed);
    const Vector y = gp::sample_field(gp::build_corr(fam, theta0, pts), seed + 2000);
    const Vector theta = fam.p() == 1 ? Vector::Constant(1, 1.4) : (Vector(2) << 1.4, 0.8).finished();
    const Vector g = gp::cv_gradient(gp::build_corr(fam, theta, pts), y).gradient;
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& t) { return gp::cv_objective(gp::build_corr(fam, t, pts), y); }, theta, 1e-6);
    worst_cv = std::max(worst_cv, (g - fd).norm() / fd.norm());
  }
  return {worst_logistic <= 1e-5 && worst_cv <= 1e-5,
          "worst relative error logistic " + num(worst_logistic, 3) + ", cv " + num(worst_cv, 3)};
}

Outcome loo_identity() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index n = 10 + 10 * static_cast<Eigen::Index>(seed);
    const int d = seed % 2 == 0 ? 1 : 2;
    const gp::KernelFamily fam = seed % 3 == 0 ? gp::KernelFamily::powered_exponential(d)
                                               : gp::KernelFamily::exponential(d);
    const Vector theta = fam.p() == 1 ? Vector::Constant(1, 0.7) : (Vector(2) << 0.7, 1.2).finished();
    const gp::CorrMatrices c = gp::build_corr(fam, theta, gp::build_points(n, d, 1.0, 0.2, seed));
    const Vector y = gp::sample_field(c, seed + 3000);
    const double direct = oracle::loo_direct(c.r, y);
    worst = std::max(worst, std::fabs(gp::cv_objective(c, y) - direct) / direct);
  }
  return {worst <= 1e-8, "worst relative difference " + num(worst, 3) + " over n = 10..200"};
}

Outcome trace_identity() {
  double worst = 0.0;
  for (Eigen::Index n : {10, 50, 200}) {
    const gp::PointSet pts = gp::build_points(n, 1, 1.0, 0.2, 1);
    for (const auto& [fam, theta] :
         {std::pair{gp::KernelFamily::exponential(1), Vector(Vector::Constant(1, 1.0))},
          std::pair{gp::KernelFamily::powered_exponential(1), (Vector(2) << 1.0, 1.2).finished()}}) {
      const gp::CorrMatrices c = gp::build_corr(fam, theta, pts);
      const Vector t = gp::expected_gradient_traces(c, gp::gradient_matrices(c));
      worst = std::max(worst, t.cwiseAbs().maxCoeff() / static_cast<double>(n));
    }
  }
  return {worst <= 1e-8, "max |Tr(R B_j)| / n = " + num(worst, 3)};
}

Outcome quadform_covariance() {
  const gp::KernelFamily fam = gp::KernelFamily::exponential(1);
  const Vector theta0 = Vector::Constant(1, 1.0);
  const gp::PointSet pts = gp::build_points(20, 1, 1.0, 0.2, 1);
  const SandwichPair sp = gp::cv_sandwich_at_truth(fam, theta0, pts);
  const gp::CorrMatrices c = gp::build_corr(fam, theta0, pts);
  const int draws = 100000;
  Matrix scores(draws, 1);
  for (int r = 0; r < draws; ++r) {
    Vector g;
    gp::cv_value_and_gradient(c, gp::sample_field(c, 6, static_cast<std::uint64_t>(r)), g);
    scores.row(r) = std::sqrt(20.0) * g.transpose();
  }
  const Matrix mc = oracle::sample_covariance(scores);
  const double rel = oracle::rel_frobenius(mc, sp.c_bar);
  return {rel <= 0.05, "trace formula " + num(sp.c_bar(0, 0)) + ", Monte Carlo " + num(mc(0, 0)) +
                           ", relative Frobenius " + num(rel, 3)};
}

Outcome quadform_bound() {
  const gp::PointSet pts = gp::build_points(20, 1, 1.0, 0.2, 1);
  const harness::QuadformRow row =
      harness::quadform_row(gp::KernelFamily::exponential(1), Vector::Constant(1, 1.0), pts, 10000, 7);
  return {row.mc_w1 <= row.bound_chaos, "MC W1 " + num(row.mc_w1, 4) + " (reference floor " +
                                            num(row.mc_floor, 4) + "), bound chaos " + num(row.bound_chaos, 4) +
                                            ", bound trace-convention " + num(row.bound_trace, 4)};
}

Outcome w1_calibration() {
  auto rng = CounterRng::keyed({8, 8});
  const Vector shifted = rng.normal_vector(100000).array() + 0.5;
  const double v = w1::w1_1d_vs_gaussian(shifted).value;
  const bool shift_ok = std::fabs(v - 0.5) <= 0.02;

  std::mt19937_64 gen(88);
  double worst_sorted = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Matrix a = oracle::random_matrix(20 + t, 1, gen);
    const Matrix b = oracle::random_matrix(20 + t, 1, gen, 1.5);
    worst_sorted = std::max(worst_sorted, std::fabs(w1::w1_assignment(a, b) - w1::w1_sorted(a.col(0), b.col(0))));
  }
  double worst_excess = -1e300;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index p = 2 + t % 2;
    const Matrix a = oracle::random_matrix(40, p, gen);
    const Matrix b = oracle::random_matrix(40, p, gen, 1.3);
    const Matrix l = oracle::random_matrix(p, p, gen);
    const double lhs = w1::w1_exact_pair(w1::EmpiricalSample::make(a * l.transpose()),
                                         w1::EmpiricalSample::make(b * l.transpose()))
                           .value;
    const double rhs =
        spectral_norm(l) * w1::w1_exact_pair(w1::EmpiricalSample::make(a), w1::EmpiricalSample::make(b)).value;
    worst_excess = std::max(worst_excess, lhs - rhs);
  }
  const bool ok = shift_ok && worst_sorted <= 1e-12 && worst_excess <= 1e-9;
  return {ok, "shift estimate " + num(v, 5) + ", assignment vs sorted " + num(worst_sorted, 3) +
                  ", worst contraction excess " + num(worst_excess, 3)};
}

Outcome planted_rate() {
  const harness::RateReport planted = harness::run_rate_study(config_file("synthetic_planted.json"));
  const harness::RateReport null = harness::run_rate_study(config_file("synthetic_null.json"));
  double worst_null = 0.0;
  for (const auto& row : null.rows) worst_null = std::max(worst_null, row.coordmax_debiased);
  const bool slope_ok = planted.fit && std::fabs(planted.fit->slope + 0.5) <= 0.1;
  return {slope_ok && worst_null <= 0.005,
          "planted slope " + (planted.fit ? num(planted.fit->slope, 4) : std::string("unavailable")) +
              ", null max debiased " + num(worst_null, 3) + ";" + rows_summary(planted)};
}

Outcome determinism() {
  harness::ExperimentConfig c = config_file("logistic_rate.json");
  c.workers = 1;
  const std::string one = harness::run_rate_study(c).csv();
  c.workers = 4;
  const std::string four = harness::run_rate_study(c).csv();
  return {one == four, one == four ? "CSV bodies identical for 1 and 4 workers" : "CSV bodies differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"logistic rate", logistic_rate},
      {"gp-cv rate", gp_rate},
      {"gradient oracles", gradient_oracles},
      {"leave-one-out identity", loo_identity},
      {"expected-gradient trace identity", trace_identity},
      {"quadratic-form covariance", quadform_covariance},
      {"quadratic-form W1 bound", quadform_bound},
      {"W1 estimator calibration", w1_calibration},
      {"planted-rate null check", planted_rate},
      {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %s: %s -- %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
