#include "mest/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mest/error.hpp"
#include "mest/random.hpp"
#include "mest/wasserstein.hpp"

namespace mest::harness {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Run body(i) for i in [0, count) on `workers` threads; results must be written by index.
void parallel_for(Eigen::Index count, unsigned workers, const std::function<void(Eigen::Index)>& body) {
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<Eigen::Index>(count, 1))));
  if (w == 1) {
    for (Eigen::Index i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<Eigen::Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const Eigen::Index i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ParamBox logistic_box(const ExperimentConfig& c) {
  return ParamBox::around(to_vector(c.logistic.theta0), c.logistic.box_half_width, c.logistic.interior_margin);
}

ParamBox gp_box(const ExperimentConfig& c) {
  return ParamBox::make(to_vector(c.gp.box_lower), to_vector(c.gp.box_upper), c.gp.interior_margin);
}

gp::KernelFamily gp_family(const ExperimentConfig& c) { return gp::KernelFamily::parse(c.gp.kernel, c.gp.d); }

logistic::LogisticDesign logistic_design(const ExperimentConfig& c, Eigen::Index n) {
  return logistic::uniform_design(n, to_vector(c.logistic.theta0), c.seed, c.logistic.half_width, c.conditions.c_x2);
}

gp::PointSet gp_points(const ExperimentConfig& c, Eigen::Index n) {
  return gp::build_points(n, c.gp.d, c.gp.spacing, c.gp.jitter, c.seed);
}

std::vector<Vector> make_starts(const ExperimentConfig& c, const ParamBox& box, Eigen::Index n, Eigen::Index rep) {
  std::vector<Vector> starts{box.center()};
  for (int s = 1; s < c.minimizer.n_starts; ++s) {
    auto rng = CounterRng::keyed(Stream::kStarts, {c.seed, static_cast<std::uint64_t>(n),
                                                   static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(s)});
    Vector x(box.dim());
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = rng.uniform(box.lower[k], box.upper[k]);
    starts.push_back(x);
  }
  return starts;
}

MinimizerConfig minimizer_config(const ExperimentConfig& c) {
  MinimizerConfig m;
  m.gradient_tolerance = c.minimizer.gradient_tolerance;
  m.stall_tolerance = c.minimizer.stall_tolerance;
  m.max_iterations = c.minimizer.max_iterations;
  return m;
}

Diagnostic check_at_least(std::string name, Eigen::Index n, std::optional<double> value, double threshold) {
  Diagnostic d{std::move(name), n, value, threshold, Status::kNotApplicable};
  if (value) d.status = *value >= threshold ? Status::kPass : Status::kFail;
  return d;
}

}  // namespace

std::string model_name(ModelKind m) {
  switch (m) {
    case ModelKind::kLogistic:
      return "logistic";
    case ModelKind::kGpCv:
      return "gp-cv";
    case ModelKind::kSynthetic:
      return "synthetic";
  }
  return "unknown";
}

int ExperimentConfig::p() const {
  switch (model) {
    case ModelKind::kLogistic:
      return logistic.p;
    case ModelKind::kGpCv:
      return gp::KernelFamily::parse(gp.kernel, gp.d).p();
    case ModelKind::kSynthetic:
      return synthetic.p;
  }
  return 0;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  check_keys(j, "config",
             {"name", "model", "n_grid", "replications", "seed", "workers", "logistic", "gp_cv", "synthetic",
              "minimizer", "w1", "conditions", "bounds"});
  ExperimentConfig c;
  read(j, "name", c.name, "config");
  std::string model;
  read(j, "model", model, "config");
  if (model == "logistic") {
    c.model = ModelKind::kLogistic;
  } else if (model == "gp-cv") {
    c.model = ModelKind::kGpCv;
  } else if (model == "synthetic") {
    c.model = ModelKind::kSynthetic;
  } else {
    throw ConfigError("config.model: expected logistic, gp-cv or synthetic, got '" + model + "'");
  }
  std::vector<long long> grid;
  read(j, "n_grid", grid, "config");
  for (long long n : grid) c.n_grid.push_back(static_cast<Eigen::Index>(n));
  long long reps = 0;
  read(j, "replications", reps, "config");
  c.replications = static_cast<Eigen::Index>(reps);
  read(j, "seed", c.seed, "config");
  read(j, "workers", c.workers, "config");

  if (j.contains("logistic")) {
    const json& b = j.at("logistic");
    check_keys(b, "logistic", {"p", "theta0", "half_width", "box_half_width", "interior_margin"});
    read(b, "p", c.logistic.p, "logistic");
    read(b, "theta0", c.logistic.theta0, "logistic");
    read(b, "half_width", c.logistic.half_width, "logistic");
    read(b, "box_half_width", c.logistic.box_half_width, "logistic");
    read(b, "interior_margin", c.logistic.interior_margin, "logistic");
  }
  if (j.contains("gp_cv")) {
    const json& b = j.at("gp_cv");
    check_keys(b, "gp_cv", {"kernel", "theta0", "d", "spacing", "jitter", "box_lower", "box_upper", "interior_margin"});
    read(b, "kernel", c.gp.kernel, "gp_cv");
    read(b, "theta0", c.gp.theta0, "gp_cv");
    read(b, "d", c.gp.d, "gp_cv");
    read(b, "spacing", c.gp.spacing, "gp_cv");
    read(b, "jitter", c.gp.jitter, "gp_cv");
    read(b, "box_lower", c.gp.box_lower, "gp_cv");
    read(b, "box_upper", c.gp.box_upper, "gp_cv");
    read(b, "interior_margin", c.gp.interior_margin, "gp_cv");
  }
  if (j.contains("synthetic")) {
    const json& b = j.at("synthetic");
    check_keys(b, "synthetic", {"p", "shift"});
    read(b, "p", c.synthetic.p, "synthetic");
    read(b, "shift", c.synthetic.shift, "synthetic");
  }
  if (j.contains("minimizer")) {
    const json& b = j.at("minimizer");
    check_keys(b, "minimizer", {"n_starts", "gradient_tolerance", "stall_tolerance", "max_iterations"});
    read(b, "n_starts", c.minimizer.n_starts, "minimizer");
    read(b, "gradient_tolerance", c.minimizer.gradient_tolerance, "minimizer");
    read(b, "stall_tolerance", c.minimizer.stall_tolerance, "minimizer");
    read(b, "max_iterations", c.minimizer.max_iterations, "minimizer");
  }
  if (j.contains("w1")) {
    const json& b = j.at("w1");
    check_keys(b, "w1", {"n_slices", "floor_replicates"});
    read(b, "n_slices", c.w1.n_slices, "w1");
    read(b, "floor_replicates", c.w1.floor_replicates, "w1");
  }
  if (j.contains("conditions")) {
    const json& b = j.at("conditions");
    check_keys(b, "conditions", {"c_x2", "c_x", "c_r1", "c_h", "c_c", "theta_grid"});
    read(b, "c_x2", c.conditions.c_x2, "conditions");
    read(b, "c_x", c.conditions.c_x, "conditions");
    read(b, "c_r1", c.conditions.c_r1, "conditions");
    read(b, "c_h", c.conditions.c_h, "conditions");
    read(b, "c_c", c.conditions.c_c, "conditions");
    read(b, "theta_grid", c.conditions.theta_grid, "conditions");
  }
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    check_keys(b, "bounds", {"c0", "mc_draws", "beta"});
    read(b, "c0", c.bounds.c0, "bounds");
    read(b, "mc_draws", c.bounds.mc_draws, "bounds");
    read(b, "beta", c.bounds.beta, "bounds");
  }

  if (c.n_grid.size() < 2) throw ConfigError("config.n_grid: need at least two sample sizes");
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] < 1) throw ConfigError("config.n_grid: sample sizes must be positive");
    if (i > 0 && c.n_grid[i] <= c.n_grid[i - 1]) throw ConfigError("config.n_grid: must be strictly increasing");
  }
  if (c.replications < 100) throw ConfigError("config.replications: need at least 100");
  if (c.workers < 1) throw ConfigError("config.workers: need at least 1");
  if (c.minimizer.n_starts < 1) throw ConfigError("minimizer.n_starts: need at least 1");
  if (c.w1.n_slices < 1 || c.w1.floor_replicates < 1) throw ConfigError("w1: counts must be positive");
  if (c.conditions.theta_grid < 2) throw ConfigError("conditions.theta_grid: need at least 2 points");
  if (c.bounds.mc_draws < 2) throw ConfigError("bounds.mc_draws: need at least 2");
  try {
    switch (c.model) {
      case ModelKind::kLogistic:
        if (c.logistic.p < 1 || static_cast<int>(c.logistic.theta0.size()) != c.logistic.p) {
          throw ConfigError("logistic: theta0 must have p entries");
        }
        if (!(c.logistic.half_width > 0.0)) throw ConfigError("logistic.half_width must be positive");
        if (!logistic_box(c).margin_fits(to_vector(c.logistic.theta0))) {
          throw ConfigError("logistic: the interior margin does not fit in the parameter box");
        }
        break;
      case ModelKind::kGpCv: {
        const gp::KernelFamily fam = gp_family(c);
        const Vector theta0 = to_vector(c.gp.theta0);
        if (!fam.valid(theta0)) throw ConfigError("gp_cv.theta0 is not admissible for " + fam.name());
        const ParamBox box = gp_box(c);
        if (box.dim() != fam.p()) throw ConfigError("gp_cv: box dimension differs from the kernel parameter count");
        if (!fam.valid(box.lower) || !fam.valid(box.upper)) {
          throw ConfigError("gp_cv: parameter box leaves the admissible region");
        }
        if (!box.margin_fits(theta0)) throw ConfigError("gp_cv: the interior margin does not fit in the box");
        if (!(c.gp.jitter >= 0.0 && c.gp.jitter < 0.5) || !(c.gp.spacing > 0.0)) {
          throw ConfigError("gp_cv: need spacing > 0 and jitter in [0, 0.5)");
        }
        break;
      }
      case ModelKind::kSynthetic:
        if (c.synthetic.p < 1) throw ConfigError("synthetic.p must be positive");
        break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  std::vector<long long> grid(n_grid.begin(), n_grid.end());
  return json{
      {"name", name},
      {"model", model_name(model)},
      {"n_grid", grid},
      {"replications", static_cast<long long>(replications)},
      {"seed", seed},
      {"workers", workers},
      {"logistic",
       {{"p", logistic.p},
        {"theta0", logistic.theta0},
        {"half_width", logistic.half_width},
        {"box_half_width", logistic.box_half_width},
        {"interior_margin", logistic.interior_margin}}},
      {"gp_cv",
       {{"kernel", gp.kernel},
        {"theta0", gp.theta0},
        {"d", gp.d},
        {"spacing", gp.spacing},
        {"jitter", gp.jitter},
        {"box_lower", gp.box_lower},
        {"box_upper", gp.box_upper},
        {"interior_margin", gp.interior_margin}}},
      {"synthetic", {{"p", synthetic.p}, {"shift", synthetic.shift}}},
      {"minimizer",
       {{"n_starts", minimizer.n_starts},
        {"gradient_tolerance", minimizer.gradient_tolerance},
        {"stall_tolerance", minimizer.stall_tolerance},
        {"max_iterations", minimizer.max_iterations}}},
      {"w1", {{"n_slices", w1.n_slices}, {"floor_replicates", w1.floor_replicates}}},
      {"conditions",
       {{"c_x2", conditions.c_x2},
        {"c_x", conditions.c_x},
        {"c_r1", conditions.c_r1},
        {"c_h", conditions.c_h},
        {"c_c", conditions.c_c},
        {"theta_grid", conditions.theta_grid}}},
      {"bounds", {{"c0", bounds.c0}, {"mc_draws", bounds.mc_draws}, {"beta", bounds.beta}}},
  };
}

std::optional<SlopeFit> fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("fit_log_slope: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] > 0.0 && x[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  const auto m = static_cast<int>(lx.size());
  if (m < 3) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  SlopeFit fit;
  fit.slope = sxy / sxx;
  const double intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (int i = 0; i < m; ++i) {
    const double r = ly[i] - intercept - fit.slope * lx[i];
    ssr += r * r;
  }
  fit.se = std::sqrt(ssr / (m - 2) / sxx);
  fit.points = m;
  return fit;
}

std::uint64_t replication_key(std::uint64_t seed, Eigen::Index n, Eigen::Index rep) {
  return CounterRng::keyed({seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep)}).next_u64();
}

Replications run_replications(const ExperimentConfig& config, Eigen::Index n) {
  const Eigen::Index reps = config.replications;
  const int p = config.p();
  Matrix stats(reps, p);
  std::vector<char> ok(static_cast<std::size_t>(reps), 0);

  std::function<void(Eigen::Index)> body;
  // Per-n state, frozen before the replications start.
  std::shared_ptr<const logistic::LogisticDesign> design;
  std::optional<gp::PointSet> points;
  std::optional<gp::CorrMatrices> corr0;
  SandwichPair sandwich;
  const MinimizerConfig mcfg = minimizer_config(config);
  const auto nd = static_cast<double>(n);

  switch (config.model) {
    case ModelKind::kLogistic: {
      design = std::make_shared<const logistic::LogisticDesign>(logistic_design(config, n));
      sandwich = logistic::sandwich_at_truth(*design);
      const ParamBox box = logistic_box(config);
      body = [&, box](Eigen::Index rep) {
        const logistic::LogisticData data = logistic::sample_outcomes(design, replication_key(config.seed, n, rep));
        const Objective f = [&data](const Vector& t, Vector& g) { return logistic::value_and_gradient(data, t, g); };
        const EstimRun run = minimize(f, box, make_starts(config, box, n, rep), mcfg);
        if (!run.converged) return;
        stats.row(rep) = normalize_statistic(run.theta_hat, design->theta0, nd, sandwich).transpose();
        ok[static_cast<std::size_t>(rep)] = 1;
      };
      break;
    }
    case ModelKind::kGpCv: {
      const gp::KernelFamily fam = gp_family(config);
      const Vector theta0 = to_vector(config.gp.theta0);
      points = gp_points(config, n);
      corr0 = gp::build_corr(fam, theta0, *points, {.spectrum = false, .derivatives = false});
      sandwich = gp::cv_sandwich_at_truth(fam, theta0, *points);
      const ParamBox box = gp_box(config);
      body = [&, fam, theta0, box](Eigen::Index rep) {
        const Vector y = gp::sample_field(*corr0, replication_key(config.seed, n, rep));
        const Objective f = [&](const Vector& t, Vector& g) {
          try {
            const gp::CorrMatrices c = gp::build_corr(fam, t, *points, {.spectrum = false, .derivatives = true});
            return gp::cv_value_and_gradient(c, y, g);
          } catch (const NotPD&) {
            return std::numeric_limits<double>::infinity();
          }
        };
        const EstimRun run = minimize(f, box, make_starts(config, box, n, rep), mcfg);
        if (!run.converged) return;
        stats.row(rep) = normalize_statistic(run.theta_hat, theta0, nd, sandwich).transpose();
        ok[static_cast<std::size_t>(rep)] = 1;
      };
      break;
    }
    case ModelKind::kSynthetic: {
      const double shift = config.synthetic.shift / std::sqrt(nd);
      body = [&, shift](Eigen::Index rep) {
        auto rng = CounterRng::keyed(Stream::kSynthetic, {replication_key(config.seed, n, rep)});
        stats.row(rep) = (rng.normal_vector(p).array() + shift).matrix().transpose();
        ok[static_cast<std::size_t>(rep)] = 1;
      };
      break;
    }
  }

  parallel_for(reps, config.workers, [&](Eigen::Index rep) {
    try {
      body(rep);
    } catch (const Error&) {
      ok[static_cast<std::size_t>(rep)] = 0;
    }
  });

  Replications out;
  const auto good = static_cast<Eigen::Index>(std::count(ok.begin(), ok.end(), 1));
  out.failures = reps - good;
  out.statistic.resize(good, p);
  for (Eigen::Index i = 0, k = 0; i < reps; ++i) {
    if (ok[static_cast<std::size_t>(i)]) out.statistic.row(k++) = stats.row(i);
  }
  return out;
}

RateReport run_rate_study(const ExperimentConfig& config) {
  if (config.model != ModelKind::kSynthetic) {
    const ConditionsReport cond = verify_conditions(config);
    if (!cond.all_pass()) {
      std::string detail;
      for (const Diagnostic& d : cond.diagnostics) {
        if (d.status == Status::kFail) {
          detail += " " + d.name + "(n=" + std::to_string(d.n) + ")=" + (d.value ? fmt(*d.value) : "NA") + " < " +
                    fmt(d.threshold) + ";";
        }
      }
      throw ConditionsViolated("rate study aborted, conditions failed:" + detail);
    }
  }

  RateReport report;
  report.config = config.to_json();
  for (Eigen::Index n : config.n_grid) {
    const Replications reps = run_replications(config, n);
    if (static_cast<double>(reps.failures) > 0.01 * static_cast<double>(config.replications)) {
      throw UnstableExperiment("rate study aborted: " + std::to_string(reps.failures) + " of " +
                               std::to_string(config.replications) + " replications failed at n = " +
                               std::to_string(n));
    }
    const w1::EmpiricalSample sample = w1::EmpiricalSample::make(reps.statistic, "n=" + std::to_string(n));
    const Eigen::Index r = sample.replications();
    const double floor = w1::gaussian_floor(r, config.w1.floor_replicates);

    RateRow row;
    row.n = n;
    row.replications = r;
    row.failures = reps.failures;
    row.coordmax_raw = 0.0;
    for (Eigen::Index k = 0; k < sample.dim(); ++k) {
      row.coordmax_raw = std::max(row.coordmax_raw, w1::w1_to_quantile_grid(sample.data.col(k)));
    }
    row.coordmax_floor = floor;
    row.coordmax_debiased = std::max(row.coordmax_raw - floor, 0.0);

    const std::uint64_t slice_seed =
        CounterRng::keyed(Stream::kSlices, {config.seed, static_cast<std::uint64_t>(n)}).next_u64();
    w1::W1Estimate sliced = w1::w1_sliced_vs_gaussian(sample, config.w1.n_slices, slice_seed);
    sliced.floor = floor;
    row.sliced_raw = sliced.value;
    row.sliced_floor = floor;
    row.sliced_debiased = w1::debias(sliced);
    report.rows.push_back(row);
  }

  std::vector<double> xs, ys;
  for (const RateRow& row : report.rows) {
    xs.push_back(static_cast<double>(row.n));
    ys.push_back(row.coordmax_debiased);
  }
  report.fit = fit_log_slope(xs, ys);
  return report;
}

std::string RateReport::csv() const {
  std::ostringstream out;
  out << "n,R,failures,w1_coordmax_raw,w1_coordmax_floor,w1_coordmax_debiased,w1_sliced_raw,w1_sliced_floor,"
         "w1_sliced_debiased\n";
  for (const RateRow& r : rows) {
    out << r.n << ',' << r.replications << ',' << r.failures << ',' << fmt(r.coordmax_raw) << ','
        << fmt(r.coordmax_floor) << ',' << fmt(r.coordmax_debiased) << ',' << fmt(r.sliced_raw) << ','
        << fmt(r.sliced_floor) << ',' << fmt(r.sliced_debiased) << '\n';
  }
  return out.str();
}

json RateReport::meta() const {
  json j;
  if (fit) {
    j["slope"] = fit->slope;
    j["slope_se"] = fit->se;
    j["slope_points"] = fit->points;
  } else {
    j["slope"] = nullptr;
    j["slope_se"] = nullptr;
    j["slope_status"] = "unavailable";
  }
  j["inversions"] = inversions();
  j["config"] = config;
  j["version"] = version;
  return j;
}

int RateReport::inversions() const {
  int count = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].coordmax_debiased < rows[i - 1].coordmax_debiased)) ++count;
  }
  return count;
}

std::string status_name(Status s) {
  switch (s) {
    case Status::kPass:
      return "pass";
    case Status::kFail:
      return "fail";
    case Status::kNotApplicable:
      return "N/A";
  }
  return "?";
}

bool ConditionsReport::all_pass() const {
  return std::none_of(diagnostics.begin(), diagnostics.end(),
                      [](const Diagnostic& d) { return d.status == Status::kFail; });
}

std::string ConditionsReport::csv() const {
  std::ostringstream out;
  out << "n,diagnostic,value,threshold,status\n";
  for (const Diagnostic& d : diagnostics) {
    out << d.n << ',' << d.name << ',' << (d.value ? fmt(*d.value) : "NA") << ',' << fmt(d.threshold) << ','
        << status_name(d.status) << '\n';
  }
  return out.str();
}

json ConditionsReport::to_json() const {
  json rows = json::array();
  for (const Diagnostic& d : diagnostics) {
    rows.push_back({{"n", static_cast<long long>(d.n)},
                    {"diagnostic", d.name},
                    {"value", d.value ? json(*d.value) : json(nullptr)},
                    {"threshold", d.threshold},
                    {"status", status_name(d.status)}});
  }
  return json{{"diagnostics", rows}, {"all_pass", all_pass()}, {"version", kVersion}};
}

std::vector<Diagnostic> logistic_diagnostics(const logistic::LogisticDesign& design, const ConditionsBlock& t) {
  const Eigen::Index n = design.n();
  std::vector<Diagnostic> out;
  out.push_back(check_at_least("design_second_moment_lambda_min", n,
                               logistic::second_moment_min_eigenvalue(design.x), t.c_x2));
  const SandwichPair s = logistic::sandwich_at_truth(design);
  out.push_back(check_at_least("hessian_lambda_min", n, s.lambda_min_h, t.c_h));
  out.push_back(check_at_least("score_covariance_lambda_min", n, s.lambda_min_c, t.c_c));
  return out;
}

ConditionsReport verify_conditions(const ExperimentConfig& config) {
  ConditionsReport report;
  auto& diags = report.diagnostics;
  switch (config.model) {
    case ModelKind::kLogistic: {
      const ParamBox box = logistic_box(config);
      const Vector theta0 = to_vector(config.logistic.theta0);
      for (Eigen::Index n : config.n_grid) {
        std::optional<logistic::LogisticDesign> design;
        try {
          design = logistic_design(config, n);
        } catch (const ConditionsViolated&) {
          // Report the first draw, which did not reach the threshold.
          design = logistic::uniform_design(n, theta0, config.seed, config.logistic.half_width,
                                            -std::numeric_limits<double>::infinity(), 1);
        }
        for (Diagnostic& d : logistic_diagnostics(*design, config.conditions)) diags.push_back(std::move(d));
        diags.push_back(check_at_least("theta0_boundary_distance", n, box.distance_to_boundary(theta0),
                                       box.interior_margin));
      }
      break;
    }
    case ModelKind::kGpCv: {
      const gp::KernelFamily fam = gp_family(config);
      const Vector theta0 = to_vector(config.gp.theta0);
      const ParamBox box = gp_box(config);
      const int g = config.conditions.theta_grid;
      // Tensor grid over the box, g points per dimension.
      std::vector<Vector> grid;
      const int p = fam.p();
      std::vector<int> idx(static_cast<std::size_t>(p), 0);
      for (;;) {
        Vector t(p);
        for (int k = 0; k < p; ++k) {
          t[k] = box.lower[k] + (box.upper[k] - box.lower[k]) * idx[static_cast<std::size_t>(k)] / (g - 1);
        }
        grid.push_back(t);
        int k = 0;
        while (k < p && ++idx[static_cast<std::size_t>(k)] == g) idx[static_cast<std::size_t>(k++)] = 0;
        if (k == p) break;
      }

      for (Eigen::Index n : config.n_grid) {
        const gp::PointSet pts = gp_points(config, n);
        diags.push_back(check_at_least("min_pairwise_distance", n, pts.min_pairwise_distance, config.conditions.c_x));

        double inf_lambda = std::numeric_limits<double>::infinity();
        for (const Vector& t : grid) {
          const Matrix r = gp::build_corr(fam, t, pts, {.spectrum = false, .derivatives = false}).r;
          inf_lambda = std::min(inf_lambda, sym_eigenvalues(r).minCoeff());
        }
        diags.push_back(check_at_least("corr_lambda_min_over_theta_grid", n, inf_lambda, config.conditions.c_r1));

        std::optional<double> lh, lc;
        try {
          const SandwichPair s = gp::cv_sandwich_at_truth(fam, theta0, pts);
          lh = s.lambda_min_h;
          lc = s.lambda_min_c;
        } catch (const Error&) {
          lh = lc = -std::numeric_limits<double>::infinity();
        }
        diags.push_back(check_at_least("hessian_lambda_min", n, lh, config.conditions.c_h));
        diags.push_back(check_at_least("score_covariance_lambda_min", n, lc, config.conditions.c_c));
        diags.push_back(check_at_least("theta0_boundary_distance", n, box.distance_to_boundary(theta0),
                                       box.interior_margin));
      }
      break;
    }
    case ModelKind::kSynthetic:
      break;
  }
  return report;
}

QuadformRow quadform_row(const gp::KernelFamily& family, const Vector& theta0, const gp::PointSet& points, int draws,
                         std::uint64_t seed) {
  const Eigen::Index n = points.n();
  const auto nd = static_cast<double>(n);
  const gp::CorrMatrices corr0 = gp::build_corr(family, theta0, points, {.spectrum = false, .derivatives = true});
  const gp::GradMatrices m = gp::gradient_matrices(corr0);
  std::vector<Matrix> a;
  for (const Matrix& b : m.b_sym) a.push_back(b / std::sqrt(nd));

  QuadformRow row;
  row.n = n;
  row.draws = draws;
  row.bound_trace = gp::quadform_w1_bound(corr0.r, a, gp::CovConvention::kTrace).bound;
  const gp::QuadformBound chaos = gp::quadform_w1_bound(corr0.r, a, gp::CovConvention::kChaos);
  row.bound_chaos = chaos.bound;

  const int p = family.p();
  const Matrix c_half = sym_sqrt(chaos.c);
  Matrix grads(draws, p), ref(draws, p), ref2(draws, p);
  for (int i = 0; i < draws; ++i) {
    const auto ui = static_cast<std::uint64_t>(i);
    Vector g;
    gp::cv_value_and_gradient(corr0, gp::sample_field(corr0, seed, ui), g);
    grads.row(i) = std::sqrt(nd) * g.transpose();
    ref.row(i) = (c_half * CounterRng::keyed(Stream::kReference, {seed, 0, ui}).normal_vector(p)).transpose();
    ref2.row(i) = (c_half * CounterRng::keyed(Stream::kReference, {seed, 1, ui}).normal_vector(p)).transpose();
  }
  const w1::EmpiricalSample sg = w1::EmpiricalSample::make(grads, "gradient");
  const w1::EmpiricalSample sr = w1::EmpiricalSample::make(ref, "reference");
  row.mc_w1 = w1::w1_exact_pair(sg, sr).value;
  row.mc_floor = w1::w1_exact_pair(w1::EmpiricalSample::make(ref2, "reference2"), sr).value;
  return row;
}

BoundReport run_bound_eval(const ExperimentConfig& config) {
  BoundReport report;
  const double c0 = config.bounds.c0;
  for (Eigen::Index n : config.n_grid) {
    const auto nd = static_cast<double>(n);
    if (config.model == ModelKind::kGpCv) {
      report.quadform.push_back(quadform_row(gp_family(config), to_vector(config.gp.theta0), gp_points(config, n),
                                             config.bounds.mc_draws, replication_key(config.seed, n, 0)));
    }
    if (config.model == ModelKind::kLogistic) {
      const logistic::LogisticDesign design = logistic_design(config, n);
      const SandwichPair s = logistic::sandwich_at_truth(design);
      const double beta = logistic::score_fourth_moment(design, s);
      report.bonis.push_back({n, config.logistic.p, beta, c0, bonis_bound(beta, config.logistic.p, nd, c0)});
    }
    for (double beta : config.bounds.beta) {
      report.bonis.push_back({n, config.p(), beta, c0, bonis_bound(beta, config.p(), nd, c0)});
    }
  }
  return report;
}

std::string BoundReport::quadform_csv() const {
  std::ostringstream out;
  out << "n,draws,bound_trace,bound_chaos,mc_w1,mc_floor\n";
  for (const QuadformRow& r : quadform) {
    out << r.n << ',' << r.draws << ',' << fmt(r.bound_trace) << ',' << fmt(r.bound_chaos) << ',' << fmt(r.mc_w1)
        << ',' << fmt(r.mc_floor) << '\n';
  }
  return out.str();
}

std::string BoundReport::bonis_csv() const {
  std::ostringstream out;
  out << "n,p,beta,c0,bound\n";
  for (const BonisRow& r : bonis) {
    out << r.n << ',' << r.p << ',' << fmt(r.beta) << ',' << fmt(r.c0) << ',' << fmt(r.bound) << '\n';
  }
  return out.str();
}

json BoundReport::to_json() const {
  json q = json::array(), b = json::array();
  for (const QuadformRow& r : quadform) {
    q.push_back({{"n", static_cast<long long>(r.n)},
                 {"draws", r.draws},
                 {"bound_trace", r.bound_trace},
                 {"bound_chaos", r.bound_chaos},
                 {"mc_w1", r.mc_w1},
                 {"mc_floor", r.mc_floor}});
  }
  for (const BonisRow& r : bonis) {
    b.push_back({{"n", static_cast<long long>(r.n)}, {"p", r.p}, {"beta", r.beta}, {"c0", r.c0}, {"bound", r.bound}});
  }
  return json{{"quadform", q}, {"bonis", b}, {"version", kVersion}};
}

}  // namespace mest::harness
