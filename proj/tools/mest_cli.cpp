#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mest/error.hpp"
#include "mest/harness.hpp"

namespace fs = std::filesystem;
using namespace mest;
using namespace mest::harness;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConditions = 2, kUnstable = 3, kConfig = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out;
  std::string format = "csv";
};

ExperimentConfig load_config(const Options& o) {
  ExperimentConfig c = ExperimentConfig::load(o.config);
  if (o.seed || o.workers) {
    nlohmann::json j = c.to_json();
    if (o.seed) j["seed"] = *o.seed;
    if (o.workers) j["workers"] = *o.workers;
    c = ExperimentConfig::from_json(j);
  }
  return c;
}

void emit(const Options& o, const std::string& file, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  fs::create_directories(o.out);
  const fs::path path = fs::path(o.out) / file;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  std::cerr << "wrote " << path.string() << '\n';
}

int rate_study(const Options& o) {
  const ExperimentConfig c = load_config(o);
  const RateReport r = run_rate_study(c);
  if (o.format == "json") {
    nlohmann::json j = r.meta();
    nlohmann::json rows = nlohmann::json::array();
    for (const RateRow& row : r.rows) {
      rows.push_back({{"n", static_cast<long long>(row.n)},
                      {"R", static_cast<long long>(row.replications)},
                      {"failures", static_cast<long long>(row.failures)},
                      {"w1_coordmax_raw", row.coordmax_raw},
                      {"w1_coordmax_floor", row.coordmax_floor},
                      {"w1_coordmax_debiased", row.coordmax_debiased},
                      {"w1_sliced_raw", row.sliced_raw},
                      {"w1_sliced_floor", row.sliced_floor},
                      {"w1_sliced_debiased", row.sliced_debiased}});
    }
    j["rows"] = rows;
    emit(o, c.name + ".json", j.dump(2) + "\n");
  } else {
    emit(o, c.name + ".csv", r.csv());
    if (!o.out.empty()) emit(o, c.name + ".meta.json", r.meta().dump(2) + "\n");
  }
  if (r.fit) {
    std::cerr << "slope " << r.fit->slope << " (se " << r.fit->se << ", " << r.fit->points << " points)\n";
  } else {
    std::cerr << "slope unavailable\n";
  }
  return kOk;
}

int bound_eval(const Options& o) {
  const ExperimentConfig c = load_config(o);
  const BoundReport r = run_bound_eval(c);
  if (o.format == "json") {
    emit(o, c.name + ".bounds.json", r.to_json().dump(2) + "\n");
  } else {
    if (!r.quadform.empty()) emit(o, c.name + ".quadform.csv", r.quadform_csv());
    if (!r.bonis.empty()) emit(o, c.name + ".bonis.csv", r.bonis_csv());
  }
  return kOk;
}

int verify(const Options& o) {
  const ExperimentConfig c = load_config(o);
  const ConditionsReport r = verify_conditions(c);
  if (o.format == "json") {
    emit(o, c.name + ".conditions.json", r.to_json().dump(2) + "\n");
  } else {
    emit(o, c.name + ".conditions.csv", r.csv());
  }
  return r.all_pass() ? kOk : kConditions;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"M-estimator normal approximation experiments"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--out", o.out, "output directory (default: stdout)");
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  };
  CLI::App* rate = app.add_subcommand("rate-study", "Monte Carlo W1 rate study");
  CLI::App* bound = app.add_subcommand("bound-eval", "explicit Wasserstein bounds vs Monte Carlo");
  CLI::App* cond = app.add_subcommand("verify-conditions", "numeric condition diagnostics");
  add_common(rate);
  add_common(bound);
  add_common(cond);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (rate->parsed()) return rate_study(o);
    if (bound->parsed()) return bound_eval(o);
    if (cond->parsed()) return verify(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ConditionsViolated& e) {
    std::cerr << "conditions violated: " << e.what() << '\n';
    return kConditions;
  } catch (const UnstableExperiment& e) {
    std::cerr << "unstable experiment: " << e.what() << '\n';
    return kUnstable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
