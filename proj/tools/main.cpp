// gcomp: conjugate Bayesian g-computation for binary outcomes.
//
// Exit codes: 0 success, 1 usage error, 2 data/model error,
// 3 calibration failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcomp/approx.hpp"
#include "gcomp/bench.hpp"
#include "gcomp/dataset.hpp"
#include "gcomp/dgp.hpp"
#include "gcomp/errors.hpp"
#include "gcomp/logistic.hpp"
#include "gcomp/parallel.hpp"
#include "gcomp/posterior.hpp"
#include "gcomp/scenario.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using gcomp::DataError;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

// "auto" or a real value.
double resolve(const std::string& text, double auto_value, const char* flag) {
  if (text == "auto") return auto_value;
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw DataError(std::string(flag) + " expects 'auto' or a number, got '" +
                    text + "'");
  }
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct EstimateArgs {
  std::string data_path;
  std::string outcome;
  std::string treatment;
  std::string confounders;  // comma list; empty = all remaining columns
  std::string method = "psm";
  std::string estimand = "att";
  std::string b_text = "auto";
  std::string phi_text = "auto";
  std::string epsilon_text = "auto";
  std::int64_t draws = 10'000;
  std::int64_t r_size = 1'000;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string plot_path;
  bool dichotomize = false;
};

int run_estimate(const EstimateArgs& args) {
  std::string content;
  {
    auto in = open_input(args.data_path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    content = buffer.str();
  }

  std::vector<std::string> confounder_cols = split_csv_list(args.confounders);
  if (confounder_cols.empty()) {
    // Default: every column that is not the outcome or the treatment.
    std::istringstream hs(content);
    std::string header;
    if (!std::getline(hs, header)) throw DataError("CSV input is empty");
    if (header.ends_with("\r")) header.pop_back();
    for (const auto& name : split_csv_list(header)) {
      if (name != args.outcome && name != args.treatment) {
        confounder_cols.push_back(name);
      }
    }
  }

  std::vector<std::string> warnings;
  gcomp::BinaryDataset data = [&] {
    std::istringstream in(content);
    if (args.dichotomize) {
      const gcomp::RawTable table = gcomp::read_raw_table(in);
      const auto spec = gcomp::infer_dichotomize_spec(table, confounder_cols);
      return gcomp::dichotomize(table, spec, args.outcome, args.treatment,
                                confounder_cols, &warnings);
    }
    return gcomp::ingest_csv(in, args.outcome, args.treatment, confounder_cols);
  }();
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  const gcomp::CellTable t = gcomp::tabulate(data);
  const gcomp::Estimand estimand = args.estimand == "ate"
                                       ? gcomp::Estimand::kAte
                                       : gcomp::Estimand::kAtt;

  const double auto_conc = gcomp::default_concentration(data.n(), data.p());
  gcomp::Hyperparams h;
  h.phi = resolve(args.phi_text, auto_conc, "--phi");
  h.epsilon = resolve(args.epsilon_text, auto_conc, "--epsilon");
  h.b = resolve(args.b_text, gcomp::default_b(t), "--b");
  h.validate();

  std::string method = args.method;
  const bool needs_model = method != "bsat";
  gcomp::LogisticModel g;
  if (needs_model) g = gcomp::fit_main_effects(data);

  if ((method == "psm-clt" || method == "psm-random") &&
      t.missing_code_count() == 0) {
    std::cerr << "note: no missing confounder codes; using the full psm"
              << '\n';
    method = "psm";
  }

  const gcomp::GammaPosterior gp =
      gcomp::dirichlet_posterior(t, h.epsilon, estimand);
  gcomp::RandomStream rng(args.seed, 0);

  gcomp::EffectEstimate est;
  if (method == "bsat") {
    est = gcomp::sample_effect(gcomp::bsat_posterior(t, h.phi), gp, args.draws,
                               rng);
  } else if (method == "psm") {
    est = gcomp::sample_effect(gcomp::psm_posterior(t, g, h), gp, args.draws,
                               rng);
  } else if (method == "psm-clt") {
    est = gcomp::sample_effect_clt(gcomp::psm_posterior(t, g, h), gp, t,
                                   args.draws, rng);
  } else if (method == "psm-random") {
    const gcomp::MissingSample ms =
        gcomp::sample_missing_cells(t, args.r_size, h.epsilon, rng.child(0));
    est = gcomp::sample_effect_random(gcomp::psm_posterior(t, g, h), gp, t, ms,
                                      args.draws, rng.child(1));
  } else if (method == "parametric") {
    est.method = "Parametric";
    est.mean = gcomp::parametric_effect(t, g, estimand);
  } else {
    throw DataError("unknown method '" + method + "'");
  }

  const char* estimand_name = estimand == gcomp::Estimand::kAte ? "ATE" : "ATT";
  std::cout << "method:        " << est.method << '\n';
  std::cout << "estimand:      " << estimand_name << '\n';
  std::cout << "n:             " << data.n() << '\n';
  std::cout << "p:             " << data.p() << '\n';
  std::cout << "observed codes: " << t.observed_codes().size() << " of "
            << t.num_codes() << '\n';
  std::cout << "phi:           " << h.phi << '\n';
  std::cout << "epsilon:       " << h.epsilon << '\n';
  if (est.method != "BSAT" && est.method != "Parametric") {
    std::cout << "b:             " << h.b << '\n';
  }
  std::cout << "posterior mean: " << est.mean << '\n';
  std::cout << "posterior sd:   " << est.sd << '\n';
  if (est.closed_form_moments) {
    std::cout << "moments:       closed form" << '\n';
  }
  if (!est.draws.empty()) {
    std::cout << "95% interval:  [" << est.quantile(0.025) << ", "
              << est.quantile(0.975)
              << "]  (credible intervals are uncalibrated)" << '\n';
  } else {
    std::cout << "95% interval:  n/a (point estimate only)" << '\n';
  }
  if (est.clamped_draws > 0) {
    std::cout << "clamped draws: " << est.clamped_draws << " of "
              << est.draws.size() << '\n';
  }

  if (!args.out_path.empty()) {
    auto out = open_output(args.out_path);
    out << "draw,delta\n";
    for (std::size_t i = 0; i < est.draws.size(); ++i) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, est.draws[i]);
      out << buf;
    }
  }
  if (!args.plot_path.empty()) {
    if (est.draws.empty()) {
      throw DataError("--plot requires a sampling method with draws");
    }
    auto out = open_output(args.plot_path);
    gcomp::write_histogram_svg(est.draws, std::nullopt, out);
  }
  return 0;
}

struct SimulateArgs {
  std::string scenario_path;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  std::string out_path;
};

int run_simulate(const SimulateArgs& args) {
  auto in = open_input(args.scenario_path);
  const gcomp::ScenarioFile scenario = gcomp::read_scenario(in);
  if (!scenario.calibrated()) {
    std::cerr << "note: scenario has no lambda values; simulating with "
                 "lambda0 = lambda1 = 0\n";
  }
  const gcomp::DgpSpec spec = gcomp::build_spec(scenario);
  const gcomp::BinaryDataset data =
      gcomp::simulate_dataset(spec, args.n, gcomp::RandomStream(args.seed, 0));
  auto out = open_output(args.out_path);
  gcomp::write_csv(data, out);
  std::cout << "wrote " << data.n() << " rows (p = " << data.p() << ") to "
            << args.out_path << '\n';
  return 0;
}

struct CalibrateArgs {
  std::string scenario_path;
  std::optional<double> delta_t;
  std::optional<double> meb;
  double tolerance = 0.005;
  int restarts = 20;
  std::uint64_t seed = 1;
  std::string out_path;
};

int run_calibrate(const CalibrateArgs& args) {
  auto in = open_input(args.scenario_path);
  gcomp::ScenarioFile scenario = gcomp::read_scenario(in);
  if (args.delta_t) scenario.delta_t = *args.delta_t;
  if (args.meb) scenario.meb = *args.meb;

  gcomp::ScenarioFile base = scenario;
  base.lambda0.reset();
  base.lambda1.reset();
  const gcomp::DgpSpec spec = gcomp::build_spec(base);

  gcomp::CalibrationTarget target;
  target.delta_t = scenario.delta_t;
  target.meb = scenario.meb;
  target.tolerance = args.tolerance;
  target.max_restarts = args.restarts;

  const gcomp::CalibrationResult result =
      gcomp::calibrate(spec, target, gcomp::RandomStream(args.seed, 0));

  scenario.lambda0 = result.lambda0;
  scenario.lambda1 = result.lambda1;
  scenario.achieved_delta_t = result.achieved_delta_t;
  scenario.achieved_meb = result.achieved_meb;

  auto out = open_output(args.out_path);
  gcomp::write_scenario(scenario, out);
  std::cout << "lambda0:          " << result.lambda0 << '\n';
  std::cout << "lambda1:          " << result.lambda1 << '\n';
  std::cout << "achieved delta_t: " << result.achieved_delta_t << '\n';
  std::cout << "achieved meb:     " << result.achieved_meb << '\n';
  std::cout << "restarts used:    " << result.restarts_used << '\n';
  return 0;
}

struct BenchArgs {
  std::string scenario_path;
  std::string methods = "bsat,psm,psm-clt,psm-random,parametric";
  std::string n_grid = "100,1000";
  int replicates = 10;
  std::int64_t draws = 10'000;
  std::int64_t r_size = 1'000;
  std::uint64_t seed = 0;
  std::string b_text = "auto";
  std::string phi_text = "auto";
  std::string epsilon_text = "auto";
  std::string out_path;
  bool summary = false;
};

int run_bench(const BenchArgs& args) {
  auto in = open_input(args.scenario_path);
  const gcomp::ScenarioFile scenario = gcomp::read_scenario(in);
  if (!scenario.calibrated()) {
    throw DataError(
        "scenario has no lambda values; run 'gcomp calibrate' first");
  }

  gcomp::BenchConfig config;
  config.spec = gcomp::build_spec(scenario);
  for (const auto& item : split_csv_list(args.methods)) {
    config.methods.push_back(gcomp::parse_method(item));
  }
  for (const auto& item : split_csv_list(args.n_grid)) {
    config.n_grid.push_back(std::stoll(item));
  }
  config.replicates = args.replicates;
  config.draws = args.draws;
  config.r_size = args.r_size;
  config.master_seed = args.seed;
  if (args.b_text != "auto") config.b_override = resolve(args.b_text, 0, "--b");
  if (args.phi_text != "auto") {
    config.phi_override = resolve(args.phi_text, 0, "--phi");
  }
  if (args.epsilon_text != "auto") {
    config.epsilon_override = resolve(args.epsilon_text, 0, "--epsilon");
  }

  std::vector<std::string> notes;
  const std::vector<gcomp::ResultRow> rows = gcomp::run_scenario(config, &notes);
  for (const auto& n : notes) std::cerr << "note: " << n << '\n';

  if (!args.out_path.empty()) {
    auto out = open_output(args.out_path);
    gcomp::write_rows_csv(rows, out);
  }
  if (args.summary || args.out_path.empty()) {
    const auto table = gcomp::aggregate(rows);
    gcomp::write_summary(table, std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conjugate Bayesian g-computation for binary outcomes"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads,
                 "cap on worker threads (0 = logical cores)");

  EstimateArgs est;
  auto* cmd_est = app.add_subcommand(
      "estimate", "Estimate a treatment effect from a CSV dataset");
  cmd_est->add_option("--data", est.data_path, "input CSV file")->required();
  cmd_est->add_option("--outcome", est.outcome, "outcome column (0/1)")
      ->required();
  cmd_est->add_option("--treatment", est.treatment, "treatment column (0/1)")
      ->required();
  cmd_est->add_option("--confounders", est.confounders,
                      "comma-separated confounder columns (default: all "
                      "remaining columns)");
  cmd_est->add_option("--method", est.method,
                      "bsat | psm | psm-clt | psm-random | parametric")
      ->required();
  cmd_est->add_option("--estimand", est.estimand, "att | ate (default att)");
  cmd_est->add_option("--b", est.b_text,
                      "prior/likelihood split; 'auto' = clamped missing-cell "
                      "proportion");
  cmd_est->add_option("--phi", est.phi_text,
                      "Beta prior concentration; 'auto' = n/2^p");
  cmd_est->add_option("--epsilon", est.epsilon_text,
                      "Dirichlet prior concentration; 'auto' = n/2^p");
  cmd_est->add_option("--draws", est.draws, "posterior draws (default 10000)");
  cmd_est->add_option("--r-size", est.r_size,
                      "missing cells sampled by psm-random (default 1000)");
  cmd_est->add_option("--seed", est.seed, "random seed (default 0)");
  cmd_est->add_option("--out", est.out_path, "write posterior draws CSV here");
  cmd_est->add_option("--plot", est.plot_path, "write an SVG histogram here");
  cmd_est->add_flag("--dichotomize", est.dichotomize,
                    "median-split non-binary confounder columns");

  SimulateArgs sim;
  auto* cmd_sim =
      app.add_subcommand("simulate", "Simulate a dataset from a scenario");
  cmd_sim->add_option("--scenario", sim.scenario_path, "scenario file")
      ->required();
  cmd_sim->add_option("--n", sim.n, "rows to simulate")->required();
  cmd_sim->add_option("--seed", sim.seed, "random seed (default 0)");
  cmd_sim->add_option("--out", sim.out_path, "output CSV path")->required();

  CalibrateArgs cal;
  auto* cmd_cal = app.add_subcommand(
      "calibrate", "Search lambda0/lambda1 for a target effect and bias");
  cmd_cal->add_option("--scenario", cal.scenario_path, "scenario file")
      ->required();
  double cal_delta = 0.0, cal_meb = 0.0;
  auto* opt_delta = cmd_cal->add_option(
      "--delta-t", cal_delta, "target effect (default: scenario delta_t)");
  auto* opt_meb = cmd_cal->add_option(
      "--meb", cal_meb, "target main-effects bias (default: scenario meb)");
  cmd_cal->add_option("--tol", cal.tolerance, "residual tolerance (default 0.005)");
  cmd_cal->add_option("--restarts", cal.restarts,
                      "extra random starts after (0,0) (default 20)");
  cmd_cal->add_option("--seed", cal.seed, "seed for restart points (default 1)");
  cmd_cal->add_option("--out", cal.out_path, "augmented scenario output path")
      ->required();

  BenchArgs bench;
  auto* cmd_bench = app.add_subcommand(
      "bench", "Replicate benchmark over methods and sample sizes");
  cmd_bench->add_option("--scenario", bench.scenario_path,
                        "calibrated scenario file")
      ->required();
  cmd_bench->add_option("--methods", bench.methods,
                        "comma list of methods (default: all)");
  cmd_bench->add_option("--n-grid", bench.n_grid,
                        "comma list of sample sizes (default 100,1000)");
  cmd_bench->add_option("--replicates", bench.replicates,
                        "replicates per sample size (default 10)");
  cmd_bench->add_option("--draws", bench.draws, "posterior draws per fit");
  cmd_bench->add_option("--r-size", bench.r_size,
                        "missing cells sampled by psm-random");
  cmd_bench->add_option("--seed", bench.seed, "master seed (default 0)");
  cmd_bench->add_option("--b", bench.b_text, "override b ('auto' = per dataset)");
  cmd_bench->add_option("--phi", bench.phi_text, "override phi ('auto' = n/2^p)");
  cmd_bench->add_option("--epsilon", bench.epsilon_text,
                        "override epsilon ('auto' = n/2^p)");
  cmd_bench->add_option("--out", bench.out_path, "result rows CSV path");
  cmd_bench->add_flag("--summary", bench.summary,
                      "print the aggregate table to stdout");

  auto* cmd_version = app.add_subcommand("version", "Print version and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  gcomp::set_max_threads(threads);

  try {
    if (cmd_version->parsed()) {
      std::cout << "gcomp " << kVersion << '\n';
      return 0;
    }
    if (cmd_est->parsed()) return run_estimate(est);
    if (cmd_sim->parsed()) return run_simulate(sim);
    if (cmd_cal->parsed()) {
      if (opt_delta->count() > 0) cal.delta_t = cal_delta;
      if (opt_meb->count() > 0) cal.meb = cal_meb;
      return run_calibrate(cal);
    }
    if (cmd_bench->parsed()) return run_bench(bench);
  } catch (const gcomp::CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << '\n';
    return 3;
  } catch (const gcomp::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const gcomp::ModelError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
