// Command-line front end: simulate, fit, predict, cv, empirical, validate.
//
// Exit codes: 0 success, 1 I/O or parse error, 2 invalid model or
// parameters, 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mvcov/mvcov.hpp"

namespace {

using namespace mvcov;

struct ModelConfig {
  ModelPtr model;
  std::vector<std::string> var_names;
};

// "variables" is allowed at the top level of a model file; everything else
// must match the family schema exactly
ModelConfig load_model_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw io_error(path + ": " + e.what());
  }
  ModelConfig out;
  if (j.is_object() && j.contains("variables")) {
    for (const auto& v : j["variables"]) out.var_names.push_back(v.get<std::string>());
    j.erase("variables");
  }
  out.model = model_from_json(j);
  if (out.var_names.empty())
    out.var_names = default_variable_names(out.model->num_variables());
  if (static_cast<int>(out.var_names.size()) != out.model->num_variables())
    throw std::invalid_argument(path + ": 'variables' must name every variable");
  return out;
}

void save_model_config(const std::string& path, const CrossCovModel& model,
                       const std::vector<std::string>& var_names) {
  json j = model_to_json(model);
  j["variables"] = var_names;
  atomic_write(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

std::vector<int> parse_grid(const std::string& spec) {
  std::vector<int> shape;
  std::string cur;
  for (char c : spec + "x") {
    if (c == 'x' || c == 'X') {
      if (cur.empty()) throw CLI::ValidationError("--grid", "malformed grid spec");
      shape.push_back(std::stoi(cur));
      cur.clear();
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      cur += c;
    } else {
      throw CLI::ValidationError("--grid", "malformed grid spec");
    }
  }
  return shape;
}

SpatialDesign design_from_flags(const std::string& grid_spec, double spacing,
                                const std::string& sites_path, int tsteps,
                                double tstep) {
  SpatialDesign design;
  if (!sites_path.empty()) {
    design = read_sites_file(sites_path);
  } else if (!grid_spec.empty()) {
    design = SpatialDesign::grid(parse_grid(grid_spec), spacing);
  } else {
    throw CLI::ValidationError("simulate", "need --grid or --sites");
  }
  if (tsteps > 0) design = SpatialDesign::space_time(design, tsteps, tstep);
  return design;
}

int cmd_simulate(const std::string& config, const std::string& out_path,
                 int reps, std::uint64_t seed, const std::string& grid_spec,
                 double spacing, const std::string& sites_path, int tsteps,
                 double tstep, int threads) {
  const ModelConfig mc = load_model_config(config);
  const SpatialDesign design =
      design_from_flags(grid_spec, spacing, sites_path, tsteps, tstep);
  if (design.dim() != mc.model->dimension())
    throw std::invalid_argument(
        "design dimension " + std::to_string(design.dim()) +
        " does not match model dimension " + std::to_string(mc.model->dimension()) +
        (tsteps > 0 ? "" : " (space-time models need --tsteps)"));

  const ValidityReport report = validate_model(*mc.model, {30}, 3, seed);
  std::cout << "validity: " << report.summary() << '\n';
  if (!report.pass)
    throw std::invalid_argument("model failed the validity check: " + report.summary());

  const FieldSample sample = simulate(*mc.model, design, reps, seed, threads);
  write_dataset_file(out_path, sample, mc.var_names);
  std::cout << "wrote " << out_path << ": " << design.n() << " sites x " << reps
            << " replication(s), " << mc.model->num_variables() << " variable(s)\n";
  return 0;
}

int cmd_validate(const std::string& config, std::vector<int> sizes, int trials,
                 std::uint64_t seed, const std::string& dump_path,
                 const std::string& grid_spec, double spacing,
                 const std::string& sites_path, int tsteps, double tstep) {
  const ModelConfig mc = load_model_config(config);
  if (sizes.empty()) sizes = {30};
  const ValidityReport report = validate_model(*mc.model, sizes, trials, seed);
  std::cout << "model: " << mc.model->family() << '\n'
            << "validity: " << report.summary() << '\n';
  for (const auto& t : report.trials)
    std::cout << "  n=" << t.n << " min_eig=" << t.min_eig
              << " mean_diag=" << t.mean_diag << " ratio=" << t.ratio << '\n';
  if (!dump_path.empty()) {
    const SpatialDesign design =
        design_from_flags(grid_spec, spacing, sites_path, tsteps, tstep);
    JointCovariance jc = assemble_sigma(*mc.model, design);
    try {
      factorize(jc);
    } catch (const std::exception& e) {
      std::cout << "factorization failed: " << e.what() << '\n';
    }
    write_sigma_dump(jc, dump_path);
    std::cout << "wrote " << dump_path << '\n';
  }
  if (!report.pass)
    throw std::invalid_argument("model failed the validity check");
  return 0;
}

int cmd_fit(const std::string& config, const std::string& data_path,
            const std::string& out_path, const std::string& plan_path,
            const std::string& report_path, bool data_init, int starts,
            int max_evals, std::uint64_t seed, int threads) {
  ModelConfig mc = load_model_config(config);
  const Dataset data = read_dataset_file(data_path);
  if (data.sample.p() != mc.model->num_variables())
    throw std::invalid_argument("data has " + std::to_string(data.sample.p()) +
                                " variables but the model has " +
                                std::to_string(mc.model->num_variables()));

  if (data_init) {
    const auto* mm = dynamic_cast<const MultiMaternModel*>(mc.model.get());
    if (!mm)
      throw std::invalid_argument("--data-init is only available for multimatern models");
    mc.model = data_driven_init(mm->variant(), data.sample);
  }

  std::vector<FitStage> stages;
  if (!plan_path.empty()) {
    std::ifstream f(plan_path);
    if (!f) throw io_error("cannot open " + plan_path);
    json j;
    try {
      j = json::parse(f);
    } catch (const json::parse_error& e) {
      throw io_error(plan_path + ": " + e.what());
    }
    stages = stages_from_json(j);
  } else {
    FitStage all;
    for (const auto& p : param_space(mc.model).params) all.free.push_back(p.name);
    stages.push_back(std::move(all));
  }

  FitOptions options;
  options.starts = starts;
  options.max_evals = max_evals;
  options.seed = seed;
  options.threads = threads;
  const FitReport report = fit_staged(mc.model, stages, data.sample, options);

  save_model_config(out_path, *report.model, data.var_names);
  if (!report_path.empty())
    atomic_write(report_path,
                 [&](std::ostream& os) { os << fit_report_to_json(report).dump(2) << '\n'; });
  std::cout << "loglik: " << std::setprecision(17) << report.loglik << '\n'
            << "evaluations: " << report.evaluations << '\n'
            << "wrote " << out_path << '\n';
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& targets_path, const std::string& out_path,
                bool latent) {
  const ModelConfig mc = load_model_config(model_path);
  const Dataset data = read_dataset_file(data_path);
  const SpatialDesign targets = read_sites_file(targets_path);
  if (data.sample.p() != mc.model->num_variables())
    throw std::invalid_argument("data/model variable count mismatch");
  CokrigeOptions options;
  options.predict_observable = !latent;
  const PredictionResult pred =
      cokrige(*mc.model, data.sample.design, data.sample, targets, options);
  atomic_write(out_path,
               [&](std::ostream& os) { write_prediction_table(os, pred, data.var_names); });
  std::cout << "wrote " << out_path << ": " << targets.n() << " target site(s)\n";
  return 0;
}

int cmd_cv(const std::string& model_path, const std::string& data_path,
           double fraction, int repeats, std::uint64_t seed,
           const std::string& out_path, bool latent) {
  const ModelConfig mc = load_model_config(model_path);
  const Dataset data = read_dataset_file(data_path);
  if (data.sample.p() != mc.model->num_variables())
    throw std::invalid_argument("data/model variable count mismatch");
  CokrigeOptions options;
  options.predict_observable = !latent;
  const ScoreTable table =
      cross_validate(*mc.model, data.sample, fraction, repeats, seed, options);
  atomic_write(out_path,
               [&](std::ostream& os) { write_score_table(os, table, data.var_names); });
  for (const auto& s : table.scores)
    std::cout << data.var_names[s.variable] << ": rmse=" << s.rmse
              << " crps=" << s.crps << '\n';
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

int cmd_empirical(const std::string& data_path, const std::string& out_path,
                  const std::string& estimator, bool exact_lags, int bins,
                  double max_dist, double kernel_bandwidth,
                  const std::string& targets_path, bool pre_centered) {
  const Dataset data = read_dataset_file(data_path);
  const FieldSample& sample = data.sample;

  if (kernel_bandwidth > 0) {
    const SpatialDesign targets = targets_path.empty()
                                      ? sample.design
                                      : read_sites_file(targets_path);
    atomic_write(out_path, [&](std::ostream& os) {
      const int d = targets.dim();
      os << "site_x,site_y,var_i,var_j,estimate\n";
      for (int a = 0; a < targets.n(); ++a)
        for (int b = 0; b < targets.n(); ++b) {
          const Eigen::MatrixXd est = kernel_cross_cov(
              sample, kernel_bandwidth, targets.site(a), targets.site(b),
              !pre_centered);
          (void)d;
          for (std::size_t i = 0; i < data.var_names.size(); ++i)
            for (std::size_t j = 0; j < data.var_names.size(); ++j)
              os << a << ',' << b << ',' << data.var_names[i] << ','
                 << data.var_names[j] << ','
                 << detail::format_double(est(static_cast<int>(i), static_cast<int>(j)))
                 << '\n';
        }
    });
    std::cout << "wrote " << out_path << '\n';
    return 0;
  }

  LagBinning binning;
  bool distance_mode;
  if (exact_lags) {
    binning = LagBinning::exact(sample.design);
    distance_mode = false;
  } else {
    const double reach = max_dist > 0 ? max_dist : sample.design.diameter() * 1.0001;
    binning = LagBinning::distance_bins(reach, bins);
    distance_mode = true;
  }

  EmpiricalTable table;
  if (estimator == "cov")
    table = empirical_cross_cov(sample, binning, pre_centered);
  else if (estimator == "crossvario")
    table = cross_variogram(sample, binning);
  else if (estimator == "pseudovario")
    table = pseudo_cross_variogram(sample, binning, pre_centered);
  else
    throw CLI::ValidationError("--estimator", "must be cov, crossvario or pseudovario");

  atomic_write(out_path, [&](std::ostream& os) {
    write_empirical_table(os, table, data.var_names, sample.design.dim(), distance_mode);
  });
  std::cout << "wrote " << out_path << ": " << table.size() << " bin(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-covariance models for multivariate Gaussian random fields"};
  app.require_subcommand(1);
  int threads = mvcov::default_threads();
  app.add_option("--threads", threads, "worker threads (default from MVCOV_THREADS or 1)")
      ->check(CLI::PositiveNumber);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw exact samples from a model");
  std::string sim_config, sim_out, sim_grid, sim_sites;
  int sim_reps = 1, sim_tsteps = 0;
  double sim_spacing = 1.0, sim_tstep = 1.0;
  std::uint64_t sim_seed = 0;
  sim->add_option("--config", sim_config, "model config file")->required();
  sim->add_option("--out", sim_out, "output dataset CSV")->required();
  sim->add_option("--reps", sim_reps, "replication count")
      ->required()
      ->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "random seed")->required();
  sim->add_option("--grid", sim_grid, "grid shape, e.g. 10x10");
  sim->add_option("--spacing", sim_spacing, "grid spacing")->check(CLI::PositiveNumber);
  sim->add_option("--sites", sim_sites, "explicit sites CSV (site,<coords...>)");
  sim->add_option("--tsteps", sim_tsteps, "time steps (space-time models)");
  sim->add_option("--tstep", sim_tstep, "time step size");

  // validate
  auto* val = app.add_subcommand("validate", "randomized validity report for a model");
  std::string val_config, val_dump, val_grid, val_sites;
  std::vector<int> val_sizes;
  int val_trials = 3, val_tsteps = 0;
  double val_spacing = 1.0, val_tstep = 1.0;
  std::uint64_t val_seed = 1;
  val->add_option("--config", val_config, "model config file")->required();
  val->add_option("--sizes", val_sizes, "design sizes");
  val->add_option("--trials", val_trials, "trials per size")->check(CLI::PositiveNumber);
  val->add_option("--seed", val_seed, "random seed");
  val->add_option("--dump-sigma", val_dump, "binary dump of Sigma (and L) for debugging");
  val->add_option("--grid", val_grid, "design grid for --dump-sigma");
  val->add_option("--spacing", val_spacing, "grid spacing");
  val->add_option("--sites", val_sites, "design sites file for --dump-sigma");
  val->add_option("--tsteps", val_tsteps, "time steps");
  val->add_option("--tstep", val_tstep, "time step size");

  // fit
  auto* fit = app.add_subcommand("fit", "maximum-likelihood parameter estimation");
  std::string fit_config, fit_data, fit_out, fit_plan, fit_report;
  bool fit_data_init = false;
  int fit_starts = 5, fit_max_evals = 2000;
  std::uint64_t fit_seed = 0;
  fit->add_option("--config", fit_config, "initial model config")->required();
  fit->add_option("--data", fit_data, "dataset CSV")->required();
  fit->add_option("--out", fit_out, "fitted model config")->required();
  fit->add_option("--plan", fit_plan, "staged fit plan JSON");
  fit->add_option("--report", fit_report, "fit report JSON");
  fit->add_flag("--data-init", fit_data_init, "data-driven initial values (multimatern)");
  fit->add_option("--starts", fit_starts, "optimizer starts")->check(CLI::PositiveNumber);
  fit->add_option("--max-evals", fit_max_evals, "evaluations per start")
      ->check(CLI::PositiveNumber);
  fit->add_option("--seed", fit_seed, "random seed");

  // predict
  auto* pre = app.add_subcommand("predict", "co-kriging prediction at target sites");
  std::string pre_model, pre_data, pre_targets, pre_out;
  bool pre_latent = false;
  pre->add_option("--model", pre_model, "model config file")->required();
  pre->add_option("--data", pre_data, "observation dataset CSV")->required();
  pre->add_option("--targets", pre_targets, "target sites CSV")->required();
  pre->add_option("--out", pre_out, "prediction table CSV")->required();
  pre->add_flag("--latent", pre_latent, "predict the latent smooth process");

  // cv
  auto* cv = app.add_subcommand("cv", "hold-out cross-validation scores");
  std::string cv_model, cv_data, cv_out;
  double cv_fraction = 0.25;
  int cv_repeats = 10;
  std::uint64_t cv_seed = 1;
  bool cv_latent = false;
  cv->add_option("--model", cv_model, "model config file")->required();
  cv->add_option("--data", cv_data, "dataset CSV")->required();
  cv->add_option("--fraction", cv_fraction, "held-out site fraction")->required();
  cv->add_option("--repeats", cv_repeats, "number of random splits")
      ->check(CLI::PositiveNumber);
  cv->add_option("--seed", cv_seed, "random seed")->required();
  cv->add_option("--out", cv_out, "score table CSV")->required();
  cv->add_flag("--latent", cv_latent, "predict the latent smooth process");

  // empirical
  auto* emp = app.add_subcommand("empirical", "moment-based estimators");
  std::string emp_data, emp_out, emp_estimator = "cov", emp_targets;
  bool emp_exact = false, emp_pre_centered = false;
  int emp_bins = 15;
  double emp_max_dist = 0.0, emp_kernel = 0.0;
  emp->add_option("--data", emp_data, "dataset CSV")->required();
  emp->add_option("--out", emp_out, "tidy output table CSV")->required();
  emp->add_option("--estimator", emp_estimator, "cov | crossvario | pseudovario");
  emp->add_flag("--exact-lags", emp_exact, "one bin per distinct lag vector");
  emp->add_option("--bins", emp_bins, "distance bin count")->check(CLI::PositiveNumber);
  emp->add_option("--max-dist", emp_max_dist, "distance binning range");
  emp->add_option("--kernel-bandwidth", emp_kernel, "kernel estimator bandwidth");
  emp->add_option("--targets", emp_targets, "evaluation sites for the kernel estimator");
  emp->add_flag("--pre-centered", emp_pre_centered, "input is already mean zero");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(sim_config, sim_out, sim_reps, sim_seed, sim_grid,
                          sim_spacing, sim_sites, sim_tsteps, sim_tstep, threads);
    if (val->parsed())
      return cmd_validate(val_config, val_sizes, val_trials, val_seed, val_dump,
                          val_grid, val_spacing, val_sites, val_tsteps, val_tstep);
    if (fit->parsed())
      return cmd_fit(fit_config, fit_data, fit_out, fit_plan, fit_report,
                     fit_data_init, fit_starts, fit_max_evals, fit_seed, threads);
    if (pre->parsed())
      return cmd_predict(pre_model, pre_data, pre_targets, pre_out, pre_latent);
    if (cv->parsed())
      return cmd_cv(cv_model, cv_data, cv_fraction, cv_repeats, cv_seed, cv_out,
                    cv_latent);
    if (emp->parsed())
      return cmd_empirical(emp_data, emp_out, emp_estimator, emp_exact, emp_bins,
                           emp_max_dist, emp_kernel, emp_targets, emp_pre_centered);
  } catch (const mvcov::io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
