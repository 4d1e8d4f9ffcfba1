// hdmed: command-line front end for debiased mediation inference.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hdmed/baselines.hpp"
#include "hdmed/csv_io.hpp"
#include "hdmed/error.hpp"
#include "hdmed/mediation.hpp"
#include "hdmed/parallel.hpp"
#include "hdmed/simulation.hpp"

using nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4, kIo = 5, kParse = 6 };

struct InputOptions {
  std::string data;  // single file
  std::string outcome = "Y";
  std::vector<std::string> exposures{"S"};
  std::vector<std::string> covariates;
  std::string y_file, g_file, s_file, z_file;  // multi file
};

struct CommonOptions {
  std::optional<double> tau;
  std::string lambda_scheme = "quantile";
  std::optional<double> lambda0;
  double level = 0.95;
  int bootstrap_b = 500;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string format = "json";
  std::string output;
  std::string algorithm = "ipm";
  bool unpenalized_direct = false;
  bool raise_tau = false;
  std::string config;   // simulate
  std::string summary;  // simulate
};

struct Loaded {
  hdmed::Dataset data;
  std::vector<std::string> exposure_names;
  std::vector<std::string> mediator_names;
  ordered_json description;
};

Loaded load(const InputOptions& in) {
  Loaded out;
  if (!in.data.empty()) {
    if (!in.y_file.empty() || !in.g_file.empty() || !in.s_file.empty() || !in.z_file.empty())
      throw hdmed::DataError("use either --data or the --y/--g/--s files, not both");
    const hdmed::Table t = hdmed::read_csv(in.data);
    hdmed::SingleFileSpec spec;
    spec.outcome = in.outcome;
    spec.exposures = in.exposures;
    spec.covariates = in.covariates;
    out.data = hdmed::dataset_from_table(t, spec);
    out.exposure_names = in.exposures;
    for (const auto& h : t.header) {
      if (h == in.outcome) continue;
      if (std::find(in.exposures.begin(), in.exposures.end(), h) != in.exposures.end()) continue;
      if (std::find(in.covariates.begin(), in.covariates.end(), h) != in.covariates.end()) continue;
      out.mediator_names.push_back(h);
    }
    out.description = {{"data", in.data}, {"outcome", in.outcome}, {"exposures", in.exposures},
                       {"covariates", in.covariates}};
  } else {
    if (in.y_file.empty() || in.g_file.empty() || in.s_file.empty())
      throw hdmed::DataError("input required: --data FILE, or --y, --g and --s files");
    const hdmed::Table y = hdmed::read_csv(in.y_file);
    const hdmed::Table g = hdmed::read_csv(in.g_file);
    const hdmed::Table s = hdmed::read_csv(in.s_file);
    std::optional<hdmed::Table> z;
    if (!in.z_file.empty()) z = hdmed::read_csv(in.z_file);
    out.data = hdmed::dataset_from_tables(y, g, s, z ? &*z : nullptr);
    out.exposure_names = s.header;
    out.mediator_names = g.header;
    out.description = {{"y_file", in.y_file}, {"g_file", in.g_file}, {"s_file", in.s_file},
                       {"z_file", in.z_file.empty() ? ordered_json(nullptr) : ordered_json(in.z_file)}};
  }
  hdmed::validate(out.data);
  out.data = hdmed::prepare(out.data);
  return out;
}

hdmed::PenaltyScheme scheme_of(const std::string& s) {
  return s == "universal" ? hdmed::PenaltyScheme::universal : hdmed::PenaltyScheme::quantile;
}

hdmed::InferenceConfig inference_config(const CommonOptions& o, int threads) {
  hdmed::InferenceConfig cfg;
  cfg.tau = o.tau;
  cfg.lambda_scheme = scheme_of(o.lambda_scheme);
  cfg.lambda0 = o.lambda0;
  cfg.level = o.level;
  cfg.penalize_direct = !o.unpenalized_direct;
  cfg.raise_tau_if_infeasible = o.raise_tau;
  cfg.rows.algorithm = o.algorithm == "admm" ? hdmed::RowAlgorithm::admm : hdmed::RowAlgorithm::interior_point;
  cfg.rows.threads = threads;
  return cfg;
}

ordered_json warnings_json(const std::vector<hdmed::Warning>& ws) {
  ordered_json arr = ordered_json::array();
  for (const auto& w : ws) arr.push_back({{"code", w.code}, {"message", w.message}});
  return arr;
}

ordered_json effect_rows(const std::vector<std::string>& names, const hdmed::VectorXd& est, const hdmed::VectorXd& se,
                         const hdmed::WaldResult& w, int offset) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index j = 0; j < est.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(offset) + j;
    arr.push_back({{"exposure", names[static_cast<std::size_t>(j)]},
                   {"estimate", est(j)},
                   {"se", se(k)},
                   {"z", w.z(k)},
                   {"p", w.p(k)},
                   {"ci_lower", w.lower(k)},
                   {"ci_upper", w.upper(k)}});
  }
  return arr;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string effects_csv(const ordered_json& doc) {
  std::ostringstream out;
  out << "parameter,exposure,estimate,se,z,p,ci_lower,ci_upper\n";
  for (const char* part : {"indirect", "direct", "total"}) {
    if (!doc["estimates"].contains(part)) continue;
    for (const auto& r : doc["estimates"][part]) {
      out << part << ',' << r["exposure"].get<std::string>() << ',' << fmt(r["estimate"].get<double>()) << ','
          << (r["se"].is_null() ? "" : fmt(r["se"].get<double>())) << ','
          << (r["z"].is_null() ? "" : fmt(r["z"].get<double>())) << ',' << fmt(r["p"].get<double>()) << ','
          << fmt(r["ci_lower"].get<double>()) << ',' << fmt(r["ci_upper"].get<double>()) << '\n';
    }
  }
  return out.str();
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    hdmed::write_file_atomic(path, text);
  }
}

ordered_json base_config(const std::string& command, const CommonOptions& o, int threads, const Loaded* in) {
  ordered_json c;
  c["command"] = command;
  if (in) c["inputs"] = in->description;
  c["level"] = o.level;
  c["threads"] = threads;
  c["seed"] = o.seed;
  return c;
}

int run_fit(const std::string& command, const InputOptions& io, const CommonOptions& o) {
  const int threads = hdmed::resolve_threads(o.threads);
  const Loaded in = load(io);
  const bool complete = command == "fit-complete";
  const hdmed::InferenceConfig cfg = inference_config(o, threads);
  const hdmed::MediationEstimate est = complete ? hdmed::fit_complete(in.data, cfg) : hdmed::fit_incomplete(in.data, cfg);

  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  ordered_json c = base_config(command, o, threads, &in);
  c["tau"] = est.tau;
  c["tau_source"] = est.tau != (o.tau ? *o.tau : hdmed::default_tau(est.n, est.p)) ? "raised"
                    : o.tau                                                          ? "user"
                                                                                     : "default";
  c["lambda_scheme"] = o.lambda0 ? "fixed" : o.lambda_scheme;
  c["lambda0"] = est.lambda0;
  c["penalize_direct"] = cfg.penalize_direct;
  c["row_algorithm"] = o.algorithm;
  doc["config"] = c;
  doc["data"] = {{"n", est.n}, {"p", est.p}, {"q", est.q}, {"q_augmented", est.q_augmented}};
  ordered_json e;
  e["indirect"] = effect_rows(in.exposure_names, est.b_hat, est.se, est.inference, 0);
  if (est.a_hat) e["direct"] = effect_rows(in.exposure_names, *est.a_hat, est.se, est.inference, est.q);
  doc["estimates"] = e;
  doc["noise"] = {{"sigma1_sq", est.noise.sigma1_sq},
                  {"sigma2_sq", est.noise.sigma2_sq},
                  {"sigma_total_sq", est.noise.sigma_total_sq},
                  {"sigma2_truncated", est.noise.truncated}};
  std::vector<std::string> support;
  for (int j : est.pilot.support)
    support.push_back(j < in.data.p() ? in.mediator_names[static_cast<std::size_t>(j)] : "exposure:" + std::to_string(j - in.data.p()));
  doc["diagnostics"] = {{"dual_form_gap", est.dual_form_gap},
                        {"pilot_sigma", est.pilot.sigma_hat},
                        {"pilot_iterations", est.pilot.iterations},
                        {"pilot_support", support},
                        {"omega_rows", est.omega.omega.rows()},
                        {"omega_max_residual", est.omega.row_residuals.size() ? est.omega.row_residuals.maxCoeff() : 0.0},
                        {"omega_row_l1", std::vector<double>(est.omega.row_l1.data(), est.omega.row_l1.data() + est.omega.row_l1.size())},
                        {"solver_iterations", est.omega.total_iterations}};
  doc["warnings"] = warnings_json(est.warnings);
  emit(o.format == "csv" ? effects_csv(doc) : doc.dump(2) + "\n", o.output);
  return kOk;
}

int run_baseline(const std::string& command, const InputOptions& io, const CommonOptions& o, bool incomplete) {
  const int threads = hdmed::resolve_threads(o.threads);
  const Loaded in = load(io);
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  ordered_json c = base_config(command, o, threads, &in);
  hdmed::BaselineEstimate est;
  if (command == "baseline-ols") {
    est = hdmed::ols_total_effect(in.data, o.level);
  } else {
    hdmed::BootstrapOptions bo;
    bo.mode = incomplete ? hdmed::MediationMode::incomplete : hdmed::MediationMode::complete;
    bo.n_boot = o.bootstrap_b;
    bo.level = o.level;
    bo.seed = o.seed;
    bo.threads = threads;
    est = hdmed::naive_bootstrap(in.data, bo);
    c["bootstrap_B"] = o.bootstrap_b;
    c["mode"] = hdmed::to_string(bo.mode);
    c["lambda_rule"] = "universal_scaled";
    c["lambda"] = est.lambda;
  }
  doc["config"] = c;
  doc["data"] = {{"n", in.data.n()}, {"p", in.data.p()}, {"q", in.data.q()}};
  ordered_json rows = ordered_json::array();
  for (Eigen::Index j = 0; j < est.point.size(); ++j) {
    ordered_json r;
    r["exposure"] = in.exposure_names[static_cast<std::size_t>(j)];
    r["estimate"] = est.point(j);
    if (est.variance) {
      const double se = std::sqrt((*est.variance)(j, j));
      r["se"] = se;
      r["z"] = se > 0.0 ? ordered_json(est.point(j) / se) : ordered_json(nullptr);
    } else {
      r["se"] = nullptr;
      r["z"] = nullptr;
    }
    r["p"] = est.p_value(j);
    r["ci_lower"] = est.lower(j);
    r["ci_upper"] = est.upper(j);
    rows.push_back(r);
  }
  doc["estimates"] = {{command == "baseline-ols" ? "total" : "indirect", rows}};
  doc["diagnostics"] = {{"p_value_rigorous", est.p_value_rigorous},
                        {"bootstrap_kept", est.n_boot},
                        {"bootstrap_skipped", est.n_skipped}};
  doc["warnings"] = warnings_json(est.warnings);
  emit(o.format == "csv" ? effects_csv(doc) : doc.dump(2) + "\n", o.output);
  return kOk;
}

ordered_json metric_json(const hdmed::MetricSummary& m) { return {{"value", m.value}, {"mc_se", m.mc_se}}; }

int run_simulate(const CommonOptions& o, const CLI::App& sub) {
  hdmed::ExperimentConfig cfg;
  if (!o.config.empty()) cfg = hdmed::parse_experiment_config(hdmed::read_file(o.config));
  // Command-line flags override the file.
  if (sub.count("--seed")) cfg.seed = o.seed;
  if (sub.count("--level")) cfg.level = o.level;
  if (sub.count("--tau")) cfg.inference.tau = o.tau;
  if (sub.count("--lambda-scheme")) cfg.inference.lambda_scheme = scheme_of(o.lambda_scheme);
  if (sub.count("--bootstrap-B")) cfg.bootstrap_b = o.bootstrap_b;
  if (o.raise_tau) cfg.inference.raise_tau_if_infeasible = true;
  cfg.inference.level = cfg.level;
  cfg.threads = hdmed::resolve_threads(sub.count("--threads") ? o.threads : 0);
  const std::string format = sub.count("--format") ? o.format : "csv";

  const hdmed::SimulationReport rep = hdmed::run_experiment(cfg);
  ordered_json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["config"] = {{"command", "simulate"}, {"experiment", hdmed::format_experiment_config(cfg)}};
  ordered_json cells = ordered_json::array();
  for (const auto& c : rep.cells) {
    cells.push_back({{"beta0", c.beta0},
                     {"c", c.c},
                     {"method", hdmed::to_string(c.method)},
                     {"n_reps", c.n_reps},
                     {"n_failed", c.n_failed},
                     {"coverage", metric_json(c.coverage)},
                     {"power", metric_json(c.power)},
                     {"mean_ci_length", metric_json(c.mean_ci_length)},
                     {"risk", metric_json(c.risk)},
                     {"mean_n_variance", metric_json(c.mean_variance)}});
  }
  doc["cells"] = cells;
  doc["warnings"] = ordered_json::array();
  const std::string csv = hdmed::report_csv(rep);
  if (format == "json") {
    emit(doc.dump(2) + "\n", o.output);
  } else {
    emit(csv, o.output);
    if (!o.summary.empty()) hdmed::write_file_atomic(o.summary, doc.dump(2) + "\n");
  }
  std::cerr << "simulate: " << rep.cells.size() << " cells in " << rep.runtime_seconds << " s\n";
  return kOk;
}

int exit_for(hdmed::ErrorCategory c) {
  switch (c) {
    case hdmed::ErrorCategory::io: return kIo;
    case hdmed::ErrorCategory::parse: return kParse;
    case hdmed::ErrorCategory::data: return kData;
    case hdmed::ErrorCategory::numeric: return kNumeric;
  }
  return kData;
}

void add_inputs(CLI::App* sub, InputOptions& in) {
  sub->add_option("--data", in.data, "single CSV: outcome, exposure(s), covariates; all other columns are mediators");
  sub->add_option("--outcome", in.outcome, "outcome column name")->capture_default_str();
  sub->add_option("--exposure", in.exposures, "exposure column name(s)")->delimiter(',')->capture_default_str();
  sub->add_option("--covariate", in.covariates, "covariate column name(s)")->delimiter(',');
  sub->add_option("--y", in.y_file, "outcome CSV (one column)");
  sub->add_option("--g", in.g_file, "mediator CSV");
  sub->add_option("--s", in.s_file, "exposure CSV");
  sub->add_option("--z", in.z_file, "covariate CSV");
}

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--level", o.level, "confidence level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--seed", o.seed, "random seed")->capture_default_str();
  sub->add_option("--threads", o.threads, "worker threads (default: HDMED_THREADS, else all cores)");
  sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  sub->add_option("-o,--output", o.output, "output file (default stdout)");
}

void add_tuning(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--tau", o.tau, "l-infinity tolerance of the debiasing rows (default sqrt(log p / n) / 3)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--lambda-scheme", o.lambda_scheme, "scaled lasso penalty level")
      ->check(CLI::IsMember({"universal", "quantile"}))
      ->capture_default_str();
  sub->add_option("--lambda0", o.lambda0, "fixed scaled lasso penalty level")->check(CLI::NonNegativeNumber);
  sub->add_flag("--raise-tau", o.raise_tau, "raise tau to 1.05 x the smallest feasible value when a row is infeasible");
  sub->add_option("--row-solver", o.algorithm, "row solver")->check(CLI::IsMember({"ipm", "admm"}))->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Debiased inference for the indirect effect in high-dimensional mediation models"};
  app.require_subcommand(1);
  InputOptions in;
  CommonOptions o;
  bool naive_incomplete = false;

  auto* fi = app.add_subcommand("fit-incomplete", "indirect and direct effects, direct path kept in the model");
  add_inputs(fi, in);
  add_common(fi, o);
  add_tuning(fi, o);
  fi->add_flag("--unpenalized-direct", o.unpenalized_direct, "leave exposure coefficients unpenalized in the pilot fit");

  auto* fc = app.add_subcommand("fit-complete", "indirect effect assuming no direct path");
  add_inputs(fc, in);
  add_common(fc, o);
  add_tuning(fc, o);

  auto* bo = app.add_subcommand("baseline-ols", "total effect by OLS of the outcome on the exposures");
  add_inputs(bo, in);
  add_common(bo, o);

  auto* bn = app.add_subcommand("baseline-naive", "lasso plug-in indirect effect with bootstrap percentile intervals");
  add_inputs(bn, in);
  add_common(bn, o);
  bn->add_option("--bootstrap-B", o.bootstrap_b, "bootstrap resamples")->check(CLI::Range(100, 1000000))->capture_default_str();
  bn->add_flag("--incomplete", naive_incomplete, "fit the outcome on mediators and exposures");

  auto* sim = app.add_subcommand("simulate", "Monte-Carlo coverage and power study");
  add_common(sim, o);
  sim->add_option("--config", o.config, "experiment file (key=value lines)");
  sim->add_option("--summary", o.summary, "also write a JSON summary here (csv format)");
  sim->add_option("--tau", o.tau, "fixed tau for the proposed methods")->check(CLI::NonNegativeNumber);
  sim->add_option("--lambda-scheme", o.lambda_scheme, "scaled lasso penalty level")
      ->check(CLI::IsMember({"universal", "quantile"}));
  sim->add_option("--bootstrap-B", o.bootstrap_b, "bootstrap resamples for the naive method")->check(CLI::Range(100, 1000000));
  sim->add_flag("--raise-tau", o.raise_tau, "raise tau on infeasible rows (same as raise_tau = true)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*fi) return run_fit("fit-incomplete", in, o);
    if (*fc) return run_fit("fit-complete", in, o);
    if (*bo) return run_baseline("baseline-ols", in, o, false);
    if (*bn) return run_baseline("baseline-naive", in, o, naive_incomplete);
    if (*sim) return run_simulate(o, *sim);
  } catch (const hdmed::InfeasibleError& e) {
    std::cerr << "error[" << hdmed::to_string(e.category()) << "]: " << e.what()
              << "\nhint: pass --tau above " << e.min_residual() << " or use --raise-tau\n";
    return exit_for(e.category());
  } catch (const hdmed::Error& e) {
    std::cerr << "error[" << hdmed::to_string(e.category()) << "]: " << e.what() << '\n';
    return exit_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return kNumeric;
  }
  return kUsage;
}
