#include "hdmed/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "hdmed/baselines.hpp"
#include "hdmed/error.hpp"
#include "hdmed/parallel.hpp"
#include "hdmed/random.hpp"

namespace hdmed {

namespace {

constexpr std::uint64_t kSupportStream = 0x5eed'0001;
constexpr std::uint64_t kGraphStream = 0x5eed'0002;
constexpr std::uint64_t kObservedStream = 0x5eed'0003;
constexpr std::uint64_t kBootStream = 0x5eed'0004;

// Rescales a covariance to unit diagonal and the matching precision.
void unit_diagonal(MatrixXd& sigma, MatrixXd& precision) {
  const VectorXd d = sigma.diagonal().cwiseSqrt();
  const VectorXd inv = d.cwiseInverse();
  sigma = inv.asDiagonal() * sigma * inv.asDiagonal();
  precision = d.asDiagonal() * precision * d.asDiagonal();
  sigma = 0.5 * (sigma + sigma.transpose());
  precision = 0.5 * (precision + precision.transpose());
  sigma.diagonal().setOnes();
}

}  // namespace

PrecisionGraph make_precision_graph(int p, const GraphSpec& spec, std::uint64_t seed) {
  if (p < 1) throw DataError("make_precision_graph: need p >= 1");
  PrecisionGraph out;
  MatrixXd theta = MatrixXd::Identity(p, p);

  if (spec.kind == GraphKind::compound_symmetric) {
    if (!(spec.compound_rho > -1.0 / std::max(1, p - 1) && spec.compound_rho < 1.0))
      throw DataError("compound_rho outside the positive definite range");
    theta.setConstant(spec.compound_rho);
    theta.diagonal().setOnes();
    out.edges = p * (p - 1) / 2;
  } else if (spec.kind == GraphKind::chain_clusters) {
    if (spec.cluster_size < 1) throw DataError("graph cluster_size must be positive");
    Rng rng(seed);
    std::uniform_int_distribution<int> coin(0, 1);
    std::vector<int> degree(static_cast<std::size_t>(p), 0);
    auto add_edge = [&](int i, int j) {
      if (i == j || theta(i, j) != 0.0) return false;
      if (degree[static_cast<std::size_t>(i)] >= spec.max_degree || degree[static_cast<std::size_t>(j)] >= spec.max_degree)
        return false;
      const double w = coin(rng) ? spec.edge_weight : -spec.edge_weight;
      theta(i, j) = theta(j, i) = w;
      ++degree[static_cast<std::size_t>(i)];
      ++degree[static_cast<std::size_t>(j)];
      ++out.edges;
      return true;
    };
    for (int start = 0; start < p; start += spec.cluster_size) {
      const int stop = std::min(p, start + spec.cluster_size);
      for (int i = start; i + 1 < stop; ++i) add_edge(i, i + 1);
      if (stop - start > 2) {
        std::uniform_int_distribution<int> member(start, stop - 1);
        for (int e = 0; e < spec.extra_edges; ++e) add_edge(member(rng), member(rng));
      }
    }
  }

  double load = std::max(0.0, spec.load);
  for (int attempt = 0;; ++attempt) {
    MatrixXd loaded = theta;
    loaded.diagonal().array() += load;
    Eigen::LLT<MatrixXd> llt(loaded);
    if (llt.info() == Eigen::Success) {
      theta = loaded;
      out.sigma_e = llt.solve(MatrixXd::Identity(p, p));
      break;
    }
    if (attempt >= 10) throw NumericError("make_precision_graph: precision not positive definite after 10 loads");
    load = std::max(2.0 * load, 0.1);
  }
  out.load = load;
  out.precision = theta;
  unit_diagonal(out.sigma_e, out.precision);
  return out;
}

void validate(const SimulationScenario& scn) {
  if (scn.n < 2) throw DataError("scenario: n must be at least 2");
  if (scn.p < 1 || scn.q < 1) throw DataError("scenario: p and q must be positive");
  if (scn.n_nonzero_gamma > scn.p || scn.n_nonzero_alpha0 > scn.p)
    throw DataError("scenario: more nonzero coefficients than mediators");
  if (scn.n_true_mediators < 0 || scn.n_true_mediators > std::min(scn.n_nonzero_gamma, scn.n_nonzero_alpha0))
    throw DataError("scenario: n_true_mediators must not exceed either support size");
  if (scn.n_nonzero_gamma + scn.n_nonzero_alpha0 - scn.n_true_mediators > scn.p)
    throw DataError("scenario: supports do not fit in p mediators");
  if (!(scn.sigma1_sq >= 0.0)) throw DataError("scenario: sigma1_sq must be nonnegative");
  if (scn.misspecify) {
    const auto& m = *scn.misspecify;
    if (m.observed_p < 1 || m.observed_p > scn.p) throw DataError("scenario: observed_p out of range");
    if (m.observed_true < 0 || m.observed_true > scn.n_true_mediators || m.observed_true > m.observed_p)
      throw DataError("scenario: observed_true out of range");
    if (m.observed_p - m.observed_true > scn.p - scn.n_true_mediators)
      throw DataError("scenario: not enough non-mediator columns to observe");
  }
}

SimulationTruth build_truth(const SimulationScenario& scn) {
  validate(scn);
  const int p = scn.p;
  const int q = scn.q;
  SimulationTruth t;
  t.c = scn.c;

  Rng rng(split_seed(scn.seed, kSupportStream));
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const auto ng = static_cast<std::size_t>(scn.n_nonzero_gamma);
  const auto na = static_cast<std::size_t>(scn.n_nonzero_alpha0);
  const auto nt = static_cast<std::size_t>(scn.n_true_mediators);
  t.gamma_support.assign(order.begin(), order.begin() + static_cast<long>(ng));
  t.true_mediators.assign(order.begin(), order.begin() + static_cast<long>(nt));
  t.alpha0_support = t.true_mediators;
  t.alpha0_support.insert(t.alpha0_support.end(), order.begin() + static_cast<long>(ng),
                          order.begin() + static_cast<long>(ng + na - nt));
  std::sort(t.gamma_support.begin(), t.gamma_support.end());
  std::sort(t.alpha0_support.begin(), t.alpha0_support.end());
  std::sort(t.true_mediators.begin(), t.true_mediators.end());

  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  t.gamma = MatrixXd::Zero(p, q);
  for (int j : t.gamma_support)
    for (int k = 0; k < q; ++k) t.gamma(j, k) = unif(rng);
  t.alpha0 = VectorXd::Zero(p);
  for (int j : t.alpha0_support) t.alpha0(j) = scn.alpha0_value;
  t.alpha1 = VectorXd::Constant(q, scn.mode == MediationMode::incomplete ? scn.alpha1 : 0.0);
  t.beta0 = scn.c * (t.gamma.transpose() * t.alpha0);

  PrecisionGraph graph = make_precision_graph(p, scn.graph, split_seed(scn.seed, kGraphStream));
  t.sigma_e = std::move(graph.sigma_e);
  t.precision_e = std::move(graph.precision);
  Eigen::LLT<MatrixXd> llt(t.sigma_e);
  if (llt.info() != Eigen::Success) throw NumericError("mediator noise covariance is not positive definite");
  t.chol_e = llt.matrixL();

  if (scn.misspecify) {
    Rng orng(split_seed(scn.seed, kObservedStream));
    const std::set<int> mediators(t.true_mediators.begin(), t.true_mediators.end());
    std::vector<int> others;
    for (int j = 0; j < p; ++j)
      if (!mediators.count(j)) others.push_back(j);
    std::shuffle(others.begin(), others.end(), orng);
    t.observed.assign(t.true_mediators.begin(), t.true_mediators.begin() + scn.misspecify->observed_true);
    t.observed.insert(t.observed.end(), others.begin(),
                      others.begin() + (scn.misspecify->observed_p - scn.misspecify->observed_true));
    std::sort(t.observed.begin(), t.observed.end());
  } else {
    t.observed.resize(static_cast<std::size_t>(p));
    std::iota(t.observed.begin(), t.observed.end(), 0);
  }
  return t;
}

Dataset draw(const SimulationScenario& scn, const SimulationTruth& truth, std::uint64_t rep_seed) {
  const int n = scn.n;
  const int p = scn.p;
  const int q = scn.q;
  Rng rng(rep_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = normal(rng);
  };

  MatrixXd s(n, q);
  fill(s);
  MatrixXd z(n, p);
  fill(z);
  MatrixXd g = z * truth.chol_e.transpose();
  g.noalias() += truth.c * s * truth.gamma.transpose();

  VectorXd e1(n);
  if (scn.error_dist == ErrorDist::gaussian) {
    const double sd = std::sqrt(scn.sigma1_sq);
    for (int i = 0; i < n; ++i) e1(i) = sd * normal(rng);
  } else {
    std::student_t_distribution<double> t3(3.0);
    const double scale = std::sqrt(scn.sigma1_sq / 3.0);
    for (int i = 0; i < n; ++i) e1(i) = scale * t3(rng);
  }

  Dataset data;
  data.y = g * truth.alpha0 + s * truth.alpha1 + e1;
  data.s = std::move(s);
  if (static_cast<int>(truth.observed.size()) == p) {
    data.g = std::move(g);
  } else {
    data.g.resize(n, static_cast<Eigen::Index>(truth.observed.size()));
    for (std::size_t k = 0; k < truth.observed.size(); ++k)
      data.g.col(static_cast<Eigen::Index>(k)) = g.col(truth.observed[k]);
  }
  return data;
}

std::pair<Dataset, SimulationTruth> generate(const SimulationScenario& scn) {
  SimulationTruth truth = build_truth(scn);
  Dataset data = draw(scn, truth, split_seed(scn.seed, 0));
  return {std::move(data), std::move(truth)};
}

double c_for_beta0(const SimulationScenario& scn, double beta0) {
  if (scn.q != 1) throw DataError("c_for_beta0 requires a single exposure");
  SimulationScenario unit = scn;
  unit.c = 1.0;
  unit.graph.kind = GraphKind::empty;  // the graph does not affect gamma^T a0
  const SimulationTruth t = build_truth(unit);
  const double base = t.beta0(0);
  if (std::abs(base) < 1e-12) {
    if (beta0 == 0.0) return 0.0;
    throw DataError("scenario has gamma^T alpha0 = 0; no c reaches the requested beta0");
  }
  return beta0 / base;
}

PopulationMoments population_moments(const SimulationTruth& truth, const SimulationScenario& scn) {
  PopulationMoments m;
  const int q = static_cast<int>(truth.gamma.cols());
  m.sigma_ss = MatrixXd::Identity(q, q);
  m.sigma_sg = truth.c * m.sigma_ss * truth.gamma.transpose();
  m.sigma_gg = truth.c * truth.c * truth.gamma * m.sigma_ss * truth.gamma.transpose() + truth.sigma_e;
  m.sigma1_sq = scn.sigma1_sq;
  m.sigma2_sq = truth.alpha0.dot(truth.sigma_e * truth.alpha0);
  return m;
}

PopulationVariances population_variance_oracle(const SimulationTruth& truth, const SimulationScenario& scn) {
  const PopulationMoments m = population_moments(truth, scn);
  const MatrixXd ss_inv = m.sigma_ss.inverse();
  Eigen::LLT<MatrixXd> gg(m.sigma_gg);
  if (gg.info() != Eigen::Success) throw NumericError("population mediator covariance is singular");
  const MatrixXd gs = m.sigma_sg.transpose();

  PopulationVariances v;
  const MatrixXd explained = m.sigma_sg * gg.solve(gs);
  v.var_complete = m.sigma1_sq * ss_inv * explained * ss_inv + m.sigma2_sq * ss_inv;
  v.var_ols = (m.sigma1_sq + m.sigma2_sq) * ss_inv;

  const MatrixXd resid_cov = m.sigma_gg - gs * ss_inv * m.sigma_sg;
  Eigen::LLT<MatrixXd> rc(resid_cov);
  if (rc.info() != Eigen::Success) throw NumericError("conditional mediator covariance is singular");
  const MatrixXd gamma_mat = ss_inv * m.sigma_sg * rc.solve(gs) * ss_inv;
  v.var_incomplete = m.sigma1_sq * gamma_mat + m.sigma2_sq * ss_inv;
  return v;
}

const char* to_string(SimMethod m) {
  switch (m) {
    case SimMethod::proposed_incomplete: return "proposed_incomplete";
    case SimMethod::proposed_complete: return "proposed_complete";
    case SimMethod::ols: return "ols";
    case SimMethod::naive: return "naive";
  }
  return "unknown";
}

SimMethod sim_method_from_string(const std::string& s) {
  if (s == "proposed_incomplete") return SimMethod::proposed_incomplete;
  if (s == "proposed_complete") return SimMethod::proposed_complete;
  if (s == "ols") return SimMethod::ols;
  if (s == "naive") return SimMethod::naive;
  throw ParseError("unknown simulation method '" + s + "'");
}

namespace {

RepRecord run_method(SimMethod method, const Dataset& data, const ExperimentConfig& cfg, std::uint64_t boot_seed) {
  RepRecord r;
  InferenceConfig inf = cfg.inference;
  inf.level = cfg.level;
  inf.rows.threads = 1;
  switch (method) {
    case SimMethod::proposed_complete:
    case SimMethod::proposed_incomplete: {
      const MediationEstimate est =
          method == SimMethod::proposed_complete ? fit_complete(data, inf) : fit_incomplete(data, inf);
      r.estimate = est.b_hat(0);
      r.variance = est.cov(0, 0);
      r.lower = est.inference.lower(0);
      r.upper = est.inference.upper(0);
      r.p_value = est.inference.p(0);
      break;
    }
    case SimMethod::ols: {
      const BaselineEstimate est = ols_total_effect(data, cfg.level);
      r.estimate = est.point(0);
      r.variance = (*est.variance)(0, 0);
      r.lower = est.lower(0);
      r.upper = est.upper(0);
      r.p_value = est.p_value(0);
      break;
    }
    case SimMethod::naive: {
      BootstrapOptions bo;
      bo.mode = cfg.scenario.mode;
      bo.n_boot = cfg.bootstrap_b;
      bo.level = cfg.level;
      bo.seed = boot_seed;
      const BaselineEstimate est = naive_bootstrap(data, bo);
      r.estimate = est.point(0);
      const VectorXd col = est.replicates.col(0);
      const double mean = col.mean();
      r.variance = col.size() > 1 ? (col.array() - mean).square().sum() / static_cast<double>(col.size() - 1) : 0.0;
      r.lower = est.lower(0);
      r.upper = est.upper(0);
      r.p_value = est.p_value(0);
      break;
    }
  }
  r.ok = true;
  return r;
}

MetricSummary mean_and_se(const std::vector<double>& v) {
  MetricSummary m;
  if (v.empty()) return m;
  const double k = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  m.value = sum / k;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.value) * (x - m.value);
    m.mc_se = std::sqrt(ss / (k - 1.0) / k);
  }
  return m;
}

MetricSummary proportion(const std::vector<double>& flags) {
  MetricSummary m;
  if (flags.empty()) return m;
  const double k = static_cast<double>(flags.size());
  double hits = 0.0;
  for (double f : flags) hits += f;
  m.value = hits / k;
  m.mc_se = std::sqrt(m.value * (1.0 - m.value) / k);
  return m;
}

}  // namespace

SimulationReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_reps < 2) throw DataError("run_experiment: need at least 2 replications");
  if (cfg.methods.empty()) throw DataError("run_experiment: no methods selected");
  if (cfg.beta0_grid.empty()) throw DataError("run_experiment: empty beta0 grid");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
  const auto start = std::chrono::steady_clock::now();

  const int n_cells = static_cast<int>(cfg.beta0_grid.size());
  const int n_methods = static_cast<int>(cfg.methods.size());
  std::vector<SimulationScenario> scenarios;
  std::vector<SimulationTruth> truths;
  for (double b0 : cfg.beta0_grid) {
    SimulationScenario scn = cfg.scenario;
    scn.c = c_for_beta0(cfg.scenario, b0);
    truths.push_back(build_truth(scn));
    scenarios.push_back(scn);
  }

  SimulationReport report;
  report.config = cfg;
  report.records.assign(static_cast<std::size_t>(n_cells),
                        std::vector<std::vector<RepRecord>>(static_cast<std::size_t>(n_methods),
                                                            std::vector<RepRecord>(static_cast<std::size_t>(cfg.n_reps))));

  const int tasks = n_cells * cfg.n_reps;
  parallel_for(tasks, resolve_threads(cfg.threads), [&](int task) {
    const int cell = task / cfg.n_reps;
    const int rep = task % cfg.n_reps;
    const auto ucell = static_cast<std::size_t>(cell);
    // Common random numbers across grid cells: the stream depends on rep only.
    const Dataset data = prepare(draw(scenarios[ucell], truths[ucell], split_seed(cfg.seed, static_cast<std::uint64_t>(rep))));
    for (int mi = 0; mi < n_methods; ++mi) {
      const std::uint64_t boot_seed = split_seed(cfg.seed, kBootStream + static_cast<std::uint64_t>(cell),
                                                 static_cast<std::uint64_t>(rep));
      RepRecord rec;
      try {
        rec = run_method(cfg.methods[static_cast<std::size_t>(mi)], data, cfg, boot_seed);
      } catch (const Error&) {
        rec.ok = false;
      }
      report.records[ucell][static_cast<std::size_t>(mi)][static_cast<std::size_t>(rep)] = rec;
    }
  });

  for (int cell = 0; cell < n_cells; ++cell) {
    const auto ucell = static_cast<std::size_t>(cell);
    const SimulationTruth& truth = truths[ucell];
    for (int mi = 0; mi < n_methods; ++mi) {
      const SimMethod method = cfg.methods[static_cast<std::size_t>(mi)];
      // OLS targets the total effect; the others the indirect effect.
      const double target = truth.beta0(0) + (method == SimMethod::ols ? truth.alpha1(0) : 0.0);
      std::vector<double> cover, reject, length, sqerr, nvar;
      int failed = 0;
      for (const RepRecord& r : report.records[ucell][static_cast<std::size_t>(mi)]) {
        if (!r.ok) {
          ++failed;
          continue;
        }
        cover.push_back(r.lower <= target && target <= r.upper ? 1.0 : 0.0);
        reject.push_back(r.p_value < 1.0 - cfg.level ? 1.0 : 0.0);
        length.push_back(r.upper - r.lower);
        sqerr.push_back((r.estimate - target) * (r.estimate - target));
        nvar.push_back(r.variance * scenarios[ucell].n);
      }
      if (failed > cfg.max_fail_fraction * cfg.n_reps)
        throw NumericError(std::string("run_experiment: ") + to_string(method) + " failed in " + std::to_string(failed) +
                           " of " + std::to_string(cfg.n_reps) + " replications at beta0=" +
                           std::to_string(cfg.beta0_grid[ucell]));
      CellReport c;
      c.beta0 = cfg.beta0_grid[ucell];
      c.c = scenarios[ucell].c;
      c.method = method;
      c.n_reps = static_cast<int>(cover.size());
      c.n_failed = failed;
      c.coverage = proportion(cover);
      c.power = proportion(reject);
      c.mean_ci_length = mean_and_se(length);
      c.risk = mean_and_se(sqerr);
      c.mean_variance = mean_and_se(nvar);
      report.cells.push_back(c);
    }
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

const char* graph_kind_name(GraphKind k) {
  switch (k) {
    case GraphKind::chain_clusters: return "chain_clusters";
    case GraphKind::empty: return "empty";
    case GraphKind::compound_symmetric: return "compound_symmetric";
  }
  return "unknown";
}

}  // namespace

std::string report_csv(const SimulationReport& report) {
  std::ostringstream out;
  out << "beta0,c,method,metric,value,mc_se,n_reps,n_failed\n";
  for (const CellReport& c : report.cells) {
    auto row = [&](const char* metric, const MetricSummary& m) {
      out << fmt(c.beta0) << ',' << fmt(c.c) << ',' << to_string(c.method) << ',' << metric << ',' << fmt(m.value)
          << ',' << fmt(m.mc_se) << ',' << c.n_reps << ',' << c.n_failed << '\n';
    };
    row("coverage", c.coverage);
    row("power", c.power);
    row("mean_ci_length", c.mean_ci_length);
    row("risk", c.risk);
    row("mean_n_variance", c.mean_variance);
  }
  return out.str();
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  SimulationScenario& s = cfg.scenario;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "n") s.n = static_cast<int>(to_int(key, val));
    else if (key == "p") s.p = static_cast<int>(to_int(key, val));
    else if (key == "q") s.q = static_cast<int>(to_int(key, val));
    else if (key == "mode") {
      if (val == "complete") s.mode = MediationMode::complete;
      else if (val == "incomplete") s.mode = MediationMode::incomplete;
      else throw ParseError("config key 'mode': expected complete or incomplete");
    } else if (key == "alpha1") s.alpha1 = to_double(key, val);
    else if (key == "n_true_mediators") s.n_true_mediators = static_cast<int>(to_int(key, val));
    else if (key == "n_nonzero_gamma") s.n_nonzero_gamma = static_cast<int>(to_int(key, val));
    else if (key == "n_nonzero_alpha0") s.n_nonzero_alpha0 = static_cast<int>(to_int(key, val));
    else if (key == "alpha0_value") s.alpha0_value = to_double(key, val);
    else if (key == "sigma1_sq") s.sigma1_sq = to_double(key, val);
    else if (key == "error_dist") {
      if (val == "gaussian") s.error_dist = ErrorDist::gaussian;
      else if (val == "t3_scaled") s.error_dist = ErrorDist::t3_scaled;
      else throw ParseError("config key 'error_dist': expected gaussian or t3_scaled");
    } else if (key == "scenario_seed") s.seed = static_cast<std::uint64_t>(to_int(key, val));
    else if (key == "graph.kind") {
      if (val == "chain_clusters") s.graph.kind = GraphKind::chain_clusters;
      else if (val == "empty") s.graph.kind = GraphKind::empty;
      else if (val == "compound_symmetric") s.graph.kind = GraphKind::compound_symmetric;
      else throw ParseError("config key 'graph.kind': unknown graph kind '" + val + "'");
    } else if (key == "graph.cluster_size") s.graph.cluster_size = static_cast<int>(to_int(key, val));
    else if (key == "graph.edge_weight") s.graph.edge_weight = to_double(key, val);
    else if (key == "graph.extra_edges") s.graph.extra_edges = static_cast<int>(to_int(key, val));
    else if (key == "graph.max_degree") s.graph.max_degree = static_cast<int>(to_int(key, val));
    else if (key == "graph.load") s.graph.load = to_double(key, val);
    else if (key == "graph.compound_rho") s.graph.compound_rho = to_double(key, val);
    else if (key == "misspecify.observed_p") {
      if (!s.misspecify) s.misspecify.emplace();
      s.misspecify->observed_p = static_cast<int>(to_int(key, val));
    } else if (key == "misspecify.observed_true") {
      if (!s.misspecify) s.misspecify.emplace();
      s.misspecify->observed_true = static_cast<int>(to_int(key, val));
    } else if (key == "beta0_grid") {
      cfg.beta0_grid.clear();
      for (const auto& v : split_list(val)) cfg.beta0_grid.push_back(to_double(key, v));
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& v : split_list(val)) cfg.methods.push_back(sim_method_from_string(v));
    } else if (key == "n_reps") cfg.n_reps = static_cast<int>(to_int(key, val));
    else if (key == "level") cfg.level = to_double(key, val);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_int(key, val));
    else if (key == "threads") cfg.threads = static_cast<int>(to_int(key, val));
    else if (key == "bootstrap_b") cfg.bootstrap_b = static_cast<int>(to_int(key, val));
    else if (key == "max_fail_fraction") cfg.max_fail_fraction = to_double(key, val);
    else if (key == "tau") cfg.inference.tau = to_double(key, val);
    else if (key == "lambda0") cfg.inference.lambda0 = to_double(key, val);
    else if (key == "lambda_scheme") {
      if (val == "quantile") cfg.inference.lambda_scheme = PenaltyScheme::quantile;
      else if (val == "universal") cfg.inference.lambda_scheme = PenaltyScheme::universal;
      else throw ParseError("config key 'lambda_scheme': expected quantile or universal");
    } else if (key == "penalize_direct") cfg.inference.penalize_direct = to_bool(key, val);
    else if (key == "raise_tau") cfg.inference.raise_tau_if_infeasible = to_bool(key, val);
    else throw ParseError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  cfg.inference.level = cfg.level;
  return cfg;
}

std::string format_experiment_config(const ExperimentConfig& cfg) {
  const SimulationScenario& s = cfg.scenario;
  std::ostringstream out;
  out << "n=" << s.n << "\np=" << s.p << "\nq=" << s.q << "\nmode=" << to_string(s.mode) << "\nalpha1=" << fmt(s.alpha1)
      << "\nn_true_mediators=" << s.n_true_mediators << "\nn_nonzero_gamma=" << s.n_nonzero_gamma
      << "\nn_nonzero_alpha0=" << s.n_nonzero_alpha0 << "\nalpha0_value=" << fmt(s.alpha0_value)
      << "\nsigma1_sq=" << fmt(s.sigma1_sq)
      << "\nerror_dist=" << (s.error_dist == ErrorDist::gaussian ? "gaussian" : "t3_scaled")
      << "\nscenario_seed=" << s.seed << "\ngraph.kind=" << graph_kind_name(s.graph.kind)
      << "\ngraph.cluster_size=" << s.graph.cluster_size << "\ngraph.edge_weight=" << fmt(s.graph.edge_weight)
      << "\ngraph.extra_edges=" << s.graph.extra_edges << "\ngraph.max_degree=" << s.graph.max_degree
      << "\ngraph.load=" << fmt(s.graph.load) << "\ngraph.compound_rho=" << fmt(s.graph.compound_rho) << '\n';
  if (s.misspecify)
    out << "misspecify.observed_p=" << s.misspecify->observed_p
        << "\nmisspecify.observed_true=" << s.misspecify->observed_true << '\n';
  out << "beta0_grid=";
  for (std::size_t i = 0; i < cfg.beta0_grid.size(); ++i) out << (i ? "," : "") << fmt(cfg.beta0_grid[i]);
  out << "\nmethods=";
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) out << (i ? "," : "") << to_string(cfg.methods[i]);
  out << "\nn_reps=" << cfg.n_reps << "\nlevel=" << fmt(cfg.level) << "\nseed=" << cfg.seed
      << "\nbootstrap_b=" << cfg.bootstrap_b << "\nmax_fail_fraction=" << fmt(cfg.max_fail_fraction)
      << "\nlambda_scheme=" << (cfg.inference.lambda_scheme == PenaltyScheme::quantile ? "quantile" : "universal")
      << "\npenalize_direct=" << (cfg.inference.penalize_direct ? "true" : "false")
      << "\nraise_tau=" << (cfg.inference.raise_tau_if_infeasible ? "true" : "false") << '\n';
  if (cfg.inference.tau) out << "tau=" << fmt(*cfg.inference.tau) << '\n';
  if (cfg.inference.lambda0) out << "lambda0=" << fmt(*cfg.inference.lambda0) << '\n';
  return out.str();
}

}  // namespace hdmed
