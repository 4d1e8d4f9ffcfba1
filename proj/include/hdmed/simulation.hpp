#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hdmed/core_stats.hpp"
#include "hdmed/mediation.hpp"

namespace hdmed {

enum class ErrorDist { gaussian, t3_scaled };

enum class GraphKind {
  chain_clusters,      // disjoint clusters, each a chain plus optional extra edges
  empty,               // identity precision
  compound_symmetric,  // dense precision with constant off-diagonal
};

// Parameters of the sparse precision matrix behind the mediator noise.
struct GraphSpec {
  GraphKind kind = GraphKind::chain_clusters;
  int cluster_size = 10;
  double edge_weight = 0.3;
  int extra_edges = 0;     // random extra edges attempted per cluster
  int max_degree = 4;      // cap on edges per node in the precision graph
  double load = 0.0;       // diagonal load added before the first PD check
  double compound_rho = 0.8;
};

struct PrecisionGraph {
  MatrixXd precision;  // inverse of sigma_e, same sparsity as the graph
  MatrixXd sigma_e;    // unit diagonal
  double load = 0.0;   // diagonal load that was finally applied
  int edges = 0;
};

PrecisionGraph make_precision_graph(int p, const GraphSpec& spec, std::uint64_t seed);

struct Misspecification {
  int observed_p = 350;
  int observed_true = 4;
};

struct SimulationScenario {
  int n = 300;
  int p = 500;
  int q = 1;
  MediationMode mode = MediationMode::complete;
  double alpha1 = 0.0;         // direct effect, ignored in complete mode
  int n_true_mediators = 1;
  int n_nonzero_gamma = 15;
  int n_nonzero_alpha0 = 15;
  double alpha0_value = 1.0;
  double c = 0.0;              // indirect-effect scale: beta0 = c gamma^T a0
  double sigma1_sq = 5.0;      // variance of the outcome error
  ErrorDist error_dist = ErrorDist::gaussian;
  GraphSpec graph;
  std::optional<Misspecification> misspecify;
  std::uint64_t seed = 20240101;  // fixes supports, gamma and the graph
};

// Fixed parameters of a scenario; shared by every replication.
struct SimulationTruth {
  VectorXd beta0;        // q
  VectorXd alpha0;       // p
  VectorXd alpha1;       // q
  MatrixXd gamma;        // p x q
  double c = 0.0;
  MatrixXd sigma_e;      // p x p
  MatrixXd precision_e;  // p x p
  MatrixXd chol_e;       // lower Cholesky factor of sigma_e
  std::vector<int> gamma_support;
  std::vector<int> alpha0_support;
  std::vector<int> true_mediators;
  std::vector<int> observed;  // observed mediator columns (all when correctly specified)
};

// Throws DataError on inconsistent counts.
void validate(const SimulationScenario& scn);

SimulationTruth build_truth(const SimulationScenario& scn);

// One replication (raw, uncentered) drawn from the scenario.
Dataset draw(const SimulationScenario& scn, const SimulationTruth& truth, std::uint64_t rep_seed);

// build_truth followed by draw with a stream derived from scn.seed.
std::pair<Dataset, SimulationTruth> generate(const SimulationScenario& scn);

// Value of c giving the requested indirect effect for a single exposure.
double c_for_beta0(const SimulationScenario& scn, double beta0);

struct PopulationMoments {
  MatrixXd sigma_ss;
  MatrixXd sigma_sg;
  MatrixXd sigma_gg;
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
};

PopulationMoments population_moments(const SimulationTruth& truth, const SimulationScenario& scn);

struct PopulationVariances {
  MatrixXd var_complete;    // asymptotic n var of the complete-mediation estimator
  MatrixXd var_ols;         // asymptotic n var of OLS of Y on S
  MatrixXd var_incomplete;  // asymptotic n var of b_hat (indirect block)
};

PopulationVariances population_variance_oracle(const SimulationTruth& truth, const SimulationScenario& scn);

enum class SimMethod { proposed_incomplete, proposed_complete, ols, naive };

const char* to_string(SimMethod m);
SimMethod sim_method_from_string(const std::string& s);

struct ExperimentConfig {
  SimulationScenario scenario;
  std::vector<double> beta0_grid{0.0};  // targets for q = 1; c is solved per cell
  std::vector<SimMethod> methods{SimMethod::proposed_complete, SimMethod::ols};
  int n_reps = 200;
  double level = 0.95;
  std::uint64_t seed = 1;
  int threads = 1;
  int bootstrap_b = 500;        // naive method only
  double max_fail_fraction = 0.05;
  InferenceConfig inference;    // tau, lambda scheme for the proposed methods
};

struct MetricSummary {
  double value = 0.0;
  double mc_se = 0.0;
};

struct CellReport {
  double beta0 = 0.0;
  double c = 0.0;
  SimMethod method = SimMethod::proposed_complete;
  int n_reps = 0;     // successful replications
  int n_failed = 0;
  MetricSummary coverage;
  MetricSummary power;
  MetricSummary mean_ci_length;
  MetricSummary risk;
  MetricSummary mean_variance;  // mean of n * estimated variance
};

// Per replication record, kept for post-hoc checks.
struct RepRecord {
  bool ok = false;
  double estimate = 0.0;
  double variance = 0.0;  // estimated variance (already / n)
  double lower = 0.0;
  double upper = 0.0;
  double p_value = 1.0;
};

struct SimulationReport {
  ExperimentConfig config;
  std::vector<CellReport> cells;  // grid-major, then method order
  // records[cell][method][rep]
  std::vector<std::vector<std::vector<RepRecord>>> records;
  double runtime_seconds = 0.0;
};

SimulationReport run_experiment(const ExperimentConfig& cfg);

// CSV: one row per grid cell x method x metric. Contains no timing, so it is
// reproducible byte for byte from the configuration.
std::string report_csv(const SimulationReport& report);

// Plain key=value configuration ('#' starts a comment). Unknown keys throw ParseError.
ExperimentConfig parse_experiment_config(const std::string& text);
std::string format_experiment_config(const ExperimentConfig& cfg);

}  // namespace hdmed
