#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "boxcox/model.hpp"
#include "boxcox/solver.hpp"
#include "boxcox/tuning.hpp"

namespace boxcox {

/// Column order shared by all block vectors/matrices: tested coordinates
/// in user order, then active-set coordinates ascending, then the K
/// intercept slots.
struct BlockLayout {
  std::vector<int> beta_cols;
  int num_layers = 0;

  Eigen::Index dim() const {
    return static_cast<Eigen::Index>(beta_cols.size()) + num_layers;
  }
};

BlockLayout make_block_layout(const std::vector<int>& tested,
                              const std::vector<int>& active, int num_layers);

/// Plug-in sensitivity matrix: (1/n) sum_k w_k A_k' Sigma(eta_k) A_k where
/// A_k stacks the layout columns of the layer-k design.
Eigen::MatrixXd sensitivity_matrix(const Eigen::MatrixXd& X,
                                   const CompositeDesign& design,
                                   const CoefVector& coef,
                                   const BlockLayout& layout);

/// Plug-in variability matrix with cross-layer indicator-covariance terms,
/// assembled in log space and symmetrized.
Eigen::MatrixXd variability_matrix(const Eigen::MatrixXd& X,
                                   const CompositeDesign& design,
                                   const CoefVector& coef,
                                   const BlockLayout& layout);

/// All plug-in matrices needed by the tests, built at one coefficient
/// vector with one active set.
struct PluginMatrices {
  BlockLayout layout;
  Eigen::Index num_obs = 0;
  Eigen::MatrixXd sensitivity;  // d x d SPD
  Eigen::MatrixXd variability;  // d x d PSD
  Eigen::MatrixXd sandwich;     // K^{-1} V K^{-1}
  Eigen::MatrixXd psi;          // r x r: E' K^{-1} E = C Omega_mm C'
  Eigen::MatrixXd tau;          // r x r: E' K^{-1} V K^{-1} E
};

PluginMatrices build_plugin_matrices(const Eigen::MatrixXd& X,
                                     const CompositeDesign& design,
                                     const CoefVector& coef,
                                     const std::vector<int>& active,
                                     const LinearHypothesis& hypothesis);

/// Wald statistic n (C b_M - t)' psi^{-1} (C b_M - t), solved by Cholesky.
double wald_statistic(const FitResult& fit_a,
                      const LinearHypothesis& hypothesis,
                      const PluginMatrices& plugins);

/// Score statistic (1/n) S' K0^{-1} S with S and K0 built at the
/// constrained fit in [tested; active; intercepts] order.
double score_statistic(const Eigen::MatrixXd& X, const CompositeDesign& design,
                       const FitResult& fit_0,
                       const LinearHypothesis& hypothesis);

/// Composite likelihood ratio statistic 2n {M_n(a) - M_n(0)}, clamped at 0.
double lr_statistic(const Eigen::MatrixXd& X, const CompositeDesign& design,
                    const FitResult& fit_a, const FitResult& fit_0);

/// Wald variant against the sandwich (Godambe) covariance; chi-squared null.
double godambe_wald(const FitResult& fit_a, const LinearHypothesis& hypothesis,
                    const PluginMatrices& plugins);

/// Score variant with the sandwich inner matrix; chi-squared null.
double godambe_score(const Eigen::MatrixXd& X, const CompositeDesign& design,
                     const FitResult& fit_0,
                     const LinearHypothesis& hypothesis);

/// Monte-Carlo calibration of the generalized chi-squared null
/// Z' T^{1/2} Psi^{-1} T^{1/2} Z.
struct GenChisqCalibration {
  double quantile = 0.0;
  double alpha = 0.0;
  int draws = 0;
  std::uint64_t seed = 0;
  std::vector<double> sorted_draws;

  /// Monte-Carlo p-value with the add-one rule (count + 1)/(draws + 1).
  double p_value(double x) const;
};

GenChisqCalibration gen_chisq_quantile(const Eigen::MatrixXd& psi,
                                       const Eigen::MatrixXd& tau,
                                       double alpha, int draws,
                                       std::uint64_t seed, int threads = 0);

struct TestOptions {
  int num_thresholds = 19;
  Eigen::VectorXd weights;  // empty = equal weights
  SolverConfig solver{};    // penalty family/shape ride along in here
  int path_length = 50;
  double lambda_min_ratio = 0.01;
  double alpha = 0.05;
  int mc_draws = 100000;
  std::uint64_t seed = 0;
  int threads = 0;
  bool standardize = false;
};

struct TestReport {
  double t_lr = 0.0;
  double t_wald = 0.0;
  double t_score = 0.0;
  double quantile = 0.0;
  double p_lr = 1.0;
  double p_wald = 1.0;
  double p_score = 1.0;
  bool reject_lr = false;
  bool reject_wald = false;
  bool reject_score = false;
  double alpha = 0.0;
  int mc_draws = 0;
  std::vector<int> active_set_unconstrained;  // 0-based
  std::vector<int> active_set_constrained;
  std::uint64_t seed = 0;
  std::uint64_t mc_seed = 0;

  bool operator==(const TestReport&) const = default;
};

/// Full testing pipeline: dichotomize, select and fit both estimators,
/// build plug-ins, compute the three statistics, calibrate one shared
/// Monte-Carlo null, decide. Deterministic given options.seed.
TestReport run_linear_test(const Dataset& data,
                           const LinearHypothesis& hypothesis,
                           const TestOptions& options);

}  // namespace boxcox
