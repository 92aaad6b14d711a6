#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "boxcox/model.hpp"
#include "boxcox/penalties.hpp"

namespace boxcox {

/// Linear hypothesis C beta_M = t on a subset M of coefficients.
/// Indices are 0-based here; user-facing configs are 1-based.
struct LinearHypothesis {
  std::vector<int> indices;  // tested set M, distinct
  Eigen::MatrixXd C;         // r x m, full row rank
  Eigen::VectorXd t;         // r

  Eigen::Index m() const { return static_cast<Eigen::Index>(indices.size()); }
  Eigen::Index r() const { return C.rows(); }
  void validate(Eigen::Index p) const;

  Eigen::VectorXd tested_coefficients(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd residual(const Eigen::VectorXd& beta) const;  // C beta_M - t
};

struct SolverConfig {
  PenaltySpec penalty{};
  double rho = 1.0;  // augmentation parameter
  double tol_cmd = 1e-7;
  double tol_lla = 1e-6;
  double tol_alm = 1e-6;
  int max_cmd_cycles = 10000;
  int max_lla_iters = 50;
  int max_alm_iters = 200;
  bool standardize = false;
  bool record_objective = false;  // keep per-cycle exact objective traces

  void validate() const;
};

struct FitIterations {
  int alm = 0;
  int lla = 0;
  int cmd_cycles = 0;
};

struct FitResult {
  CoefVector coef;
  double objective = 0.0;   // penalized negative likelihood -M_n + sum p_lambda
  double likelihood = 0.0;  // unpenalized M_n at the solution
  std::vector<int> active_set;  // nonzero penalized coords outside M, ascending
  double lambda = 0.0;
  Eigen::VectorXd dual;  // length r for constrained fits, empty otherwise
  double constraint_residual = std::numeric_limits<double>::quiet_NaN();
  FitIterations iterations;
  bool converged = false;
  std::vector<std::string> warnings;
  // Exact weighted-l1 objective after each CMD cycle, one trace per CMD
  // solve; only populated when SolverConfig::record_objective is set.
  std::vector<std::vector<double>> objective_traces;
};

/// S(z, t) = (|z| - t)_+ sgn(z).
inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

/// Mutable coordinate-descent state for one fit: coefficients, linear
/// predictor, margins (implicitly), signed loss-gradient cache, and the
/// constraint slackness vector tau = rho (C beta_M - t) + v.
///
/// A single instance is not thread-safe; distinct instances may run
/// concurrently over shared read-only X/design.
class CmdState {
 public:
  CmdState(const Eigen::MatrixXd& X, const CompositeDesign& design,
           std::vector<int> unpenalized, const LinearHypothesis* hypothesis,
           double rho, CoefVector init,
           Eigen::VectorXd dual = Eigen::VectorXd());

  /// Soft-threshold update of penalized coordinate j; returns |delta|.
  /// Zero-variance columns are skipped (flag via zero_variance_skipped()).
  double update_penalized(int j, double omega_j);

  /// Update of the idx-th unpenalized (tested) coordinate; includes the
  /// augmentation terms when a constraint is attached. Returns |delta|.
  double update_unpenalized(int idx);

  /// Update of intercept k; only layer-k margins change. Returns |delta|.
  double update_intercept(int k);

  const CoefVector& coef() const { return coef_; }
  const std::vector<int>& unpenalized() const { return unpenalized_; }
  bool constrained() const { return hypothesis_ != nullptr; }
  bool zero_variance_skipped() const { return zero_variance_skipped_; }

  /// Margins derived from the incrementally maintained linear predictor.
  Eigen::ArrayXXd margins() const;
  /// Slackness vector tau maintained incrementally across updates.
  const Eigen::VectorXd& slackness() const { return tau_; }
  Eigen::VectorXd slackness_from_scratch() const;
  Eigen::VectorXd constraint_residual() const;

  /// Replace the dual vector (ALM outer update); recomputes tau exactly.
  void set_dual(const Eigen::VectorXd& dual);
  const Eigen::VectorXd& dual() const { return dual_; }

  /// -M_n at the current state.
  double negative_likelihood() const;
  /// Exact weighted-l1 objective: -M_n + sum_j omega_j |beta_j| plus the
  /// dual and quadratic augmentation terms when constrained.
  double objective(const Eigen::VectorXd& omega) const;

 private:
  void refresh_all_layers();
  void refresh_layer(int k);
  void apply_beta_move(int j, double delta);

  const Eigen::MatrixXd& X_;
  const CompositeDesign& design_;
  std::vector<int> unpenalized_;
  std::vector<char> is_unpenalized_;  // size p mask
  const LinearHypothesis* hypothesis_;
  double rho_;

  CoefVector coef_;
  Eigen::VectorXd xb_;       // X beta, maintained incrementally
  Eigen::ArrayXXd lossgrad_;  // L'(r_ik) * sign_ik, n x K
  Eigen::VectorXd residual_;  // row sums of lossgrad_ weighted by w_k
  Eigen::VectorXd colsq_;     // (1/n) sum_i x_ij^2 per column
  Eigen::VectorXd dual_;      // v (r), empty if unconstrained
  Eigen::VectorXd tau_;       // rho (C beta_M - t) + v, empty if unconstrained
  Eigen::MatrixXd cmat_cols_; // r x m, column j = C column for unpenalized_[j]
  Eigen::VectorXd cmat_colsq_;  // squared norms of those columns
  double inv_n_ = 0.0;
  bool zero_variance_skipped_ = false;
};

struct CmdSolveResult {
  int cycles = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Cyclic CMD over (penalized, unpenalized, intercepts) until the largest
/// coefficient change in a cycle is <= tol_cmd. Uses an active-set
/// strategy: full sweeps bracket active-only sweeps, and the solve only
/// terminates on a converged full sweep.
CmdSolveResult cmd_solve(CmdState& state, const Eigen::VectorXd& omega,
                         const SolverConfig& config);

struct LlaSolveResult {
  int iterations = 0;
  int cmd_cycles = 0;
  bool converged = false;
  std::vector<std::vector<double>> objective_traces;
};

/// Local linear approximation: alternate penalty-derivative weight updates
/// with CMD solves until weights and coefficients stabilize.
LlaSolveResult lla_solve(CmdState& state, double lambda,
                         const SolverConfig& config);

/// Unconstrained partial penalized fit (LLA + CMD). `tested` coordinates
/// are left unpenalized; pass an empty list for a fully penalized fit.
FitResult fit_unconstrained(const Eigen::MatrixXd& X,
                            const CompositeDesign& design,
                            const std::vector<int>& tested, double lambda,
                            const SolverConfig& config,
                            const CoefVector* warm_start = nullptr);

/// Constrained fit via the augmented Lagrangian outer loop around LLA+CMD.
FitResult fit_constrained(const Eigen::MatrixXd& X,
                          const CompositeDesign& design,
                          const LinearHypothesis& hypothesis, double lambda,
                          const SolverConfig& config,
                          const CoefVector* warm_start = nullptr,
                          const Eigen::VectorXd* warm_dual = nullptr);

}  // namespace boxcox
