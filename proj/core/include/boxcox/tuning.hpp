#pragma once

#include <Eigen/Dense>
#include <vector>

#include "boxcox/model.hpp"
#include "boxcox/solver.hpp"

namespace boxcox {

/// Strictly decreasing, log-spaced penalty levels.
struct LambdaPath {
  Eigen::VectorXd values;

  int count() const { return static_cast<int>(values.size()); }
  void validate() const;
};

/// Log-spaced grid from lambda_max down to lambda_min_ratio * lambda_max.
LambdaPath make_log_grid(double lambda_max, double lambda_min_ratio, int count);

/// Data-driven grid: lambda_max is the largest penalized score component
/// (per observation) at the null fit beta = 0, b = intercept-only MLE.
LambdaPath lambda_grid(const Eigen::MatrixXd& X, const CompositeDesign& design,
                       const std::vector<int>& tested, int count,
                       double lambda_min_ratio = 0.01);

/// c_n = max{log n, log(log n) log p}.
double gic_constant(Eigen::Index n, Eigen::Index p);

/// -n M_n + c_n ||beta||_0, counting every nonzero beta entry (tested
/// coordinates included). Relies on the solver's exact zeros.
double gic_score(const FitResult& fit, Eigen::Index n, Eigen::Index p,
                 double likelihood_value);

struct SelectionResult {
  double best_lambda = 0.0;
  FitResult best_fit;
  Eigen::VectorXd criterion_values;  // aligned with the path
  int best_index = -1;
  int failures = 0;
};

/// Fit every lambda on the path (warm-started from the previous, larger
/// lambda) and return the GIC minimizer; ties break toward larger lambda.
/// Pass constrained = true to select the linearly-constrained estimator.
SelectionResult select_lambda(const Eigen::MatrixXd& X,
                              const CompositeDesign& design,
                              const LinearHypothesis* hypothesis,
                              bool constrained, const LambdaPath& path,
                              const SolverConfig& config);

}  // namespace boxcox
