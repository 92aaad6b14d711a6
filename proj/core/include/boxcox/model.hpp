#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace boxcox {

/// Raw design matrix and continuous response.
struct Dataset {
  Eigen::MatrixXd X;  // n x p
  Eigen::VectorXd y;  // n

  void validate() const;
  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

/// Response dichotomized at K thresholds. Layers are stored as columns:
/// labels(i, k) = 1 iff y_i >= thresholds[k], signs = 2*labels - 1.
/// Thresholds are strictly increasing, weights positive and sum to 1,
/// and every layer contains both a 0 and a 1.
struct CompositeDesign {
  Eigen::VectorXd thresholds;  // K
  Eigen::VectorXd weights;     // K
  Eigen::ArrayXXd labels;      // n x K, entries in {0, 1}
  Eigen::ArrayXXd signs;       // n x K, entries in {-1, +1}
  bool thresholds_collapsed = false;  // ties reduced the requested K
  std::string warning;

  int num_layers() const { return static_cast<int>(thresholds.size()); }
  Eigen::Index num_obs() const { return labels.rows(); }
};

/// Regression coefficients plus one intercept per layer.
struct CoefVector {
  Eigen::VectorXd beta;        // p
  Eigen::VectorXd intercepts;  // K

  static CoefVector zero(Eigen::Index p, Eigen::Index k) {
    return {Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(k)};
  }
};

struct ThresholdSet {
  Eigen::VectorXd values;  // deduplicated, strictly increasing
  int requested = 0;
  bool collapsed = false;
  std::string warning;
};

/// Empirical k/(K+1) percentiles (type-1: order statistic ceil(q*n)) of y,
/// deduplicated. Exact sample values, so strictly monotone transforms of y
/// produce the transformed thresholds and bit-identical dichotomizations.
ThresholdSet compute_thresholds(const Eigen::VectorXd& y, int num_thresholds);

/// Dichotomize y at the given thresholds with the given composite weights.
/// Throws on degenerate (all-0 or all-1) layers.
CompositeDesign dichotomize(const Eigen::VectorXd& y,
                            const Eigen::VectorXd& thresholds,
                            const Eigen::VectorXd& weights);

/// Percentile thresholds + equal weights in one step.
CompositeDesign make_composite_design(const Eigen::VectorXd& y,
                                      int num_thresholds);

/// Margins r_{ik} = signs(i,k) * (x_i' beta - b_k), stored n x K.
Eigen::ArrayXXd compute_margins(const CompositeDesign& design,
                                const Eigen::MatrixXd& X,
                                const CoefVector& coef);

/// Composite probit log-likelihood M_n(beta, b) (an average; higher is
/// better). Computed through the margin loss form.
double composite_likelihood(const CompositeDesign& design,
                            const Eigen::MatrixXd& X, const CoefVector& coef);

/// Gradient of n * M_n with respect to the selected beta coordinates (in
/// the given order) followed by all K intercepts. Intercept slots carry
/// the built-in -1 design sign.
Eigen::VectorXd composite_score(const CompositeDesign& design,
                                const Eigen::MatrixXd& X,
                                const CoefVector& coef,
                                const std::vector<int>& beta_columns);

/// Per-layer intercept-only maximum likelihood: b_k = -Phi^{-1}(mean label).
Eigen::VectorXd intercept_only_fit(const CompositeDesign& design);

}  // namespace boxcox
