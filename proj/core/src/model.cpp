#include "boxcox/model.hpp"

#include <algorithm>
#include <cmath>

#include "boxcox/errors.hpp"
#include "boxcox/probit_kernel.hpp"

namespace boxcox {

void Dataset::validate() const {
  if (X.rows() != y.size())
    throw invalid_input("dataset: X and y row counts differ");
  if (X.rows() < 2) throw invalid_input("dataset: need at least 2 rows");
  if (X.cols() < 1) throw invalid_input("dataset: need at least 1 column");
  if (!X.allFinite() || !y.allFinite())
    throw invalid_input("dataset: non-finite entries");
}

ThresholdSet compute_thresholds(const Eigen::VectorXd& y, int num_thresholds) {
  const Eigen::Index n = y.size();
  if (num_thresholds < 1) throw invalid_input("thresholds: K must be >= 1");
  if (n < num_thresholds + 1)
    throw invalid_input("thresholds: need n >= K + 1 observations");

  std::vector<double> sorted(y.data(), y.data() + n);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back())
    throw invalid_input("thresholds: fewer than 2 distinct response values");

  std::vector<double> values;
  values.reserve(num_thresholds);
  for (int k = 1; k <= num_thresholds; ++k) {
    const double q = static_cast<double>(k) / (num_thresholds + 1);
    // Type-1 quantile: order statistic ceil(q * n), 1-based.
    const auto idx = static_cast<Eigen::Index>(
        std::ceil(q * static_cast<double>(n)));
    values.push_back(sorted[std::min<Eigen::Index>(idx, n) - 1]);
  }
  values.erase(std::unique(values.begin(), values.end()), values.end());

  ThresholdSet out;
  out.requested = num_thresholds;
  out.collapsed = static_cast<int>(values.size()) < num_thresholds;
  if (out.collapsed)
    out.warning = "tied responses collapsed " +
                  std::to_string(num_thresholds) + " thresholds to " +
                  std::to_string(values.size());
  out.values = Eigen::Map<Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
  return out;
}

CompositeDesign dichotomize(const Eigen::VectorXd& y,
                            const Eigen::VectorXd& thresholds,
                            const Eigen::VectorXd& weights) {
  const Eigen::Index n = y.size();
  const Eigen::Index num_layers = thresholds.size();
  if (num_layers < 1) throw invalid_input("dichotomize: no thresholds");
  if (weights.size() != num_layers)
    throw invalid_input("dichotomize: weights/thresholds length mismatch");
  for (Eigen::Index k = 1; k < num_layers; ++k)
    if (!(thresholds[k] > thresholds[k - 1]))
      throw invalid_input("dichotomize: thresholds must be strictly increasing");
  if ((weights.array() <= 0.0).any())
    throw invalid_input("dichotomize: weights must be positive");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw invalid_input("dichotomize: weights must sum to 1");

  CompositeDesign design;
  design.thresholds = thresholds;
  design.weights = weights;
  design.labels.resize(n, num_layers);
  design.signs.resize(n, num_layers);
  for (Eigen::Index k = 0; k < num_layers; ++k) {
    Eigen::Index ones = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool hit = y[i] >= thresholds[k];
      design.labels(i, k) = hit ? 1.0 : 0.0;
      design.signs(i, k) = hit ? 1.0 : -1.0;
      ones += hit;
    }
    if (ones == 0 || ones == n)
      throw invalid_input("dichotomize: layer " + std::to_string(k + 1) +
                          " is degenerate (all labels equal)");
  }
  return design;
}

CompositeDesign make_composite_design(const Eigen::VectorXd& y,
                                      int num_thresholds) {
  const ThresholdSet ts = compute_thresholds(y, num_thresholds);
  const Eigen::Index k = ts.values.size();
  const Eigen::VectorXd weights =
      Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  CompositeDesign design = dichotomize(y, ts.values, weights);
  design.thresholds_collapsed = ts.collapsed;
  design.warning = ts.warning;
  return design;
}

Eigen::ArrayXXd compute_margins(const CompositeDesign& design,
                                const Eigen::MatrixXd& X,
                                const CoefVector& coef) {
  if (X.cols() != coef.beta.size())
    throw invalid_input("margins: X/beta dimension mismatch");
  if (coef.intercepts.size() != design.num_layers())
    throw invalid_input("margins: intercept/layer count mismatch");
  if (X.rows() != design.num_obs())
    throw invalid_input("margins: X/design row mismatch");
  const Eigen::VectorXd xb = X * coef.beta;
  Eigen::ArrayXXd margins(design.num_obs(), design.num_layers());
  for (int k = 0; k < design.num_layers(); ++k)
    margins.col(k) =
        design.signs.col(k) * (xb.array() - coef.intercepts[k]);
  return margins;
}

double composite_likelihood(const CompositeDesign& design,
                            const Eigen::MatrixXd& X, const CoefVector& coef) {
  const Eigen::ArrayXXd margins = compute_margins(design, X, coef);
  const double inv_n = 1.0 / static_cast<double>(design.num_obs());
  double total = 0.0;
  for (int k = 0; k < design.num_layers(); ++k) {
    double layer = 0.0;
    for (Eigen::Index i = 0; i < margins.rows(); ++i)
      layer += probit_loss(margins(i, k));
    total += design.weights[k] * layer;
  }
  return -total * inv_n;
}

Eigen::VectorXd composite_score(const CompositeDesign& design,
                                const Eigen::MatrixXd& X,
                                const CoefVector& coef,
                                const std::vector<int>& beta_columns) {
  for (int j : beta_columns)
    if (j < 0 || j >= X.cols())
      throw invalid_input("composite_score: column index out of range");
  const Eigen::ArrayXXd margins = compute_margins(design, X, coef);
  const int num_layers = design.num_layers();
  const Eigen::Index n = design.num_obs();

  // Per-observation weighted residual: sum_k w_k * (-L'(r_ik)) * sign_ik,
  // which equals sum_k w_k h'(eta_ik)(label_ik - Phi(eta_ik)).
  Eigen::VectorXd residual = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd intercept_score(num_layers);
  for (int k = 0; k < num_layers; ++k) {
    double layer_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g =
          -probit_loss_grad(margins(i, k)) * design.signs(i, k);
      residual[i] += design.weights[k] * g;
      layer_sum += g;
    }
    // Intercept slots enter the layer design with a -1 column.
    intercept_score[k] = -design.weights[k] * layer_sum;
  }

  Eigen::VectorXd score(static_cast<Eigen::Index>(beta_columns.size()) +
                        num_layers);
  for (std::size_t c = 0; c < beta_columns.size(); ++c)
    score[static_cast<Eigen::Index>(c)] = X.col(beta_columns[c]).dot(residual);
  score.tail(num_layers) = intercept_score;
  return score;
}

Eigen::VectorXd intercept_only_fit(const CompositeDesign& design) {
  const double n = static_cast<double>(design.num_obs());
  Eigen::VectorXd intercepts(design.num_layers());
  for (int k = 0; k < design.num_layers(); ++k) {
    const double mean_label = design.labels.col(k).sum() / n;
    intercepts[k] = -normal_quantile(mean_label);
  }
  return intercepts;
}

}  // namespace boxcox
