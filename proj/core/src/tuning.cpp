#include "boxcox/tuning.hpp"

#include <cmath>
#include <limits>

#include "boxcox/errors.hpp"

namespace boxcox {

void LambdaPath::validate() const {
  if (values.size() < 1) throw invalid_input("lambda path: empty");
  if ((values.array() <= 0.0).any())
    throw invalid_input("lambda path: values must be positive");
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (!(values[i] < values[i - 1]))
      throw invalid_input("lambda path: values must be strictly decreasing");
}

LambdaPath make_log_grid(double lambda_max, double lambda_min_ratio,
                         int count) {
  if (count < 2) throw invalid_input("lambda grid: count must be >= 2");
  if (!(lambda_max > 0.0)) throw invalid_input("lambda grid: lambda_max <= 0");
  if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0))
    throw invalid_input("lambda grid: min ratio must be in (0, 1)");
  const double log_max = std::log(lambda_max);
  const double log_min = std::log(lambda_max * lambda_min_ratio);
  LambdaPath path;
  path.values.resize(count);
  for (int i = 0; i < count; ++i) {
    const double frac = static_cast<double>(i) / (count - 1);
    path.values[i] = std::exp(log_max + frac * (log_min - log_max));
  }
  path.validate();
  return path;
}

LambdaPath lambda_grid(const Eigen::MatrixXd& X, const CompositeDesign& design,
                       const std::vector<int>& tested, int count,
                       double lambda_min_ratio) {
  CoefVector null_fit = CoefVector::zero(X.cols(), design.num_layers());
  null_fit.intercepts = intercept_only_fit(design);

  std::vector<char> mask(static_cast<std::size_t>(X.cols()), 0);
  for (int j : tested) mask[static_cast<std::size_t>(j)] = 1;
  std::vector<int> penalized;
  for (int j = 0; j < X.cols(); ++j)
    if (!mask[static_cast<std::size_t>(j)]) penalized.push_back(j);
  if (penalized.empty())
    throw invalid_input("lambda grid: no penalized coordinates");

  const Eigen::VectorXd score =
      composite_score(design, X, null_fit, penalized);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  const double lambda_max =
      (score.head(static_cast<Eigen::Index>(penalized.size())) * inv_n)
          .cwiseAbs()
          .maxCoeff();
  if (!(lambda_max > 0.0))
    throw numerical_error("all penalized score components vanish at the null fit",
                          "lambda_grid");
  return make_log_grid(lambda_max, lambda_min_ratio, count);
}

double gic_constant(Eigen::Index n, Eigen::Index p) {
  const double log_n = std::log(static_cast<double>(n));
  const double log_p = std::log(static_cast<double>(p));
  return std::max(log_n, std::log(log_n) * log_p);
}

double gic_score(const FitResult& fit, Eigen::Index n, Eigen::Index p,
                 double likelihood_value) {
  const auto sparsity =
      static_cast<double>((fit.coef.beta.array() != 0.0).count());
  return -static_cast<double>(n) * likelihood_value +
         gic_constant(n, p) * sparsity;
}

SelectionResult select_lambda(const Eigen::MatrixXd& X,
                              const CompositeDesign& design,
                              const LinearHypothesis* hypothesis,
                              bool constrained, const LambdaPath& path,
                              const SolverConfig& config) {
  path.validate();
  if (constrained && hypothesis == nullptr)
    throw invalid_input("select_lambda: constrained selection needs a hypothesis");
  const std::vector<int> tested =
      hypothesis != nullptr ? hypothesis->indices : std::vector<int>{};

  SelectionResult sel;
  sel.criterion_values.resize(path.count());
  sel.criterion_values.setConstant(std::numeric_limits<double>::quiet_NaN());

  CoefVector warm;
  Eigen::VectorXd warm_dual;
  bool have_warm = false;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < path.count(); ++i) {
    const double lambda = path.values[i];
    FitResult fit;
    try {
      if (constrained)
        fit = fit_constrained(X, design, *hypothesis, lambda, config,
                              have_warm ? &warm : nullptr,
                              have_warm ? &warm_dual : nullptr);
      else
        fit = fit_unconstrained(X, design, tested, lambda, config,
                                have_warm ? &warm : nullptr);
    } catch (const numerical_error&) {
      ++sel.failures;
      continue;
    }
    warm = fit.coef;
    if (constrained) warm_dual = fit.dual;
    have_warm = true;

    const double criterion = gic_score(fit, X.rows(), X.cols(), fit.likelihood);
    sel.criterion_values[i] = criterion;
    if (criterion < best) {
      best = criterion;
      sel.best_index = i;
      sel.best_lambda = lambda;
      sel.best_fit = std::move(fit);
    }
  }
  if (sel.best_index < 0)
    throw numerical_error("every fit on the lambda path failed",
                          "select_lambda");
  return sel;
}

}  // namespace boxcox
