#include "boxcox/inference.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "boxcox/errors.hpp"
#include "boxcox/parallel.hpp"
#include "boxcox/probit_kernel.hpp"
#include "boxcox/rng.hpp"

namespace boxcox {
namespace {

template <typename F>
auto with_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const invalid_input&) {
    throw;
  } catch (const numerical_error& e) {
    if (e.stage().empty()) throw numerical_error(e.what(), stage);
    throw;
  } catch (const std::exception& e) {
    throw numerical_error(e.what(), stage);
  }
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& X,
                               const std::vector<int>& cols) {
  Eigen::MatrixXd B(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    B.col(static_cast<Eigen::Index>(c)) = X.col(cols[c]);
  return B;
}

// E = [C'; 0] in the block layout: d x r.
Eigen::MatrixXd constraint_embedding(const LinearHypothesis& hypothesis,
                                     const BlockLayout& layout) {
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(layout.dim(), hypothesis.r());
  e.topRows(hypothesis.m()) = hypothesis.C.transpose();
  return e;
}

void check_spd_or_throw(const Eigen::MatrixXd& mat, const char* name) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      mat, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (!(min_eig > 1e-12 * std::max(1.0, max_eig)))
    throw numerical_error(std::string(name) +
                          " singular to working precision; min eigenvalue " +
                          std::to_string(min_eig));
}

}  // namespace

BlockLayout make_block_layout(const std::vector<int>& tested,
                              const std::vector<int>& active, int num_layers) {
  BlockLayout layout;
  layout.beta_cols = tested;
  std::vector<int> sorted_active = active;
  std::sort(sorted_active.begin(), sorted_active.end());
  for (int j : sorted_active) {
    if (std::find(tested.begin(), tested.end(), j) != tested.end())
      throw invalid_input("block layout: active set intersects tested set");
    layout.beta_cols.push_back(j);
  }
  layout.num_layers = num_layers;
  return layout;
}

Eigen::MatrixXd sensitivity_matrix(const Eigen::MatrixXd& X,
                                   const CompositeDesign& design,
                                   const CoefVector& coef,
                                   const BlockLayout& layout) {
  const Eigen::Index n = X.rows();
  const auto q = static_cast<Eigen::Index>(layout.beta_cols.size());
  const int num_layers = layout.num_layers;
  if (num_layers != design.num_layers())
    throw invalid_input("sensitivity: layout/design layer mismatch");
  const Eigen::MatrixXd B = gather_columns(X, layout.beta_cols);
  const Eigen::VectorXd xb = X * coef.beta;

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(layout.dim(), layout.dim());
  Eigen::VectorXd sig(n);
  for (int k = 0; k < num_layers; ++k) {
    const double w = design.weights[k];
    const double bk = coef.intercepts[k];
    for (Eigen::Index i = 0; i < n; ++i) sig[i] = sigma_weight(xb[i] - bk);
    out.topLeftCorner(q, q).noalias() +=
        w * B.transpose() * sig.asDiagonal() * B;
    out.block(0, q + k, q, 1).noalias() -= w * (B.transpose() * sig);
    out(q + k, q + k) += w * sig.sum();
  }
  out /= static_cast<double>(n);
  // Mirror the (beta, intercept) strip.
  out.block(q, 0, num_layers, q) = out.block(0, q, q, num_layers).transpose();
  check_spd_or_throw(out, "sensitivity matrix");
  return out;
}

Eigen::MatrixXd variability_matrix(const Eigen::MatrixXd& X,
                                   const CompositeDesign& design,
                                   const CoefVector& coef,
                                   const BlockLayout& layout) {
  const Eigen::Index n = X.rows();
  const auto q = static_cast<Eigen::Index>(layout.beta_cols.size());
  const int num_layers = layout.num_layers;
  if (num_layers != design.num_layers())
    throw invalid_input("variability: layout/design layer mismatch");
  const Eigen::MatrixXd B = gather_columns(X, layout.beta_cols);
  const Eigen::VectorXd xb = X * coef.beta;

  // Per-layer log phi / log Phi / log Phi(-.) at eta_ik = x_i'beta - b_k.
  Eigen::ArrayXXd lphi(n, num_layers), lpos(n, num_layers), lneg(n, num_layers);
  for (int k = 0; k < num_layers; ++k) {
    const double bk = coef.intercepts[k];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eta = xb[i] - bk;
      lphi(i, k) = normal_log_pdf(eta);
      lpos(i, k) = log_normal_cdf(eta);
      lneg(i, k) = log_normal_cdf(-eta);
    }
  }

  const Eigen::Index d = layout.dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd f(n);
  Eigen::MatrixXd block(d, d);
  for (int k = 0; k < num_layers; ++k) {
    for (int k2 = k; k2 < num_layers; ++k2) {
      // Thresholds ascend with the layer index, so layer k is the smaller
      // index of the pair: the joint-indicator covariance denominator is
      // Phi(eta_k) Phi(-eta_{k2}).
      for (Eigen::Index i = 0; i < n; ++i) {
        f[i] = std::exp(lphi(i, k) + lphi(i, k2) - lpos(i, k) - lneg(i, k2));
        if (!std::isfinite(f[i]))
          throw numerical_error(
              "degenerate variability term at observation " +
              std::to_string(i + 1) + ", layer pair (" + std::to_string(k + 1) +
              ", " + std::to_string(k2 + 1) + ")");
      }
      const double w2 = design.weights[k] * design.weights[k2];
      block.setZero();
      block.topLeftCorner(q, q).noalias() =
          B.transpose() * f.asDiagonal() * B;
      block.block(0, q + k2, q, 1).noalias() = -(B.transpose() * f);
      block.block(q + k, 0, 1, q).noalias() = -(f.transpose() * B);
      block(q + k, q + k2) = f.sum();
      out += w2 * block;
      if (k2 != k) out += w2 * block.transpose();
    }
  }
  out /= static_cast<double>(n);
  out = 0.5 * (out + out.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out,
                                                     Eigen::EigenvaluesOnly);
  const double trace_scale = std::max(1.0, out.trace());
  if (eig.eigenvalues().minCoeff() < -1e-8 * trace_scale)
    throw numerical_error("variability matrix is not PSD within slack; min eigenvalue " +
                          std::to_string(eig.eigenvalues().minCoeff()));
  return out;
}

PluginMatrices build_plugin_matrices(const Eigen::MatrixXd& X,
                                     const CompositeDesign& design,
                                     const CoefVector& coef,
                                     const std::vector<int>& active,
                                     const LinearHypothesis& hypothesis) {
  PluginMatrices plugins;
  plugins.layout =
      make_block_layout(hypothesis.indices, active, design.num_layers());
  plugins.num_obs = X.rows();
  plugins.sensitivity = sensitivity_matrix(X, design, coef, plugins.layout);
  plugins.variability = variability_matrix(X, design, coef, plugins.layout);

  Eigen::LLT<Eigen::MatrixXd> llt(plugins.sensitivity);
  if (llt.info() != Eigen::Success)
    throw numerical_error("sensitivity matrix is not positive definite");
  const Eigen::MatrixXd embed = constraint_embedding(hypothesis, plugins.layout);
  const Eigen::MatrixXd kinv_e = llt.solve(embed);
  plugins.psi = embed.transpose() * kinv_e;
  plugins.psi = 0.5 * (plugins.psi + plugins.psi.transpose()).eval();
  plugins.sandwich = llt.solve(llt.solve(plugins.variability).transpose());
  plugins.sandwich = 0.5 * (plugins.sandwich + plugins.sandwich.transpose()).eval();
  plugins.tau = embed.transpose() * plugins.sandwich * embed;
  plugins.tau = 0.5 * (plugins.tau + plugins.tau.transpose()).eval();
  return plugins;
}

double wald_statistic(const FitResult& fit_a,
                      const LinearHypothesis& hypothesis,
                      const PluginMatrices& plugins) {
  const Eigen::VectorXd res = hypothesis.residual(fit_a.coef.beta);
  Eigen::LLT<Eigen::MatrixXd> llt(plugins.psi);
  if (llt.info() != Eigen::Success)
    throw numerical_error("psi matrix is not positive definite", "wald");
  const double value =
      static_cast<double>(plugins.num_obs) * res.dot(llt.solve(res));
  return std::max(value, 0.0);
}

double score_statistic(const Eigen::MatrixXd& X, const CompositeDesign& design,
                       const FitResult& fit_0,
                       const LinearHypothesis& hypothesis) {
  const BlockLayout layout = make_block_layout(
      hypothesis.indices, fit_0.active_set, design.num_layers());
  const Eigen::VectorXd score =
      composite_score(design, X, fit_0.coef, layout.beta_cols);
  const Eigen::MatrixXd k0 = sensitivity_matrix(X, design, fit_0.coef, layout);
  Eigen::LLT<Eigen::MatrixXd> llt(k0);
  if (llt.info() != Eigen::Success)
    throw numerical_error("sensitivity matrix is not positive definite",
                          "score");
  const double value =
      score.dot(llt.solve(score)) / static_cast<double>(X.rows());
  return std::max(value, 0.0);
}

double lr_statistic(const Eigen::MatrixXd& X, const CompositeDesign& design,
                    const FitResult& fit_a, const FitResult& fit_0) {
  if (fit_a.coef.beta.size() != fit_0.coef.beta.size() ||
      fit_a.coef.intercepts.size() != fit_0.coef.intercepts.size() ||
      fit_a.coef.intercepts.size() != design.num_layers())
    throw invalid_input("lr_statistic: fits built on different designs");
  const double lik_a = composite_likelihood(design, X, fit_a.coef);
  const double lik_0 = composite_likelihood(design, X, fit_0.coef);
  const double value = 2.0 * static_cast<double>(X.rows()) * (lik_a - lik_0);
  return std::max(value, 0.0);
}

double godambe_wald(const FitResult& fit_a, const LinearHypothesis& hypothesis,
                    const PluginMatrices& plugins) {
  const Eigen::VectorXd res = hypothesis.residual(fit_a.coef.beta);
  Eigen::LLT<Eigen::MatrixXd> llt(plugins.tau);
  if (llt.info() != Eigen::Success)
    throw numerical_error("sandwich tau matrix is not positive definite",
                          "godambe_wald");
  const double value =
      static_cast<double>(plugins.num_obs) * res.dot(llt.solve(res));
  return std::max(value, 0.0);
}

double godambe_score(const Eigen::MatrixXd& X, const CompositeDesign& design,
                     const FitResult& fit_0,
                     const LinearHypothesis& hypothesis) {
  const PluginMatrices plugins = build_plugin_matrices(
      X, design, fit_0.coef, fit_0.active_set, hypothesis);
  const Eigen::VectorXd score =
      composite_score(design, X, fit_0.coef, plugins.layout.beta_cols);
  Eigen::LLT<Eigen::MatrixXd> llt(plugins.sensitivity);
  if (llt.info() != Eigen::Success)
    throw numerical_error("sensitivity matrix is not positive definite",
                          "godambe_score");
  const Eigen::MatrixXd embed =
      constraint_embedding(hypothesis, plugins.layout);
  const Eigen::VectorXd projected = embed.transpose() * llt.solve(score);
  Eigen::LLT<Eigen::MatrixXd> tau_llt(plugins.tau);
  if (tau_llt.info() != Eigen::Success)
    throw numerical_error("sandwich tau matrix is not positive definite",
                          "godambe_score");
  const double value =
      projected.dot(tau_llt.solve(projected)) / static_cast<double>(X.rows());
  return std::max(value, 0.0);
}

double GenChisqCalibration::p_value(double x) const {
  const auto it =
      std::lower_bound(sorted_draws.begin(), sorted_draws.end(), x);
  const auto count = static_cast<double>(sorted_draws.end() - it);
  return (count + 1.0) / (static_cast<double>(sorted_draws.size()) + 1.0);
}

GenChisqCalibration gen_chisq_quantile(const Eigen::MatrixXd& psi,
                                       const Eigen::MatrixXd& tau,
                                       double alpha, int draws,
                                       std::uint64_t seed, int threads) {
  if (psi.rows() != psi.cols() || tau.rows() != tau.cols() ||
      psi.rows() != tau.rows())
    throw invalid_input("gen_chisq: psi and tau must be square and conformable");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw invalid_input("gen_chisq: alpha must be in (0, 1)");
  if (draws < 1000) throw invalid_input("gen_chisq: need at least 1000 draws");

  // Symmetric square root of tau with clamped spectrum.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tau_eig(
      0.5 * (tau + tau.transpose()));
  const double tau_tol = 1e-8 * std::max(1.0, tau.trace());
  Eigen::VectorXd tau_vals = tau_eig.eigenvalues();
  for (Eigen::Index i = 0; i < tau_vals.size(); ++i) {
    if (tau_vals[i] < -tau_tol)
      throw numerical_error("tau matrix has a negative eigenvalue " +
                            std::to_string(tau_vals[i]), "gen_chisq");
    tau_vals[i] = std::max(tau_vals[i], 0.0);
  }
  const Eigen::MatrixXd tau_half = tau_eig.eigenvectors() *
                                   tau_vals.cwiseSqrt().asDiagonal() *
                                   tau_eig.eigenvectors().transpose();

  Eigen::LLT<Eigen::MatrixXd> psi_llt(0.5 * (psi + psi.transpose()));
  if (psi_llt.info() != Eigen::Success)
    throw numerical_error("psi matrix is not positive definite", "gen_chisq");

  Eigen::MatrixXd shape = tau_half * psi_llt.solve(tau_half);
  shape = 0.5 * (shape + shape.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> shape_eig(
      shape, Eigen::EigenvaluesOnly);
  Eigen::VectorXd coeffs = shape_eig.eigenvalues().cwiseMax(0.0);
  // Z' A Z = sum_i coeff_i z_i^2 for A's eigenvalues coeff_i.

  GenChisqCalibration calib;
  calib.alpha = alpha;
  calib.draws = draws;
  calib.seed = seed;
  calib.sorted_draws.resize(static_cast<std::size_t>(draws));

  constexpr int kChunk = 8192;
  const int num_chunks = (draws + kChunk - 1) / kChunk;
  const Eigen::Index r = coeffs.size();
  parallel_for(0, num_chunks, threads, [&](int chunk) {
    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(chunk)));
    const int begin = chunk * kChunk;
    const int end = std::min(draws, begin + kChunk);
    for (int i = begin; i < end; ++i) {
      double value = 0.0;
      for (Eigen::Index j = 0; j < r; ++j) {
        const double z = rng.normal();
        value += coeffs[j] * z * z;
      }
      calib.sorted_draws[static_cast<std::size_t>(i)] = value;
    }
  });
  std::sort(calib.sorted_draws.begin(), calib.sorted_draws.end());

  const auto idx = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(draws)));
  calib.quantile = calib.sorted_draws[std::min<std::size_t>(idx, draws) - 1];
  return calib;
}

namespace {

// Column centering/scaling for fitting; coefficients are mapped back to
// the original scale before any inference happens.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& X) {
    Standardizer s;
    const double n = static_cast<double>(X.rows());
    s.mean = X.colwise().mean();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double var = (X.col(j).array() - s.mean[j]).square().sum() / n;
      s.scale[j] = std::sqrt(var);
      if (!(s.scale[j] > 0.0))
        throw invalid_input("standardize: column " + std::to_string(j + 1) +
                            " has zero variance");
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    return (X.rowwise() - mean.transpose()).array().rowwise() /
           scale.transpose().array();
  }

  LinearHypothesis transform(const LinearHypothesis& hypothesis) const {
    LinearHypothesis scaled = hypothesis;
    for (Eigen::Index c = 0; c < scaled.C.cols(); ++c)
      scaled.C.col(c) /= scale[hypothesis.indices[static_cast<std::size_t>(c)]];
    return scaled;
  }

  void map_back(FitResult& fit) const {
    for (Eigen::Index j = 0; j < fit.coef.beta.size(); ++j)
      if (fit.coef.beta[j] != 0.0) fit.coef.beta[j] /= scale[j];
    const double shift = mean.dot(fit.coef.beta);
    fit.coef.intercepts.array() += shift;
  }
};

}  // namespace

TestReport run_linear_test(const Dataset& data,
                           const LinearHypothesis& hypothesis,
                           const TestOptions& options) {
  data.validate();
  hypothesis.validate(data.p());
  options.solver.validate();
  if (!(options.alpha > 0.0 && options.alpha < 1.0))
    throw invalid_input("test: alpha must be in (0, 1)");
  if (options.path_length < 2)
    throw invalid_input("test: path length must be >= 2");

  const CompositeDesign design = with_stage("dichotomize", [&]() {
    if (options.weights.size() > 0) {
      const ThresholdSet ts =
          compute_thresholds(data.y, options.num_thresholds);
      if (ts.values.size() != options.weights.size())
        throw invalid_input(
            "test: explicit weights length does not match threshold count");
      return dichotomize(data.y, ts.values, options.weights);
    }
    return make_composite_design(data.y, options.num_thresholds);
  });

  Eigen::MatrixXd x_fit;
  LinearHypothesis hyp_fit = hypothesis;
  Standardizer standardizer;
  const bool standardize = options.standardize || options.solver.standardize;
  if (standardize) {
    standardizer = Standardizer::fit(data.X);
    x_fit = standardizer.apply(data.X);
    hyp_fit = standardizer.transform(hypothesis);
  }
  const Eigen::MatrixXd& x_ref = standardize ? x_fit : data.X;

  const LambdaPath path = with_stage("lambda_grid", [&]() {
    return lambda_grid(x_ref, design, hypothesis.indices, options.path_length,
                       options.lambda_min_ratio);
  });

  SelectionResult sel_a = with_stage("fit_unconstrained", [&]() {
    return select_lambda(x_ref, design, &hyp_fit, false, path, options.solver);
  });
  SelectionResult sel_0 = with_stage("fit_constrained", [&]() {
    return select_lambda(x_ref, design, &hyp_fit, true, path, options.solver);
  });
  FitResult fit_a = std::move(sel_a.best_fit);
  FitResult fit_0 = std::move(sel_0.best_fit);
  if (standardize) {
    standardizer.map_back(fit_a);
    standardizer.map_back(fit_0);
  }

  const PluginMatrices plugins = with_stage("plugin_matrices", [&]() {
    return build_plugin_matrices(data.X, design, fit_a.coef, fit_a.active_set,
                                 hypothesis);
  });

  TestReport report;
  report.t_wald = with_stage("wald", [&]() {
    return wald_statistic(fit_a, hypothesis, plugins);
  });
  report.t_score = with_stage("score", [&]() {
    return score_statistic(data.X, design, fit_0, hypothesis);
  });
  report.t_lr = with_stage("likelihood_ratio", [&]() {
    return lr_statistic(data.X, design, fit_a, fit_0);
  });

  report.mc_seed = Rng::mix(options.seed, 0x67656e63ULL);
  const GenChisqCalibration calib = with_stage("gen_chisq", [&]() {
    return gen_chisq_quantile(plugins.psi, plugins.tau, options.alpha,
                              options.mc_draws, report.mc_seed,
                              options.threads);
  });

  report.quantile = calib.quantile;
  report.p_lr = calib.p_value(report.t_lr);
  report.p_wald = calib.p_value(report.t_wald);
  report.p_score = calib.p_value(report.t_score);
  report.reject_lr = report.t_lr > calib.quantile;
  report.reject_wald = report.t_wald > calib.quantile;
  report.reject_score = report.t_score > calib.quantile;
  report.alpha = options.alpha;
  report.mc_draws = options.mc_draws;
  report.active_set_unconstrained = fit_a.active_set;
  report.active_set_constrained = fit_0.active_set;
  report.seed = options.seed;
  return report;
}

}  // namespace boxcox
