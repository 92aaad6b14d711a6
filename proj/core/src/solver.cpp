#include "boxcox/solver.hpp"

#include <algorithm>
#include <cmath>

#include "boxcox/errors.hpp"
#include "boxcox/probit_kernel.hpp"

namespace boxcox {

void LinearHypothesis::validate(Eigen::Index p) const {
  if (indices.empty()) throw invalid_input("hypothesis: empty tested set");
  std::vector<int> sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw invalid_input("hypothesis: tested indices must be distinct");
  if (sorted.front() < 0 || sorted.back() >= p)
    throw invalid_input("hypothesis: tested index out of range");
  if (C.cols() != m())
    throw invalid_input("hypothesis: C must have one column per tested index");
  if (C.rows() < 1 || C.rows() > C.cols())
    throw invalid_input("hypothesis: need 1 <= r <= m constraint rows");
  if (t.size() != C.rows())
    throw invalid_input("hypothesis: t length must match rows of C");
  if (!C.allFinite() || !t.allFinite())
    throw invalid_input("hypothesis: non-finite entries");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C);
  qr.setThreshold(1e-10);
  if (qr.rank() < C.rows())
    throw invalid_input("hypothesis: C does not have full row rank");
}

Eigen::VectorXd LinearHypothesis::tested_coefficients(
    const Eigen::VectorXd& beta) const {
  Eigen::VectorXd sub(m());
  for (Eigen::Index j = 0; j < m(); ++j) sub[j] = beta[indices[j]];
  return sub;
}

Eigen::VectorXd LinearHypothesis::residual(const Eigen::VectorXd& beta) const {
  return C * tested_coefficients(beta) - t;
}

void SolverConfig::validate() const {
  penalty.validate();
  if (!(rho > 0.0)) throw invalid_input("solver: rho must be > 0");
  if (!(tol_cmd > 0.0) || !(tol_lla > 0.0) || !(tol_alm > 0.0))
    throw invalid_input("solver: tolerances must be > 0");
  if (max_cmd_cycles < 1 || max_lla_iters < 1 || max_alm_iters < 1)
    throw invalid_input("solver: iteration caps must be >= 1");
}

CmdState::CmdState(const Eigen::MatrixXd& X, const CompositeDesign& design,
                   std::vector<int> unpenalized,
                   const LinearHypothesis* hypothesis, double rho,
                   CoefVector init, Eigen::VectorXd dual)
    : X_(X),
      design_(design),
      unpenalized_(std::move(unpenalized)),
      hypothesis_(hypothesis),
      rho_(rho),
      coef_(std::move(init)),
      dual_(std::move(dual)) {
  const Eigen::Index n = X_.rows();
  const Eigen::Index p = X_.cols();
  if (coef_.beta.size() != p)
    throw invalid_input("solver: init beta dimension mismatch");
  if (coef_.intercepts.size() != design_.num_layers())
    throw invalid_input("solver: init intercept dimension mismatch");
  inv_n_ = 1.0 / static_cast<double>(n);

  is_unpenalized_.assign(static_cast<std::size_t>(p), 0);
  for (int j : unpenalized_) {
    if (j < 0 || j >= p) throw invalid_input("solver: tested index out of range");
    is_unpenalized_[static_cast<std::size_t>(j)] = 1;
  }

  colsq_ = (X_.array().square().colwise().sum() * inv_n_).matrix();

  if (hypothesis_ != nullptr) {
    if (dual_.size() != hypothesis_->r())
      throw invalid_input("solver: dual dimension mismatch");
    // Columns of C lined up with the unpenalized sweep order.
    cmat_cols_.resize(hypothesis_->r(), static_cast<Eigen::Index>(unpenalized_.size()));
    for (std::size_t c = 0; c < unpenalized_.size(); ++c) {
      const auto it = std::find(hypothesis_->indices.begin(),
                                hypothesis_->indices.end(), unpenalized_[c]);
      if (it == hypothesis_->indices.end())
        throw invalid_input("solver: constrained state requires unpenalized == tested");
      cmat_cols_.col(static_cast<Eigen::Index>(c)) =
          hypothesis_->C.col(it - hypothesis_->indices.begin());
    }
    cmat_colsq_ = cmat_cols_.colwise().squaredNorm();
    tau_ = rho_ * hypothesis_->residual(coef_.beta) + dual_;
  }

  xb_ = X_ * coef_.beta;
  lossgrad_.resize(n, design_.num_layers());
  residual_.resize(n);
  refresh_all_layers();
}

void CmdState::refresh_all_layers() {
  const Eigen::Index n = xb_.size();
  for (int k = 0; k < design_.num_layers(); ++k) {
    const double bk = coef_.intercepts[k];
    const double* sign = design_.signs.col(k).data();
    double* lg = lossgrad_.col(k).data();
    for (Eigen::Index i = 0; i < n; ++i)
      lg[i] = probit_loss_grad(sign[i] * (xb_[i] - bk)) * sign[i];
  }
  residual_.noalias() = lossgrad_.matrix() * design_.weights;
}

void CmdState::refresh_layer(int k) {
  const Eigen::Index n = xb_.size();
  const double bk = coef_.intercepts[k];
  const double wk = design_.weights[k];
  const double* sign = design_.signs.col(k).data();
  double* lg = lossgrad_.col(k).data();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double updated = probit_loss_grad(sign[i] * (xb_[i] - bk)) * sign[i];
    residual_[i] += wk * (updated - lg[i]);
    lg[i] = updated;
  }
}

void CmdState::apply_beta_move(int j, double delta) {
  coef_.beta[j] += delta;
  xb_.noalias() += X_.col(j) * delta;
  refresh_all_layers();
}

double CmdState::update_penalized(int j, double omega_j) {
  const double d = colsq_[j];
  if (d <= 0.0) {
    zero_variance_skipped_ = true;
    return 0.0;
  }
  const double g = inv_n_ * X_.col(j).dot(residual_);
  const double target = soft_threshold(coef_.beta[j] - g / d, omega_j / d);
  const double delta = target - coef_.beta[j];
  if (delta == 0.0) return 0.0;
  if (target == 0.0) {
    // Land exactly on zero so the active set stays exact.
    xb_.noalias() += X_.col(j) * delta;
    coef_.beta[j] = 0.0;
    refresh_all_layers();
  } else {
    apply_beta_move(j, delta);
  }
  return std::abs(delta);
}

double CmdState::update_unpenalized(int idx) {
  const int j = unpenalized_[static_cast<std::size_t>(idx)];
  double g = inv_n_ * X_.col(j).dot(residual_);
  double denom = colsq_[j];
  if (hypothesis_ != nullptr) {
    g += cmat_cols_.col(idx).dot(tau_);
    denom += rho_ * cmat_colsq_[idx];
  }
  if (denom <= 0.0) {
    zero_variance_skipped_ = true;
    return 0.0;
  }
  const double delta = -g / denom;
  if (delta == 0.0) return 0.0;
  apply_beta_move(j, delta);
  if (hypothesis_ != nullptr) tau_ += rho_ * cmat_cols_.col(idx) * delta;
  return std::abs(delta);
}

double CmdState::update_intercept(int k) {
  const double step = inv_n_ * lossgrad_.col(k).sum();
  if (step == 0.0) return 0.0;
  coef_.intercepts[k] += step;
  refresh_layer(k);
  return std::abs(step);
}

Eigen::ArrayXXd CmdState::margins() const {
  Eigen::ArrayXXd out(xb_.size(), design_.num_layers());
  for (int k = 0; k < design_.num_layers(); ++k)
    out.col(k) = design_.signs.col(k) * (xb_.array() - coef_.intercepts[k]);
  return out;
}

Eigen::VectorXd CmdState::slackness_from_scratch() const {
  if (hypothesis_ == nullptr) return Eigen::VectorXd();
  return rho_ * hypothesis_->residual(coef_.beta) + dual_;
}

Eigen::VectorXd CmdState::constraint_residual() const {
  if (hypothesis_ == nullptr) return Eigen::VectorXd();
  return hypothesis_->residual(coef_.beta);
}

void CmdState::set_dual(const Eigen::VectorXd& dual) {
  if (hypothesis_ == nullptr)
    throw invalid_input("solver: no constraint attached");
  dual_ = dual;
  tau_ = rho_ * hypothesis_->residual(coef_.beta) + dual_;
}

double CmdState::negative_likelihood() const {
  const Eigen::Index n = xb_.size();
  double total = 0.0;
  for (int k = 0; k < design_.num_layers(); ++k) {
    const double bk = coef_.intercepts[k];
    const double* sign = design_.signs.col(k).data();
    double layer = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      layer += probit_loss(sign[i] * (xb_[i] - bk));
    total += design_.weights[k] * layer;
  }
  return total * inv_n_;
}

double CmdState::objective(const Eigen::VectorXd& omega) const {
  double value = negative_likelihood();
  for (Eigen::Index j = 0; j < coef_.beta.size(); ++j)
    if (!is_unpenalized_[static_cast<std::size_t>(j)])
      value += omega[j] * std::abs(coef_.beta[j]);
  if (hypothesis_ != nullptr) {
    const Eigen::VectorXd res = hypothesis_->residual(coef_.beta);
    value += dual_.dot(res) + 0.5 * rho_ * res.squaredNorm();
  }
  return value;
}

namespace {

// One cyclic pass: penalized coordinates, then tested coordinates, then
// intercepts. Returns the largest coefficient change.
double cmd_sweep(CmdState& state, const Eigen::VectorXd& omega,
                 const std::vector<int>& penalized_order) {
  double max_change = 0.0;
  for (int j : penalized_order)
    max_change = std::max(max_change, state.update_penalized(j, omega[j]));
  for (std::size_t idx = 0; idx < state.unpenalized().size(); ++idx)
    max_change =
        std::max(max_change, state.update_unpenalized(static_cast<int>(idx)));
  const int num_layers =
      static_cast<int>(state.coef().intercepts.size());
  for (int k = 0; k < num_layers; ++k)
    max_change = std::max(max_change, state.update_intercept(k));
  return max_change;
}

std::vector<int> penalized_indices(const CmdState& state, Eigen::Index p) {
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(p));
  std::vector<char> mask(static_cast<std::size_t>(p), 0);
  for (int j : state.unpenalized()) mask[static_cast<std::size_t>(j)] = 1;
  for (int j = 0; j < p; ++j)
    if (!mask[static_cast<std::size_t>(j)]) order.push_back(j);
  return order;
}

std::vector<int> nonzero_penalized(const CmdState& state,
                                   const std::vector<int>& penalized) {
  std::vector<int> active;
  for (int j : penalized)
    if (state.coef().beta[j] != 0.0) active.push_back(j);
  return active;
}

}  // namespace

CmdSolveResult cmd_solve(CmdState& state, const Eigen::VectorXd& omega,
                         const SolverConfig& config) {
  const Eigen::Index p = state.coef().beta.size();
  if (omega.size() != p)
    throw invalid_input("cmd_solve: omega dimension mismatch");
  const std::vector<int> all_penalized = penalized_indices(state, p);

  CmdSolveResult result;
  auto record = [&]() {
    if (config.record_objective)
      result.objective_trace.push_back(state.objective(omega));
  };

  while (result.cycles < config.max_cmd_cycles) {
    const double full_change = cmd_sweep(state, omega, all_penalized);
    ++result.cycles;
    record();
    if (full_change <= config.tol_cmd) {
      result.converged = true;
      return result;
    }
    // Iterate over the current support until it stabilizes, then verify
    // with another full sweep.
    const std::vector<int> active = nonzero_penalized(state, all_penalized);
    while (result.cycles < config.max_cmd_cycles) {
      const double change = cmd_sweep(state, omega, active);
      ++result.cycles;
      record();
      if (change <= config.tol_cmd) break;
    }
  }
  result.converged = false;
  return result;
}

LlaSolveResult lla_solve(CmdState& state, double lambda,
                         const SolverConfig& config) {
  const Eigen::Index p = state.coef().beta.size();
  const PenaltySpec spec = config.penalty.with_lambda(lambda);

  auto weights_at = [&](const Eigen::VectorXd& beta) {
    Eigen::VectorXd omega = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j)
      omega[j] = penalty_deriv(spec, std::abs(beta[j]));
    for (int j : state.unpenalized()) omega[j] = 0.0;
    return omega;
  };

  LlaSolveResult result;
  Eigen::VectorXd omega = weights_at(state.coef().beta);
  for (int iter = 0; iter < config.max_lla_iters; ++iter) {
    const Eigen::VectorXd beta_before = state.coef().beta;
    CmdSolveResult cmd = cmd_solve(state, omega, config);
    ++result.iterations;
    result.cmd_cycles += cmd.cycles;
    if (config.record_objective)
      result.objective_traces.push_back(std::move(cmd.objective_trace));

    const Eigen::VectorXd omega_next = weights_at(state.coef().beta);
    const double change =
        std::max((state.coef().beta - beta_before).cwiseAbs().maxCoeff(),
                 (omega_next - omega).cwiseAbs().maxCoeff());
    omega = omega_next;
    if (!cmd.converged) {
      result.converged = false;
      return result;
    }
    if (change <= config.tol_lla) {
      result.converged = true;
      return result;
    }
  }
  result.converged = false;
  return result;
}

namespace {

std::vector<int> collect_active_set(const CoefVector& coef,
                                    const std::vector<int>& tested) {
  std::vector<char> mask(static_cast<std::size_t>(coef.beta.size()), 0);
  for (int j : tested) mask[static_cast<std::size_t>(j)] = 1;
  std::vector<int> active;
  for (Eigen::Index j = 0; j < coef.beta.size(); ++j)
    if (!mask[static_cast<std::size_t>(j)] && coef.beta[j] != 0.0)
      active.push_back(static_cast<int>(j));
  return active;
}

double penalized_objective(const Eigen::MatrixXd& X,
                           const CompositeDesign& design,
                           const CoefVector& coef,
                           const std::vector<int>& tested,
                           const PenaltySpec& spec, double* likelihood_out) {
  const double likelihood = composite_likelihood(design, X, coef);
  if (likelihood_out != nullptr) *likelihood_out = likelihood;
  std::vector<char> mask(static_cast<std::size_t>(coef.beta.size()), 0);
  for (int j : tested) mask[static_cast<std::size_t>(j)] = 1;
  double penalty = 0.0;
  for (Eigen::Index j = 0; j < coef.beta.size(); ++j)
    if (!mask[static_cast<std::size_t>(j)])
      penalty += penalty_value(spec, std::abs(coef.beta[j]));
  return -likelihood + penalty;
}

CoefVector default_init(const Eigen::MatrixXd& X,
                        const CompositeDesign& design) {
  CoefVector init = CoefVector::zero(X.cols(), design.num_layers());
  init.intercepts = intercept_only_fit(design);
  return init;
}

}  // namespace

FitResult fit_unconstrained(const Eigen::MatrixXd& X,
                            const CompositeDesign& design,
                            const std::vector<int>& tested, double lambda,
                            const SolverConfig& config,
                            const CoefVector* warm_start) {
  config.validate();
  CoefVector init = warm_start != nullptr ? *warm_start
                                          : default_init(X, design);
  CmdState state(X, design, tested, nullptr, config.rho, std::move(init));
  LlaSolveResult lla = lla_solve(state, lambda, config);

  FitResult fit;
  fit.coef = state.coef();
  fit.lambda = lambda;
  fit.active_set = collect_active_set(fit.coef, tested);
  fit.objective =
      penalized_objective(X, design, fit.coef, tested,
                          config.penalty.with_lambda(lambda), &fit.likelihood);
  fit.iterations.lla = lla.iterations;
  fit.iterations.cmd_cycles = lla.cmd_cycles;
  fit.converged = lla.converged;
  fit.objective_traces = std::move(lla.objective_traces);
  if (state.zero_variance_skipped())
    fit.warnings.push_back("zero-variance column skipped");
  if (!fit.converged) fit.warnings.push_back("LLA/CMD did not converge");
  return fit;
}

FitResult fit_constrained(const Eigen::MatrixXd& X,
                          const CompositeDesign& design,
                          const LinearHypothesis& hypothesis, double lambda,
                          const SolverConfig& config,
                          const CoefVector* warm_start,
                          const Eigen::VectorXd* warm_dual) {
  config.validate();
  hypothesis.validate(X.cols());
  CoefVector init = warm_start != nullptr ? *warm_start
                                          : default_init(X, design);
  Eigen::VectorXd dual = warm_dual != nullptr
                             ? *warm_dual
                             : Eigen::VectorXd::Zero(hypothesis.r());
  CmdState state(X, design, hypothesis.indices, &hypothesis, config.rho,
                 std::move(init), dual);

  FitResult fit;
  Eigen::VectorXd previous = state.coef().beta;
  Eigen::VectorXd prev_intercepts = state.coef().intercepts;
  bool converged = false;
  double residual_norm = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < config.max_alm_iters; ++outer) {
    LlaSolveResult lla = lla_solve(state, lambda, config);
    ++fit.iterations.alm;
    fit.iterations.lla += lla.iterations;
    fit.iterations.cmd_cycles += lla.cmd_cycles;
    if (config.record_objective)
      for (auto& trace : lla.objective_traces)
        fit.objective_traces.push_back(std::move(trace));

    const Eigen::VectorXd res = state.constraint_residual();
    residual_norm = res.cwiseAbs().maxCoeff();
    const double primal_change = std::max(
        (state.coef().beta - previous).cwiseAbs().maxCoeff(),
        (state.coef().intercepts - prev_intercepts).cwiseAbs().maxCoeff());
    previous = state.coef().beta;
    prev_intercepts = state.coef().intercepts;

    if (lla.converged && residual_norm <= config.tol_alm &&
        primal_change <= config.tol_alm) {
      converged = true;
      break;
    }
    state.set_dual(state.dual() + config.rho * res);
  }

  fit.coef = state.coef();
  fit.lambda = lambda;
  fit.active_set = collect_active_set(fit.coef, hypothesis.indices);
  fit.objective =
      penalized_objective(X, design, fit.coef, hypothesis.indices,
                          config.penalty.with_lambda(lambda), &fit.likelihood);
  fit.dual = state.dual();
  fit.constraint_residual = residual_norm;
  fit.converged = converged;
  if (state.zero_variance_skipped())
    fit.warnings.push_back("zero-variance column skipped");
  if (!converged)
    fit.warnings.push_back("ALM did not reach the constraint tolerance; residual " +
                           std::to_string(residual_norm));
  return fit;
}

}  // namespace boxcox
