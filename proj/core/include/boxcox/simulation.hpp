#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "boxcox/inference.hpp"
#include "boxcox/rng.hpp"
#include "boxcox/solver.hpp"

namespace boxcox {

enum class ResponseTransform { kIdentity, kG1, kG2 };
enum class HypothesisId { kI, kII, kIII, kIV };

ResponseTransform transform_from_string(const std::string& name);
std::string to_string(ResponseTransform transform);
HypothesisId hypothesis_id_from_string(const std::string& name);
std::string to_string(HypothesisId id);

/// One simulation cell: sample size, dimension, AR(1) correlation,
/// response transform, signal offset h1, hypothesis preset, level,
/// replicate count and master seed.
struct SimSetting {
  int n = 200;
  int p = 250;
  double rho_corr = 0.5;
  ResponseTransform g_id = ResponseTransform::kG1;
  double h1 = 0.0;
  HypothesisId hypothesis_id = HypothesisId::kI;
  double alpha = 0.05;
  int replicates = 600;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RejectionRow {
  double h1 = 0.0;
  std::string statistic;  // "T_L", "T_W", "T_S"
  double rejection_pct = 0.0;
  double std_err_pct = 0.0;
  int replicates = 0;
};

struct RejectionTable {
  std::vector<RejectionRow> rows;
  SimSetting setting;
  int failures = 0;
  bool flagged = false;  // more than 5% of replicates failed

  void merge(const RejectionTable& other);
};

/// Rows i.i.d. N(0, Sigma) with Sigma = (rho^|i-j|), generated by the AR(1)
/// recursion (exact for this covariance, O(np)).
Eigen::MatrixXd gen_ar1_design(int n, int p, double rho_corr, Rng& rng);

/// Inverse transforms: g1^{-1}(t) = (2t-1)^{1/3}/2 + 1/2 (real cube root),
/// g2^{-1}(t) = exp((t-2)/3) / (1 + ((t-2)/3)^2 / 2), identity.
double transform_inverse(ResponseTransform transform, double t);

/// y_i = g^{-1}(2 x_i1 - (2 + h1) x_i2 + eps_i), eps ~ N(0,1).
Eigen::VectorXd gen_response(const Eigen::MatrixXd& X, double h1,
                             ResponseTransform transform, Rng& rng);

/// The four hypothesis presets (0-based indices internally).
LinearHypothesis hypothesis_preset(HypothesisId id, int p);

/// Run `replicates` independent tests and aggregate rejection rates with
/// binomial standard errors. Deterministic under the setting seed and
/// independent of thread count.
RejectionTable run_rejection_study(const SimSetting& setting,
                                   const TestOptions& base_options,
                                   int threads = 0);

struct LinearWaldResult {
  double statistic = 0.0;
  int rank = 0;

  bool reject_at(double alpha) const;
};

/// Classical OLS Wald test of C beta_M = t on the columns M union
/// `support_columns`, judged against the chi-squared(r) null. Used as the
/// mis-specification baseline.
LinearWaldResult linear_wald_baseline(const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& y,
                                      const LinearHypothesis& hypothesis,
                                      const std::vector<int>& support_columns);

}  // namespace boxcox
