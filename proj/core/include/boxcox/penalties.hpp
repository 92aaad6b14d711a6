#pragma once

#include <string>

namespace boxcox {

enum class PenaltyFamily { kScad, kMcp };

/// Folded concave penalty family with shape parameter a and level lambda.
/// SCAD requires a > 2, MCP requires a > 1.
struct PenaltySpec {
  PenaltyFamily family = PenaltyFamily::kScad;
  double a = 3.7;
  double lambda = 0.0;

  void validate() const;

  PenaltySpec with_lambda(double new_lambda) const {
    PenaltySpec s = *this;
    s.lambda = new_lambda;
    return s;
  }
};

PenaltyFamily penalty_family_from_string(const std::string& name);
std::string to_string(PenaltyFamily family);

/// p'_lambda(t) for t >= 0. At kinks the left derivative is used; p'(0) =
/// lambda for both families.
double penalty_deriv(const PenaltySpec& spec, double t);

/// p_lambda(t) for t >= 0: continuous, nondecreasing, concave, p(0) = 0.
double penalty_value(const PenaltySpec& spec, double t);

}  // namespace boxcox
