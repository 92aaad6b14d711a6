#include "boxcox/penalties.hpp"

#include "boxcox/errors.hpp"

namespace boxcox {

void PenaltySpec::validate() const {
  if (lambda < 0.0) throw invalid_input("penalty: lambda must be >= 0");
  if (family == PenaltyFamily::kScad && !(a > 2.0))
    throw invalid_input("penalty: SCAD requires a > 2");
  if (family == PenaltyFamily::kMcp && !(a > 1.0))
    throw invalid_input("penalty: MCP requires a > 1");
}

PenaltyFamily penalty_family_from_string(const std::string& name) {
  if (name == "scad" || name == "SCAD") return PenaltyFamily::kScad;
  if (name == "mcp" || name == "MCP") return PenaltyFamily::kMcp;
  throw invalid_input("unknown penalty family '" + name + "' (scad|mcp)");
}

std::string to_string(PenaltyFamily family) {
  return family == PenaltyFamily::kScad ? "scad" : "mcp";
}

double penalty_deriv(const PenaltySpec& spec, double t) {
  spec.validate();
  if (t < 0.0) throw invalid_input("penalty_deriv: t must be >= 0");
  const double lambda = spec.lambda;
  const double a = spec.a;
  if (spec.family == PenaltyFamily::kScad) {
    if (t <= lambda) return lambda;
    if (t < a * lambda) return (a * lambda - t) / (a - 1.0);
    return 0.0;
  }
  // MCP
  const double v = lambda - t / a;
  return v > 0.0 ? v : 0.0;
}

double penalty_value(const PenaltySpec& spec, double t) {
  spec.validate();
  if (t < 0.0) throw invalid_input("penalty_value: t must be >= 0");
  const double lambda = spec.lambda;
  const double a = spec.a;
  if (spec.family == PenaltyFamily::kScad) {
    if (t <= lambda) return lambda * t;
    if (t < a * lambda) {
      const double excess = t - lambda;
      return lambda * lambda +
             (a * lambda * excess - 0.5 * (t * t - lambda * lambda)) / (a - 1.0);
    }
    return 0.5 * (a + 1.0) * lambda * lambda;
  }
  // MCP
  if (t < a * lambda) return lambda * t - t * t / (2.0 * a);
  return 0.5 * a * lambda * lambda;
}

}  // namespace boxcox
