#pragma once

#include <stdexcept>
#include <string>

namespace boxcox {

/// Raised for invalid user input (bad dimensions, malformed files,
/// out-of-range options). Maps to CLI exit code 2.
class invalid_input : public std::runtime_error {
 public:
  explicit invalid_input(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a computation cannot proceed numerically (singular matrix,
/// degenerate layer, non-convergence escalated to an error). Carries the
/// pipeline stage it happened in. Maps to CLI exit code 3.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what, std::string stage = {})
      : std::runtime_error(stage.empty() ? what : "[" + stage + "] " + what),
        stage_(std::move(stage)) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace boxcox
