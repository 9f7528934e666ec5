#pragma once

#include <stdexcept>
#include <string>

namespace qoc {

/// Precondition violations: bad shapes, out-of-range arguments, invalid
/// configuration.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failures: non-finite values, broken self-checks.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error raised while evaluating the control pipeline, tagged with the
/// stage that failed ("transfer", "amplitude", "solver", "cost:<label>").
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string &what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  [[nodiscard]] const std::string &stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace qoc
