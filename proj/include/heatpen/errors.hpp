#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace heatpen {

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an optimizer produces a non-finite objective. Carries the
/// objective trace recorded up to the failure.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

}  // namespace heatpen
