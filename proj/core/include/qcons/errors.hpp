#pragma once

#include <stdexcept>
#include <string>

namespace qcons {

/// Target MSE cannot be met (below the lossless floor, or below a node's
/// lossless MSE).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative procedure hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Covariance lost positive semidefiniteness beyond tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed experiment configuration. `field()` is a JSON pointer to the
/// offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("config error at " + field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace qcons
