#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vortexloc {

/// A configuration value violates an invariant. `field()` names the
/// offending field in dotted form, e.g. "beam.waist_w0".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A numerical routine could not produce a trustworthy answer
/// (step-size violation, divergence, missing half-maximum crossing, ...).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string operation, const std::string& what)
      : std::runtime_error(operation + ": " + what), operation_(std::move(operation)) {}

  const std::string& operation() const noexcept { return operation_; }

 private:
  std::string operation_;
};

}  // namespace vortexloc
