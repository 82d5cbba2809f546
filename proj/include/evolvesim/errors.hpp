#pragma once

#include <stdexcept>
#include <string>

namespace evolvesim {

/// Non-finite or out-of-range argument.
class InputDomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : std::invalid_argument("dimension mismatch: expected " + std::to_string(expected) +
                              ", got " + std::to_string(actual)) {}
};

/// A target halfspace evaluates to exactly zero on a point it is asked to label.
class MarginViolation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Derived run parameters exceed the configured point-evaluation budget.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, double magnitude)
      : std::runtime_error(what), magnitude_(magnitude) {}
  double magnitude() const { return magnitude_; }

 private:
  double magnitude_;
};

/// Malformed experiment configuration or input file.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// A combinatorial construction failed one of its structural checks.
class ConstructionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace evolvesim
