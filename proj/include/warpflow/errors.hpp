#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace warpflow {

/// Argument outside the domain where a map or a field is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Value outside a tabulated range (inversions never extrapolate).
class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

/// Object used before its tables were built.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Incompatible sizes between a grid and a node field.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration (grid mode/dimension, config file, run parameters).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A check was asked for on a space or state that does not meet its hypotheses.
class NotApplicableError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The graph left the working radial interval at some node.
class DomainEscape : public DomainError {
 public:
  DomainEscape(std::size_t node, double value, const std::string& what)
      : DomainError(what), node_(node), value_(value) {}

  std::size_t node() const noexcept { return node_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t node_;
  double value_;
};

/// Non-finite values produced by a time step.
class SchemeInstability : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace warpflow
