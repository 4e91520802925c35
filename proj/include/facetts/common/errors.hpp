#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace facetts {

/// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape mismatch, missing grad, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Input data is unusable (too short, empty after normalization, out of range).
class InputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  /// For inputs without line structure; line() is 0.
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared in a numerical routine.
class NumericalFault : public Error {
 public:
  using Error::Error;
};

/// Reverse sampler produced NaN/inf; carries the step index at which it happened.
class DivergenceError : public NumericalFault {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : NumericalFault(what + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// A training loss component became non-finite.
class TrainingFault : public NumericalFault {
 public:
  TrainingFault(const std::string& component, double value)
      : NumericalFault("non-finite loss component " + component + " = " + std::to_string(value)),
        component_(component) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

class EvaluationError : public NumericalFault {
 public:
  using NumericalFault::NumericalFault;
};

class InfeasibleAlignment : public Error {
 public:
  using Error::Error;
};

class SingularTime : public Error {
 public:
  using Error::Error;
};

class DegenerateTask : public Error {
 public:
  using Error::Error;
};

}  // namespace facetts
