#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lyanet {

// Caller broke a documented precondition (shape mismatch, bad argument).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A forward value in a computation graph is NaN or infinite.
class NumericFault : public std::runtime_error {
 public:
  NumericFault(const std::string& what, std::size_t node)
      : std::runtime_error(what), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

// An ODE solver produced a non-finite state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Malformed text input. line() is 1-based; 0 means "not line specific".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// The hypercube half-width solve has no root on its bracket.
class InfeasibleRadius : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trainer hit a non-finite loss or a diverging rollout.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::size_t iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace lyanet
