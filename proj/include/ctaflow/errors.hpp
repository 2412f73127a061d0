#pragma once

#include <stdexcept>
#include <string>

namespace ctaflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

/// Size or shape limits violated (subdivision depth, grid dims, parameter counts).
class SizeError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class CorrespondenceError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values in parameters, activations or gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public NumericError {
 public:
  IntegrationError(const std::string& what, int step, std::size_t vertex)
      : NumericError(what), step_(step), vertex_(vertex) {}

  int step() const noexcept { return step_; }
  std::size_t vertex() const noexcept { return vertex_; }

 private:
  int step_;
  std::size_t vertex_;
};

/// An operation was called in the wrong state (for example backward without a recorded tape).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Invalid shape or fit specification.
class SpecError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctaflow
