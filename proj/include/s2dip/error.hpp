#pragma once

#include <stdexcept>
#include <string>

namespace s2dip {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or precondition violation (negative sigma, empty shape, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Operand shapes do not agree, or an extent is too small for the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// File could not be read or written, or its contents are malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

// Optimization produced a non-finite value.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t iteration)
      : Error(what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace s2dip
