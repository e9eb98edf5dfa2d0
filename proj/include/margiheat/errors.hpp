#pragma once

#include <stdexcept>
#include <string>

namespace margiheat {

// Base for all recoverable errors raised by this library. The CLI maps
// these to exit code 1 (runtime/data error); anything else escapes.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor / grid dimensions do not line up.
class ShapeError : public Error {
public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// A scalar argument is outside its admissible range (sigma <= 0, ...).
class InvalidParameter : public Error {
public:
  explicit InvalidParameter(const std::string& msg) : Error(msg) {}
};

// NaN / Inf or otherwise malformed numeric input.
class InvalidInput : public Error {
public:
  explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

// An operation was called on an object in the wrong state, e.g. an
// expectation over a raw (unnormalized) grid, or backward before forward.
class ContractViolation : public Error {
public:
  explicit ContractViolation(const std::string& msg) : Error(msg) {}
};

// Input is degenerate for the requested computation (zero-mass Gaussian
// target, collinear point sets, zero-length skeleton segments, ...).
class DegenerateError : public Error {
public:
  explicit DegenerateError(const std::string& msg) : Error(msg) {}
};

// File / parse problems.
class IoError : public Error {
public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace margiheat
