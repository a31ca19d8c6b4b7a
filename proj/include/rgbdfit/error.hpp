#pragma once

#include <stdexcept>
#include <string>

namespace rgbdfit {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

class InvalidDepthError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

// Rank-deficient normal equations or a non-finite scatter matrix.
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

// Malformed input file or configuration value.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rgbdfit
