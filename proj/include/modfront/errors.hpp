#pragma once

#include <stdexcept>
#include <string>

namespace modfront {

// Error taxonomy. The CLI maps these onto exit codes: ConfigError -> 2,
// IoError -> 3, NumericError / InternalError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values, out-of-range parameters, and precondition
// violations that a caller could have checked.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File system and format problems: unreadable files, malformed WAV or
// checkpoint payloads, short reads.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required (losses, gradients).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Broken internal invariants, e.g. a backward pass fed a cache built from
// different parameters.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace modfront
