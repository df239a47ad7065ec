#pragma once

#include <stdexcept>
#include <string>

namespace hypood {

// Caller violated a documented precondition (dimension mismatch, bad option, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input file or stream. The message names the offending line or node.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or undefined derivatives encountered during computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hypood
