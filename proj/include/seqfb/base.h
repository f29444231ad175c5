// seqfb/base.h

// Copyright 2026  The seqfb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SEQFB_BASE_H_
#define SEQFB_BASE_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace seqfb {

using StateId = int32_t;
using Label = int32_t;

inline constexpr Label kEpsilon = -1;
inline constexpr StateId kNoState = -1;

/// Natural-log weights. The semiring zero is -infinity, the one is 0.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();
inline constexpr double kLogOne = 0.0;

/// log(exp(a) + exp(b)), symmetric in its arguments.
inline double LogAdd(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

// Error hierarchy.  The CLI maps each family onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int ExitCode() const = 0;
};

/// Bad configuration or model inputs (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
  int ExitCode() const override { return 2; }
};

/// Malformed or inconsistent data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
  int ExitCode() const override { return 3; }
};

/// An utterance that cannot be aligned to its graph at its length.
class DegenerateUtteranceError : public DataError {
 public:
  DegenerateUtteranceError(const std::string &msg, int64_t min_length)
      : DataError(msg), min_length_(min_length) {}
  /// Shortest accepted length of the graph, or -1 if it accepts nothing.
  int64_t MinLength() const { return min_length_; }

 private:
  int64_t min_length_;
};

/// Numerical failure or violated internal invariant (exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
  int ExitCode() const override { return 4; }
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace seqfb

#endif  // SEQFB_BASE_H_
