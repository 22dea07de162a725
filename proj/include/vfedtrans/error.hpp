/*
 * Copyright 2026 The VFedTrans Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef VFEDTRANS_ERROR_HPP_
#define VFEDTRANS_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace vfedtrans {

// Base of every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (CSV cells, duplicate ids, infeasible splits).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration; the CLI maps this to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An iterative solver hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}

  std::size_t iterations() const { return iterations_; }

 private:
  std::size_t iterations_;
};

// Numerical breakdown: zero operator, collapsed representation, NaN loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Wraps a failure with the pipeline phase it occurred in.
class PhaseError : public Error {
 public:
  PhaseError(std::string phase, const std::string& cause)
      : Error(phase + ": " + cause), phase_(std::move(phase)) {}

  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

}  // namespace vfedtrans

#endif  // VFEDTRANS_ERROR_HPP_
