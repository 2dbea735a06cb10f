// Copyright 2026 The rkgrape Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rkgrape {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimensionError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes disagree (operator dims, grid sizes, control counts).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Pixel duration is not an integer multiple of the subpixel duration.
class GridMismatchError : public Error {
 public:
  using Error::Error;
};

/// The adaptive integrator ran out of steps inside one subpixel.
class IntegrationFailure : public Error {
 public:
  IntegrationFailure(const std::string& what, std::size_t subpixel)
      : Error(what), subpixel_(subpixel) {}
  std::size_t subpixel() const noexcept { return subpixel_; }

 private:
  std::size_t subpixel_;
};

/// A propagated state picked up NaN or Inf.
class DivergenceError : public IntegrationFailure {
 public:
  using IntegrationFailure::IntegrationFailure;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Matrix exponential input norm too large to scale safely.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Fock-space truncation too small for the populations reached.
class TruncationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rkgrape
