// Copyright 2026  The xmalign authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XMALIGN_ERRORS_HPP_
#define XMALIGN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace xmalign {

// Error taxonomy used across the library. The CLI maps these onto process
// exit codes: ValidationError/ShapeError -> 2, IoError (and subclasses) -> 3,
// NumericError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent tensor/vector dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad configuration values, out-of-range labels, mismatched inputs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, degenerate directions, division hazards.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// File exists but carries an unknown magic string or version.
class VersionError : public IoError {
 public:
  using IoError::IoError;
};

// File is truncated or its payload checksum does not match the header.
class ChecksumError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace xmalign

#endif  // XMALIGN_ERRORS_HPP_
