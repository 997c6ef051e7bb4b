// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mmc {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file (bad JSON, non-numeric cell, missing header).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input that violates a documented contract.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The signal does not support the requested measurement
// (too few repetitions, unusable keypoint, malformed repetition).
class QualityError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class UnitError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmc
