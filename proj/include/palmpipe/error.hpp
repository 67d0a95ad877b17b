// Copyright 2026 The palmpipe authors
// SPDX-License-Identifier: Apache-2.0

#ifndef PALMPIPE_ERROR_HPP
#define PALMPIPE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace palmpipe {

/// Error categories raised by the library. Kept in sync with the
/// pp_status codes of the C API (capi.cpp owns the mapping).
enum class ErrorCode {
  None = 0,
  BadArgument,
  OutOfBounds,
  BadWindow,
  BadSize,
  DegenerateConfiguration,
  SingularHomography,
  InsufficientPoints,
  CollinearPoints,
  DuplicateSourcePoints,
  DimensionMismatch,
  ExtractorMismatch,
  ParseError,
  SchemaViolation,
  SegmentationFailed,
  ValleysNotFound,
  WrongArity,
  OutOfRangeScore,
  LengthMismatch,
  EmptyManifest,
  MissingClass,
  DuplicateCapture,
  UnknownSubject,
  EmptyGallery,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace palmpipe

#endif
