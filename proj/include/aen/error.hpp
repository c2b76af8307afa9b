// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace aen {

enum class ErrorKind {
  invalid_input,
  format,
  validation,
  configuration,
  data,
  degenerate_labels,
  undefined_metric,
  assignment,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::format: return "format error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::data: return "data error";
    case ErrorKind::degenerate_labels: return "degenerate labels";
    case ErrorKind::undefined_metric: return "undefined metric";
    case ErrorKind::assignment: return "assignment error";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Distinguishes the ways a tensor file can be malformed.
enum class FormatCode {
  bad_magic,
  bad_version,
  bad_dtype,
  empty_dims,
  zero_dim,
  dim_overflow,
  truncated,
  trailing_bytes,
  non_finite,
};

inline const char* to_string(FormatCode code) {
  switch (code) {
    case FormatCode::bad_magic: return "bad magic";
    case FormatCode::bad_version: return "unsupported version";
    case FormatCode::bad_dtype: return "unknown dtype";
    case FormatCode::empty_dims: return "empty dims";
    case FormatCode::zero_dim: return "zero dimension";
    case FormatCode::dim_overflow: return "dimension overflow";
    case FormatCode::truncated: return "truncated payload";
    case FormatCode::trailing_bytes: return "trailing bytes";
    case FormatCode::non_finite: return "non-finite value";
  }
  return "format";
}

class FormatError : public Error {
 public:
  FormatError(FormatCode code, const std::string& detail)
      : Error(ErrorKind::format, std::string(to_string(code)) + (detail.empty() ? "" : " (" + detail + ")")),
        code_(code) {}

  FormatCode code() const noexcept { return code_; }

 private:
  FormatCode code_;
};

/// Validation failure that names the JSON pointer of the offending field.
class ValidationError : public Error {
 public:
  ValidationError(std::string path, const std::string& what)
      : Error(ErrorKind::validation, path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace aen
