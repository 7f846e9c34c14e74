// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cgru {

enum class ErrorKind {
  usage,     // precondition violated by the caller
  shape,     // tensor dimensions do not compose
  numeric,   // non-finite value or degenerate schedule
  format,    // malformed checkpoint / csv / config file
  io,        // file system failure
  config,    // unknown key or badly typed value
  phase,     // pipeline phase could not complete
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::usage, w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::shape, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::format, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct PhaseError : Error {
  explicit PhaseError(const std::string& w) : Error(ErrorKind::phase, w) {}
};

}  // namespace cgru
