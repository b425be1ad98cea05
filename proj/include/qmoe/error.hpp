#pragma once

#include <stdexcept>
#include <string>

namespace qmoe {

/// Base for every structured error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, indices or hyperparameters that cannot describe a valid object.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied data that violates an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// API used out of order, e.g. a backward pass against a stale cache.
class MisuseError : public Error {
 public:
  using Error::Error;
};

/// CSV ingestion failures; the message carries row/column diagnostics.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// Model or report files that are truncated, corrupt or of another version.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace qmoe
