#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace newscls {

// Root of every error raised by the library. The CLI maps subclasses onto
// exit codes: input problems exit 2, run failures exit 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. `offset` is a byte offset when one is known.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::size_t offset = npos)
      : Error(what), offset_(offset) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// A persisted file was written under a different schema version.
class MigrationError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or parameters during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Backend protocol violations and backend-reported failures.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class AugmentError : public Error {
 public:
  AugmentError(std::string instance_id, const std::string& what)
      : Error(what), instance_id_(std::move(instance_id)) {}
  const std::string& instance_id() const { return instance_id_; }

 private:
  std::string instance_id_;
};

// Training or sweep failure that is not caused by bad input.
class RunError : public Error {
 public:
  using Error::Error;
};

}  // namespace newscls
