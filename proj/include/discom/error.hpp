#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace discom {

enum class ErrorKind {
  Parse,
  Authentication,
  Authorization,
  NotFound,
  Conflict,
  Integrity,
  Precondition,
  Transport,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure that crosses a module boundary is reported as an Error.
/// The kind drives HTTP status mapping and CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Set on Conflict errors raised by a stale contribution push.
  std::optional<std::int64_t> latest_version;

  static Error conflict_at(std::int64_t latest, std::string message) {
    Error e(ErrorKind::Conflict, std::move(message));
    e.latest_version = latest;
    return e;
  }

 private:
  ErrorKind kind_;
};

/// Parse failure with the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::string message)
      : Error(ErrorKind::Parse, std::move(message)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace discom
