#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "discom/error.hpp"

// Minimal XML reader/writer for the interchange dialect: elements,
// attributes, text content and the five predefined entities plus numeric
// character references. No namespaces, DTDs, CDATA or comments.
namespace discom::model::xml {

/// Malformed document; offset() is the byte offset of the problem.
class DecodeError : public Error {
 public:
  DecodeError(std::size_t offset, const std::string& message)
      : Error(ErrorKind::Integrity, "offset " + std::to_string(offset) + ": " + message), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Element> children;
  std::string text;
  std::size_t offset = 0;

  const std::string* attribute(std::string_view key) const;
  /// Throws DecodeError when absent.
  const std::string& required(std::string_view key) const;
};

Element parse(std::string_view document);

/// Escapes &, <, > (and " when `in_attribute`); control characters become
/// numeric references so every string survives a round trip.
void append_escaped(std::string& out, std::string_view text, bool in_attribute);

}  // namespace discom::model::xml
