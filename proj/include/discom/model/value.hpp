#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace discom::model {

enum class ErrorCode { Div0, Cycle, Ref, Value, Name };

std::string_view error_name(ErrorCode code) noexcept;
std::optional<ErrorCode> error_from_name(std::string_view name) noexcept;

struct Blank {
  friend bool operator==(Blank, Blank) noexcept { return true; }
};

/// A computed or literal cell value. Numbers are always finite and never
/// negative zero; constructing one from NaN/inf yields ErrorCode::Value.
class CellValue {
 public:
  using Storage = std::variant<Blank, double, std::string, bool, ErrorCode>;

  CellValue() = default;
  CellValue(Blank) {}
  CellValue(ErrorCode e) : v_(e) {}
  CellValue(bool b) : v_(b) {}
  CellValue(std::string s) : v_(std::move(s)) {}
  CellValue(const char* s) : v_(std::string(s)) {}
  CellValue(double d);
  CellValue(int i) : CellValue(static_cast<double>(i)) {}

  bool is_blank() const noexcept { return std::holds_alternative<Blank>(v_); }
  bool is_number() const noexcept { return std::holds_alternative<double>(v_); }
  bool is_text() const noexcept { return std::holds_alternative<std::string>(v_); }
  bool is_bool() const noexcept { return std::holds_alternative<bool>(v_); }
  bool is_error() const noexcept { return std::holds_alternative<ErrorCode>(v_); }

  double number() const { return std::get<double>(v_); }
  const std::string& text() const { return std::get<std::string>(v_); }
  bool boolean() const { return std::get<bool>(v_); }
  ErrorCode error() const { return std::get<ErrorCode>(v_); }

  const Storage& storage() const noexcept { return v_; }

  /// Display form: numbers in shortest round-trip form, TRUE/FALSE, #DIV/0! etc.
  std::string display() const;

  friend bool operator==(const CellValue&, const CellValue&) = default;

 private:
  Storage v_;
};

/// Shortest decimal string that parses back to the same double.
std::string format_number(double d);
/// Strict full-string decimal parse; nullopt on trailing garbage or non-finite.
std::optional<double> parse_number(std::string_view s);

/// Interprets user-typed literal text: "" -> Blank, numeric -> Number,
/// TRUE/FALSE (any case) -> Boolean, otherwise Text.
CellValue literal_from_input(std::string_view text);

}  // namespace discom::model
