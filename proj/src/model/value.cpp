#include "discom/model/value.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "discom/model/address.hpp"

namespace discom::model {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 5> kErrorNames{{
    {ErrorCode::Div0, "DIV0"},
    {ErrorCode::Cycle, "CYCLE"},
    {ErrorCode::Ref, "REF"},
    {ErrorCode::Value, "VALUE"},
    {ErrorCode::Name, "NAME"},
}};

}  // namespace

std::string_view error_name(ErrorCode code) noexcept {
  for (auto& [c, n] : kErrorNames)
    if (c == code) return n;
  return "VALUE";
}

std::optional<ErrorCode> error_from_name(std::string_view name) noexcept {
  for (auto& [c, n] : kErrorNames)
    if (n == name) return c;
  return std::nullopt;
}

CellValue::CellValue(double d) {
  if (!std::isfinite(d))
    v_ = ErrorCode::Value;
  else
    v_ = d == 0.0 ? 0.0 : d;
}

std::string CellValue::display() const {
  struct Visitor {
    std::string operator()(Blank) const { return {}; }
    std::string operator()(double d) const { return format_number(d); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(bool b) const { return b ? "TRUE" : "FALSE"; }
    std::string operator()(ErrorCode e) const {
      switch (e) {
        case ErrorCode::Div0: return "#DIV/0!";
        case ErrorCode::Cycle: return "#CYCLE!";
        case ErrorCode::Ref: return "#REF!";
        case ErrorCode::Value: return "#VALUE!";
        case ErrorCode::Name: return "#NAME?";
      }
      return "#VALUE!";
    }
  };
  return std::visit(Visitor{}, v_);
}

std::string format_number(double d) {
  if (d == 0.0) return "0";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
  return std::string(buf.data(), end);
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') {
    s.remove_prefix(1);
    if (s.empty() || s.front() == '-') return std::nullopt;
  }
  double d = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec != std::errc{} || end != s.data() + s.size() || !std::isfinite(d)) return std::nullopt;
  return d;
}

CellValue literal_from_input(std::string_view text) {
  if (text.empty()) return Blank{};
  if (auto d = parse_number(text)) return CellValue(*d);
  if (iequals(text, "TRUE")) return true;
  if (iequals(text, "FALSE")) return false;
  return std::string(text);
}

}  // namespace discom::model
