#include "discom/model/address.hpp"

#include <algorithm>
#include <cctype>

#include "discom/error.hpp"

namespace discom::model {

namespace {

char lower(char c) noexcept {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool is_plain_sheet_char(char c) noexcept {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

// A bare name like "AB12" would read back as a cell reference.
bool looks_like_cell(std::string_view s) noexcept {
  std::size_t i = 0;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  if (i == 0 || i == s.size() || !column_index(s.substr(0, i))) return false;
  return std::all_of(s.begin() + static_cast<std::ptrdiff_t>(i), s.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

struct SplitRef {
  std::string sheet;
  std::string_view local;
  std::size_t local_offset = 0;
};

SplitRef split_sheet(std::string_view text, std::string_view default_sheet) {
  SplitRef out;
  if (!text.empty() && text.front() == '\'') {
    std::size_t i = 1;
    for (;;) {
      if (i >= text.size()) throw ParseError(0, "unterminated quoted sheet name in '" + std::string(text) + "'");
      if (text[i] == '\'') {
        if (i + 1 < text.size() && text[i + 1] == '\'') {
          out.sheet.push_back('\'');
          i += 2;
          continue;
        }
        break;
      }
      out.sheet.push_back(text[i++]);
    }
    ++i;
    if (i >= text.size() || text[i] != '!')
      throw ParseError(i, "expected '!' after quoted sheet name in '" + std::string(text) + "'");
    out.local = text.substr(i + 1);
    out.local_offset = i + 1;
  } else if (auto bang = text.rfind('!'); bang != std::string_view::npos) {
    out.sheet = std::string(text.substr(0, bang));
    out.local = text.substr(bang + 1);
    out.local_offset = bang + 1;
  } else {
    if (default_sheet.empty())
      throw ParseError(0, "missing sheet name in '" + std::string(text) + "'");
    out.sheet = std::string(default_sheet);
    out.local = text;
  }
  if (!valid_sheet_name(out.sheet))
    throw ParseError(0, "invalid sheet name '" + out.sheet + "'");
  return out;
}

std::pair<std::int32_t, std::int32_t> parse_local(std::string_view s, std::size_t base) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '$') ++i;
  std::size_t letters_begin = i;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  auto letters = s.substr(letters_begin, i - letters_begin);
  auto col = column_index(letters);
  if (!col)
    throw ParseError(base + letters_begin, "bad column letters '" + std::string(letters) + "'");
  if (i < s.size() && s[i] == '$') ++i;
  std::size_t digits_begin = i;
  std::int64_t row = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    row = row * 10 + (s[i] - '0');
    if (row > kMaxRow) break;
    ++i;
  }
  auto digits = s.substr(digits_begin);
  if (i != s.size() || digits.empty() || row < 1 || row > kMaxRow)
    throw ParseError(base + digits_begin, "bad row '" + std::string(digits) + "'");
  return {*col, static_cast<std::int32_t>(row)};
}

}  // namespace

std::string fold_case(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = lower(c);
  return out;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return lower(x) == lower(y); });
}

std::string column_name(std::int32_t col) {
  std::string out;
  while (col > 0) {
    --col;
    out.push_back(static_cast<char>('A' + col % 26));
    col /= 26;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::optional<std::int32_t> column_index(std::string_view letters) {
  if (letters.empty() || letters.size() > 3) return std::nullopt;
  std::int32_t col = 0;
  for (char c : letters) {
    if (!std::isalpha(static_cast<unsigned char>(c))) return std::nullopt;
    col = col * 26 + (std::toupper(static_cast<unsigned char>(c)) - 'A' + 1);
  }
  if (col > kMaxColumn) return std::nullopt;
  return col;
}

bool valid_sheet_name(std::string_view name) noexcept {
  return !name.empty() &&
         std::none_of(name.begin(), name.end(), [](char c) { return static_cast<unsigned char>(c) < 0x20; });
}

std::string quote_sheet(std::string_view name) {
  bool plain = !name.empty() && std::all_of(name.begin(), name.end(), is_plain_sheet_char) &&
               !std::isdigit(static_cast<unsigned char>(name.front())) && !looks_like_cell(name) &&
               !iequals(name, "TRUE") && !iequals(name, "FALSE");
  if (plain) return std::string(name);
  std::string out = "'";
  for (char c : name) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

CellAddress CellAddress::make(std::string sheet, std::int32_t col, std::int32_t row) {
  if (!valid_sheet_name(sheet)) throw Error(ErrorKind::Integrity, "invalid sheet name '" + sheet + "'");
  if (col < 1 || col > kMaxColumn || row < 1 || row > kMaxRow)
    throw Error(ErrorKind::Integrity, "cell coordinates out of bounds: col " + std::to_string(col) + ", row " +
                                          std::to_string(row));
  return CellAddress{std::move(sheet), col, row};
}

std::string CellAddress::local() const { return column_name(col) + std::to_string(row); }

std::string CellAddress::to_string() const { return quote_sheet(sheet) + "!" + local(); }

bool operator==(const CellAddress& a, const CellAddress& b) noexcept {
  return a.col == b.col && a.row == b.row && iequals(a.sheet, b.sheet);
}

std::strong_ordering operator<=>(const CellAddress& a, const CellAddress& b) noexcept {
  auto n = std::min(a.sheet.size(), b.sheet.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (auto c = lower(a.sheet[i]) <=> lower(b.sheet[i]); c != 0) return c;
  }
  if (auto c = a.sheet.size() <=> b.sheet.size(); c != 0) return c;
  if (auto c = a.row <=> b.row; c != 0) return c;
  return a.col <=> b.col;
}

CellAddress parse_address(std::string_view text, std::string_view default_sheet) {
  if (text.empty()) throw ParseError(0, "empty cell address");
  auto split = split_sheet(text, default_sheet);
  auto [col, row] = parse_local(split.local, split.local_offset);
  return CellAddress{std::move(split.sheet), col, row};
}

RangeRef::RangeRef(const CellAddress& a, const CellAddress& b) {
  if (!iequals(a.sheet, b.sheet))
    throw Error(ErrorKind::Integrity, "range corners on different sheets: " + a.to_string() + ", " + b.to_string());
  top_left_ = CellAddress{a.sheet, std::min(a.col, b.col), std::min(a.row, b.row)};
  bottom_right_ = CellAddress{a.sheet, std::max(a.col, b.col), std::max(a.row, b.row)};
}

bool RangeRef::contains(const CellAddress& a) const noexcept {
  return iequals(a.sheet, sheet()) && a.col >= top_left_.col && a.col <= bottom_right_.col &&
         a.row >= top_left_.row && a.row <= bottom_right_.row;
}

bool RangeRef::overlaps(const RangeRef& o) const noexcept {
  return iequals(sheet(), o.sheet()) && top_left_.col <= o.bottom_right_.col &&
         o.top_left_.col <= bottom_right_.col && top_left_.row <= o.bottom_right_.row &&
         o.top_left_.row <= bottom_right_.row;
}

CellAddress RangeRef::at(std::int32_t r, std::int32_t c) const {
  return CellAddress{sheet(), top_left_.col + c, top_left_.row + r};
}

std::string RangeRef::to_string() const {
  return quote_sheet(sheet()) + "!" + top_left_.local() + ":" + bottom_right_.local();
}

RangeRef parse_range(std::string_view text, std::string_view default_sheet) {
  if (text.empty()) throw ParseError(0, "empty range");
  auto split = split_sheet(text, default_sheet);
  auto colon = split.local.find(':');
  auto first = parse_local(split.local.substr(0, colon), split.local_offset);
  auto second = first;
  if (colon != std::string_view::npos)
    second = parse_local(split.local.substr(colon + 1), split.local_offset + colon + 1);
  return RangeRef(CellAddress{split.sheet, first.first, first.second},
                  CellAddress{split.sheet, second.first, second.second});
}

std::vector<CellAddress> range_cells(const RangeRef& range) {
  std::vector<CellAddress> out;
  out.reserve(range.size());
  for (std::int32_t r = 0; r < range.rows(); ++r)
    for (std::int32_t c = 0; c < range.cols(); ++c) out.push_back(range.at(r, c));
  return out;
}

std::size_t CellAddressHash::operator()(const CellAddress& a) const noexcept {
  std::size_t h = std::hash<std::string>{}(fold_case(a.sheet));
  h ^= std::hash<std::int64_t>{}((static_cast<std::int64_t>(a.row) << 16) ^ a.col) + 0x9e3779b97f4a7c15ULL +
       (h << 6) + (h >> 2);
  return h;
}

}  // namespace discom::model
