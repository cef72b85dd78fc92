#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace discom::model {

inline constexpr std::int32_t kMaxColumn = 16384;
inline constexpr std::int32_t kMaxRow = 1048576;

/// ASCII lowercase copy; sheet names compare case-insensitively.
std::string fold_case(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;

/// Column index (1-based) to letters: 1 -> "A", 27 -> "AA".
std::string column_name(std::int32_t col);
/// Letters to column index; nullopt when empty, non-alphabetic or out of bounds.
std::optional<std::int32_t> column_index(std::string_view letters);

bool valid_sheet_name(std::string_view name) noexcept;
/// Sheet name as it appears before '!' (quoted when it contains anything
/// outside [A-Za-z0-9_.] or could be mistaken for a cell reference).
std::string quote_sheet(std::string_view name);

struct CellAddress {
  std::string sheet;
  std::int32_t col = 1;
  std::int32_t row = 1;

  /// Throws Error(Integrity) when the coordinates are out of bounds or the
  /// sheet name is invalid.
  static CellAddress make(std::string sheet, std::int32_t col, std::int32_t row);

  /// "B2" (no sheet).
  std::string local() const;
  /// "Sheet1!B2".
  std::string to_string() const;

  friend bool operator==(const CellAddress& a, const CellAddress& b) noexcept;
  /// Row-major within a sheet; sheets ordered case-insensitively.
  friend std::strong_ordering operator<=>(const CellAddress& a, const CellAddress& b) noexcept;
};

/// Parses A1 notation. When `default_sheet` is empty the sheet prefix is
/// mandatory. '$' absolute markers are accepted and dropped.
CellAddress parse_address(std::string_view text, std::string_view default_sheet = {});

class RangeRef {
 public:
  RangeRef() = default;
  /// Corners are normalized so top_left is the minimum on both axes.
  /// Throws Error(Integrity) when the corners are on different sheets.
  RangeRef(const CellAddress& a, const CellAddress& b);

  const std::string& sheet() const noexcept { return top_left_.sheet; }
  const CellAddress& top_left() const noexcept { return top_left_; }
  const CellAddress& bottom_right() const noexcept { return bottom_right_; }

  std::int32_t rows() const noexcept { return bottom_right_.row - top_left_.row + 1; }
  std::int32_t cols() const noexcept { return bottom_right_.col - top_left_.col + 1; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(rows()) * static_cast<std::size_t>(cols());
  }

  bool contains(const CellAddress& a) const noexcept;
  bool overlaps(const RangeRef& other) const noexcept;
  /// Address at (r, c) offset from top_left, 0-based.
  CellAddress at(std::int32_t r, std::int32_t c) const;

  /// "Sheet1!A1:B2"; singletons render as "Sheet1!A1:A1".
  std::string to_string() const;

  friend bool operator==(const RangeRef& a, const RangeRef& b) noexcept = default;

 private:
  CellAddress top_left_;
  CellAddress bottom_right_;
};

/// "Sheet!A1:B2" or "Sheet!A1" (singleton).
RangeRef parse_range(std::string_view text, std::string_view default_sheet = {});

/// Row-major enumeration: row ascending, then column ascending.
std::vector<CellAddress> range_cells(const RangeRef& range);

struct CellAddressHash {
  std::size_t operator()(const CellAddress& a) const noexcept;
};

}  // namespace discom::model
