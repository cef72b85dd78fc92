#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "discom/model/address.hpp"
#include "discom/model/value.hpp"
#include "discom/model/workbook.hpp"

namespace discom::model {

/// Versioned snapshot of an exported range: computed values only, row-major.
struct RangeImage {
  std::string export_id;
  std::int64_t version = 1;
  std::int32_t rows = 0;
  std::int32_t cols = 0;
  std::vector<CellValue> cells;

  /// Throws Error(Integrity) unless version >= 1, dims >= 1 and
  /// cells.size() == rows * cols.
  void validate() const;

  const CellValue& at(std::int32_t r, std::int32_t c) const {
    return cells[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
  }

  /// Same dims and values, ignoring export id and version.
  bool same_values(const RangeImage& other) const {
    return rows == other.rows && cols == other.cols && cells == other.cells;
  }

  friend bool operator==(const RangeImage&, const RangeImage&) = default;
};

/// Reads the computed values of `range` out of an evaluated workbook.
RangeImage capture_image(const Workbook& wb, const RangeRef& range, std::string export_id, std::int64_t version);

/// Canonical XML: <range-image export-id version rows cols> with one <c t=..>
/// per cell in row-major order. Equal images encode to identical bytes.
std::string encode_range_image(const RangeImage& image);
RangeImage decode_range_image(std::string_view document);

/// Sheets, literals, formula sources and properties. Computed values are not
/// stored; decode_workbook returns an unevaluated workbook.
std::string encode_workbook(const Workbook& wb);
Workbook decode_workbook(std::string_view document);

}  // namespace discom::model
