#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "discom/engine/ast.hpp"
#include "discom/model/workbook.hpp"

namespace discom::engine {

struct ValueChange {
  model::CellValue before;
  model::CellValue after;
  friend bool operator==(const ValueChange&, const ValueChange&) = default;
};

/// Cells whose computed value changed, keyed by address.
using ChangeSet = std::map<model::CellAddress, ValueChange>;

/// SUM AVERAGE MIN MAX COUNT IF ROUND ABS CONCAT, case-insensitive.
bool is_supported_function(std::string_view name);

/// Evaluates one expression against the computed values currently in `wb`.
model::CellValue evaluate(const Expr& expr, const std::string& host_sheet, const model::Workbook& wb);

/// Full evaluation in place. Cells on a cycle, and every cell downstream of
/// one, compute ErrorCode::Cycle.
ChangeSet evaluate_in_place(model::Workbook& wb);

/// Value-returning form of evaluate_in_place.
model::Workbook evaluate_all(model::Workbook wb);

/// Recomputes `dirty` and everything transitively depending on it, in
/// topological order (row-major tie-break). The result matches a full
/// evaluation. Falls back to full evaluation when the workbook was never
/// evaluated or its sheet set changed since.
ChangeSet recalculate(model::Workbook& wb, const std::set<model::CellAddress>& dirty);

}  // namespace discom::engine
