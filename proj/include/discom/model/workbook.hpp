#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "discom/model/address.hpp"
#include "discom/model/value.hpp"

namespace discom::engine {
struct FormulaAst;
}

namespace discom::model {

struct Formula {
  std::string source;  // verbatim, including the leading '='
  std::shared_ptr<const engine::FormulaAst> ast;
};

struct Cell {
  std::variant<CellValue, Formula> content;
  CellValue computed;

  bool is_formula() const noexcept { return std::holds_alternative<Formula>(content); }
  const Formula& formula() const { return std::get<Formula>(content); }
  const CellValue& literal() const { return std::get<CellValue>(content); }
  /// Literal display text or formula source; what a user would retype.
  std::string input_text() const;
};

/// Grid position inside a sheet, ordered row-major.
struct GridPos {
  std::int32_t row;
  std::int32_t col;
  friend auto operator<=>(const GridPos&, const GridPos&) = default;
};

class Sheet {
 public:
  explicit Sheet(std::string name) : name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }
  const std::map<GridPos, Cell>& cells() const noexcept { return cells_; }
  std::map<GridPos, Cell>& mutable_cells() noexcept { return cells_; }

  const Cell* find(std::int32_t col, std::int32_t row) const;

 private:
  std::string name_;
  std::map<GridPos, Cell> cells_;
};

/// A workbook: ordered sheets of sparse cells plus a text property bag that
/// carries export/import metadata.
///
/// Edits only change cell content. Computed values are owned by the engine
/// and refreshed by engine::evaluate_all / engine::recalculate; until then a
/// freshly edited cell keeps its previous computed value.
class Workbook {
 public:
  Workbook() = default;
  explicit Workbook(std::string id) : id_(std::move(id)) {}

  const std::string& id() const noexcept { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  const std::vector<Sheet>& sheets() const noexcept { return sheets_; }
  std::vector<Sheet>& mutable_sheets() noexcept { return sheets_; }
  const Sheet* find_sheet(std::string_view name) const;
  Sheet* find_sheet(std::string_view name);
  bool has_sheet(std::string_view name) const { return find_sheet(name) != nullptr; }
  /// Throws Error(Conflict) on a case-insensitive duplicate.
  Sheet& add_sheet(std::string name);
  Sheet& ensure_sheet(std::string_view name);
  void remove_sheet(std::string_view name);

  /// Bumped whenever the set of sheets changes; a recalculation across a
  /// structure change falls back to full evaluation.
  std::uint64_t structure_generation() const noexcept { return structure_generation_; }
  std::uint64_t evaluated_generation() const noexcept { return evaluated_generation_; }
  void mark_evaluated() noexcept { evaluated_generation_ = structure_generation_; }

  const Cell* cell(const CellAddress& addr) const;
  /// Computed value; Blank for unset cells, ErrorCode::Ref for a missing sheet.
  CellValue value(const CellAddress& addr) const;

  /// Sheet must exist (Error(NotFound) otherwise).
  void set_literal(const CellAddress& addr, CellValue value);
  /// Parses `source` (which must start with '='); throws ParseError.
  void set_formula(const CellAddress& addr, std::string source);
  /// "=..." becomes a formula, anything else a literal per literal_from_input.
  void set_input(const CellAddress& addr, std::string_view text);
  void clear(const CellAddress& addr) { set_literal(addr, Blank{}); }

  /// Canonical sheet spelling for an address, or the address unchanged.
  CellAddress canonical(const CellAddress& addr) const;

  std::map<std::string, std::string>& properties() noexcept { return properties_; }
  const std::map<std::string, std::string>& properties() const noexcept { return properties_; }

  std::size_t cell_count() const noexcept;

 private:
  Cell& slot(const CellAddress& addr);

  std::string id_;
  std::vector<Sheet> sheets_;
  std::map<std::string, std::string> properties_;
  std::uint64_t structure_generation_ = 1;
  std::uint64_t evaluated_generation_ = 0;
};

}  // namespace discom::model
