#include "discom/model/workbook.hpp"

#include <algorithm>

#include "discom/engine/parser.hpp"
#include "discom/error.hpp"

namespace discom::model {

std::string Cell::input_text() const {
  if (is_formula()) return formula().source;
  return literal().display();
}

const Cell* Sheet::find(std::int32_t col, std::int32_t row) const {
  auto it = cells_.find(GridPos{row, col});
  return it == cells_.end() ? nullptr : &it->second;
}

const Sheet* Workbook::find_sheet(std::string_view name) const {
  auto it = std::find_if(sheets_.begin(), sheets_.end(), [&](const Sheet& s) { return iequals(s.name(), name); });
  return it == sheets_.end() ? nullptr : &*it;
}

Sheet* Workbook::find_sheet(std::string_view name) {
  return const_cast<Sheet*>(std::as_const(*this).find_sheet(name));
}

Sheet& Workbook::add_sheet(std::string name) {
  if (!valid_sheet_name(name)) throw Error(ErrorKind::Integrity, "invalid sheet name '" + name + "'");
  if (has_sheet(name)) throw Error(ErrorKind::Conflict, "duplicate sheet name '" + name + "'");
  ++structure_generation_;
  return sheets_.emplace_back(std::move(name));
}

Sheet& Workbook::ensure_sheet(std::string_view name) {
  if (auto* s = find_sheet(name)) return *s;
  return add_sheet(std::string(name));
}

void Workbook::remove_sheet(std::string_view name) {
  auto it = std::find_if(sheets_.begin(), sheets_.end(), [&](const Sheet& s) { return iequals(s.name(), name); });
  if (it == sheets_.end()) throw Error(ErrorKind::NotFound, "no sheet '" + std::string(name) + "'");
  sheets_.erase(it);
  ++structure_generation_;
}

const Cell* Workbook::cell(const CellAddress& addr) const {
  const auto* s = find_sheet(addr.sheet);
  return s ? s->find(addr.col, addr.row) : nullptr;
}

CellValue Workbook::value(const CellAddress& addr) const {
  const auto* s = find_sheet(addr.sheet);
  if (!s) return ErrorCode::Ref;
  const auto* c = s->find(addr.col, addr.row);
  return c ? c->computed : CellValue{};
}

Cell& Workbook::slot(const CellAddress& addr) {
  auto* s = find_sheet(addr.sheet);
  if (!s) throw Error(ErrorKind::NotFound, "no sheet '" + addr.sheet + "' for cell " + addr.to_string());
  return s->mutable_cells()[GridPos{addr.row, addr.col}];
}

void Workbook::set_literal(const CellAddress& addr, CellValue value) {
  auto* s = find_sheet(addr.sheet);
  if (!s) throw Error(ErrorKind::NotFound, "no sheet '" + addr.sheet + "' for cell " + addr.to_string());
  auto& cells = s->mutable_cells();
  auto it = cells.find(GridPos{addr.row, addr.col});
  // Cleared cells stay as Blank literals until the next evaluation prunes
  // them, so the old computed value is still around for the change set.
  if (it == cells.end()) {
    if (value.is_blank()) return;
    it = cells.emplace(GridPos{addr.row, addr.col}, Cell{}).first;
  }
  it->second.content = std::move(value);
}

void Workbook::set_formula(const CellAddress& addr, std::string source) {
  auto ast = engine::parse_formula(source);
  slot(addr).content = Formula{std::move(source), std::move(ast)};
}

void Workbook::set_input(const CellAddress& addr, std::string_view text) {
  if (!text.empty() && text.front() == '=')
    set_formula(addr, std::string(text));
  else
    set_literal(addr, literal_from_input(text));
}

CellAddress Workbook::canonical(const CellAddress& addr) const {
  if (const auto* s = find_sheet(addr.sheet)) return CellAddress{s->name(), addr.col, addr.row};
  return addr;
}

std::size_t Workbook::cell_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sheets_) n += s.cells().size();
  return n;
}

}  // namespace discom::model
