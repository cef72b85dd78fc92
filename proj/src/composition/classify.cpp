#include "discom/composition/composition.hpp"
#include "discom/engine/dep_graph.hpp"
#include "discom/error.hpp"

namespace discom::composition {

namespace {

void require_sheet(const model::Workbook& wb, const model::RangeRef& range, std::string_view what) {
  if (!wb.has_sheet(range.sheet()))
    throw Error(ErrorKind::Integrity,
                std::string(what) + " range " + range.to_string() + " refers to a missing sheet");
}

}  // namespace

WorkbookRole classify_workbook(const model::Workbook& wb, const std::vector<ExportDescriptor>& exports,
                               const std::vector<ImportBinding>& imports) {
  for (const auto& e : exports) require_sheet(wb, e.range, "export " + e.id);
  for (const auto& i : imports) require_sheet(wb, i.target, "import " + i.id);

  if (exports.empty() && imports.empty()) return WorkbookRole::Detached;
  if (imports.empty()) return WorkbookRole::PureExporter;
  if (exports.empty()) return WorkbookRole::PureImporter;

  // Direct inclusion.
  for (const auto& e : exports)
    for (const auto& i : imports)
      if (e.range.overlaps(i.target)) return WorkbookRole::Intermediate;

  // Formula reachability from any imported cell.
  auto graph = engine::build_dep_graph(wb);
  std::vector<engine::DepGraph::NodeId> seeds;
  for (const auto& i : imports)
    for (const auto& addr : model::range_cells(i.target))
      if (auto id = graph.find(addr)) seeds.push_back(*id);
  auto reached = graph.closure(seeds);
  for (const auto& e : exports)
    for (const auto& addr : model::range_cells(e.range))
      if (auto id = graph.find(addr); id && reached[*id]) return WorkbookRole::Intermediate;

  return WorkbookRole::ExporterAndImporter;
}

}  // namespace discom::composition
