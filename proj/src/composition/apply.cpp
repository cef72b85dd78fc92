#include "discom/composition/composition.hpp"
#include "discom/error.hpp"

namespace discom::composition {

engine::ChangeSet apply_image(model::Workbook& wb, const model::RangeRef& target, const model::RangeImage& image) {
  if (image.rows != target.rows() || image.cols != target.cols() ||
      image.cells.size() != static_cast<std::size_t>(target.size()))
    throw Error(ErrorKind::Integrity, "image of " + image.export_id + " is " + std::to_string(image.rows) + "x" +
                                          std::to_string(image.cols) + ", target " + target.to_string() + " is " +
                                          std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  wb.ensure_sheet(target.sheet());
  std::set<model::CellAddress> dirty;
  for (std::int32_t r = 0; r < image.rows; ++r) {
    for (std::int32_t c = 0; c < image.cols; ++c) {
      auto addr = target.at(r, c);
      const auto* cell = wb.cell(addr);
      const auto& value = image.at(r, c);
      bool same = cell ? (!cell->is_formula() && cell->literal() == value)
                       : value.is_blank();
      if (same) continue;
      wb.set_literal(addr, value);
      dirty.insert(addr);
    }
  }
  return engine::recalculate(wb, dirty);
}

}  // namespace discom::composition
