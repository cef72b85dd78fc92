#include "discom/model/range_image.hpp"

#include <charconv>

#include "discom/error.hpp"
#include "discom/model/xml.hpp"

namespace discom::model {

namespace {

struct Typed {
  std::string_view tag;
  std::string text;
};

Typed type_and_text(const CellValue& v) {
  if (v.is_blank()) return {"blank", {}};
  if (v.is_number()) return {"n", format_number(v.number())};
  if (v.is_text()) return {"s", v.text()};
  if (v.is_bool()) return {"b", v.boolean() ? "true" : "false"};
  return {"e", std::string(error_name(v.error()))};
}

CellValue value_from(std::string_view tag, const std::string& text, std::size_t offset) {
  if (tag == "blank") {
    if (!text.empty()) throw xml::DecodeError(offset, "blank cell with content");
    return Blank{};
  }
  if (tag == "n") {
    auto d = parse_number(text);
    if (!d) throw xml::DecodeError(offset, "bad number '" + text + "'");
    return CellValue(*d);
  }
  if (tag == "s") return CellValue(text);
  if (tag == "b") {
    if (text == "true") return true;
    if (text == "false") return false;
    throw xml::DecodeError(offset, "bad boolean '" + text + "'");
  }
  if (tag == "e") {
    auto code = error_from_name(text);
    if (!code) throw xml::DecodeError(offset, "unknown error code '" + text + "'");
    return *code;
  }
  throw xml::DecodeError(offset, "unknown cell type '" + std::string(tag) + "'");
}

template <typename Int>
Int int_attribute(const xml::Element& e, std::string_view key) {
  const auto& text = e.required(key);
  Int v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size())
    throw xml::DecodeError(e.offset, "attribute '" + std::string(key) + "' is not an integer: '" + text + "'");
  return v;
}

void open_tag(std::string& out, std::string_view name) {
  out.push_back('<');
  out += name;
}

void attr(std::string& out, std::string_view key, std::string_view value) {
  out.push_back(' ');
  out += key;
  out += "=\"";
  xml::append_escaped(out, value, true);
  out.push_back('"');
}

}  // namespace

void RangeImage::validate() const {
  if (version < 1) throw Error(ErrorKind::Integrity, "range image version must be >= 1");
  if (rows < 1 || cols < 1) throw Error(ErrorKind::Integrity, "range image dims must be positive");
  if (cells.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw Error(ErrorKind::Integrity, "range image has " + std::to_string(cells.size()) + " cells, expected " +
                                          std::to_string(rows) + "x" + std::to_string(cols));
}

RangeImage capture_image(const Workbook& wb, const RangeRef& range, std::string export_id, std::int64_t version) {
  RangeImage img{std::move(export_id), version, range.rows(), range.cols(), {}};
  img.cells.reserve(range.size());
  for (const auto& addr : range_cells(range)) img.cells.push_back(wb.value(addr));
  return img;
}

std::string encode_range_image(const RangeImage& image) {
  image.validate();
  std::string out;
  out.reserve(64 + image.cells.size() * 20);
  open_tag(out, "range-image");
  attr(out, "export-id", image.export_id);
  attr(out, "version", std::to_string(image.version));
  attr(out, "rows", std::to_string(image.rows));
  attr(out, "cols", std::to_string(image.cols));
  out.push_back('>');
  for (const auto& v : image.cells) {
    auto [tag, text] = type_and_text(v);
    open_tag(out, "c");
    attr(out, "t", tag);
    if (v.is_blank()) {
      out += "/>";
      continue;
    }
    out.push_back('>');
    xml::append_escaped(out, text, false);
    out += "</c>";
  }
  out += "</range-image>";
  return out;
}

RangeImage decode_range_image(std::string_view document) {
  auto root = xml::parse(document);
  if (root.name != "range-image") throw xml::DecodeError(root.offset, "expected <range-image>, got <" + root.name + ">");
  RangeImage img;
  img.export_id = root.required("export-id");
  img.version = int_attribute<std::int64_t>(root, "version");
  img.rows = int_attribute<std::int32_t>(root, "rows");
  img.cols = int_attribute<std::int32_t>(root, "cols");
  for (const auto& c : root.children) {
    if (c.name != "c") throw xml::DecodeError(c.offset, "unexpected element <" + c.name + ">");
    img.cells.push_back(value_from(c.required("t"), c.text, c.offset));
  }
  try {
    img.validate();
  } catch (const Error& e) {
    throw xml::DecodeError(root.offset, e.what());
  }
  return img;
}

std::string encode_workbook(const Workbook& wb) {
  std::string out;
  open_tag(out, "workbook");
  attr(out, "id", wb.id());
  out.push_back('>');
  for (const auto& [key, value] : wb.properties()) {
    open_tag(out, "property");
    attr(out, "name", key);
    attr(out, "value", value);
    out += "/>";
  }
  for (const auto& sheet : wb.sheets()) {
    open_tag(out, "sheet");
    attr(out, "name", sheet.name());
    out.push_back('>');
    for (const auto& [pos, cell] : sheet.cells()) {
      if (!cell.is_formula() && cell.literal().is_blank()) continue;
      open_tag(out, "cell");
      attr(out, "addr", column_name(pos.col) + std::to_string(pos.row));
      if (cell.is_formula()) {
        attr(out, "f", cell.formula().source);
      } else {
        auto [tag, text] = type_and_text(cell.literal());
        attr(out, "t", tag);
        attr(out, "v", text);
      }
      out += "/>";
    }
    out += "</sheet>";
  }
  out += "</workbook>";
  return out;
}

Workbook decode_workbook(std::string_view document) {
  auto root = xml::parse(document);
  if (root.name != "workbook") throw xml::DecodeError(root.offset, "expected <workbook>, got <" + root.name + ">");
  Workbook wb(root.required("id"));
  for (const auto& child : root.children) {
    if (child.name == "property") {
      wb.properties()[child.required("name")] = child.required("value");
      continue;
    }
    if (child.name != "sheet") throw xml::DecodeError(child.offset, "unexpected element <" + child.name + ">");
    const auto& name = child.required("name");
    if (!valid_sheet_name(name) || wb.has_sheet(name))
      throw xml::DecodeError(child.offset, "invalid or duplicate sheet name '" + name + "'");
    wb.add_sheet(name);
    for (const auto& c : child.children) {
      if (c.name != "cell") throw xml::DecodeError(c.offset, "unexpected element <" + c.name + ">");
      CellAddress addr;
      try {
        addr = parse_address(c.required("addr"), name);
      } catch (const ParseError& e) {
        throw xml::DecodeError(c.offset, std::string("bad cell address: ") + e.what());
      }
      if (const auto* f = c.attribute("f")) {
        try {
          wb.set_formula(addr, *f);
        } catch (const ParseError& e) {
          throw xml::DecodeError(c.offset, "formula in " + addr.to_string() + ": " + e.what());
        }
      } else {
        wb.set_literal(addr, value_from(c.required("t"), c.required("v"), c.offset));
      }
    }
  }
  return wb;
}

}  // namespace discom::model
