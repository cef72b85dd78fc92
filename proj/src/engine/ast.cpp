#include "discom/engine/ast.hpp"

#include "discom/model/value.hpp"

namespace discom::engine {

std::string_view symbol(BinaryOp op) noexcept {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
    case BinaryOp::Concat: return "&";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
  }
  return "?";
}

model::CellAddress resolve(const CellRef& ref, const std::string& host_sheet) {
  return model::CellAddress{ref.sheet.empty() ? host_sheet : ref.sheet, ref.col, ref.row};
}

model::RangeRef resolve(const RangeLit& range, const std::string& host_sheet) {
  const auto& sheet = range.sheet.empty() ? host_sheet : range.sheet;
  return model::RangeRef(model::CellAddress{sheet, range.col1, range.row1},
                         model::CellAddress{sheet, range.col2, range.row2});
}

namespace {

std::string ref_text(const std::string& sheet, std::int32_t col, std::int32_t row) {
  std::string out;
  if (!sheet.empty()) out = model::quote_sheet(sheet) + "!";
  return out + model::column_name(col) + std::to_string(row);
}

struct Printer {
  std::string operator()(const NumberLit& n) const { return model::format_number(n.value); }
  std::string operator()(const TextLit& t) const {
    std::string out = "\"";
    for (char c : t.value) {
      if (c == '"') out.push_back('"');
      out.push_back(c);
    }
    return out + "\"";
  }
  std::string operator()(const BoolLit& b) const { return b.value ? "TRUE" : "FALSE"; }
  std::string operator()(const CellRef& r) const { return ref_text(r.sheet, r.col, r.row); }
  std::string operator()(const RangeLit& r) const {
    return ref_text(r.sheet, r.col1, r.row1) + ":" + model::column_name(r.col2) + std::to_string(r.row2);
  }
  std::string operator()(const Unary& u) const {
    return std::string("(") + (u.op == UnaryOp::Negate ? "neg " : "pos ") + to_sexpr(*u.operand) + ")";
  }
  std::string operator()(const Binary& b) const {
    return "(" + std::string(symbol(b.op)) + " " + to_sexpr(*b.lhs) + " " + to_sexpr(*b.rhs) + ")";
  }
  std::string operator()(const Call& c) const {
    std::string out = "(" + c.name;
    for (const auto& a : c.args) out += " " + to_sexpr(*a);
    return out + ")";
  }
};

}  // namespace

std::string to_sexpr(const Expr& e) { return std::visit(Printer{}, e.node); }

}  // namespace discom::engine
