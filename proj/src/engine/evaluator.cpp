#include "discom/engine/evaluator.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <variant>
#include <vector>

#include "discom/engine/dep_graph.hpp"

namespace discom::engine {

using model::Blank;
using model::CellValue;
using model::ErrorCode;

namespace {

using Num = std::variant<double, ErrorCode>;

Num to_number(const CellValue& v) {
  if (v.is_error()) return v.error();
  if (v.is_blank()) return 0.0;
  if (v.is_number()) return v.number();
  if (v.is_bool()) return v.boolean() ? 1.0 : 0.0;
  if (auto d = model::parse_number(v.text())) return *d;
  return ErrorCode::Value;
}

std::variant<std::string, ErrorCode> to_text(const CellValue& v) {
  if (v.is_error()) return v.error();
  return v.display();
}

std::variant<bool, ErrorCode> to_bool(const CellValue& v) {
  if (v.is_error()) return v.error();
  if (v.is_blank()) return false;
  if (v.is_bool()) return v.boolean();
  if (v.is_number()) return v.number() != 0.0;
  if (model::iequals(v.text(), "TRUE")) return true;
  if (model::iequals(v.text(), "FALSE")) return false;
  return ErrorCode::Value;
}

// Half away from zero on the shortest decimal representation, so 2.675
// rounds to 2.68 the way a user reading "2.675" expects.
double round_decimal(double x, int digits) {
  if (x == 0.0) return 0.0;
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::scientific);
  std::string_view s(buf.data(), static_cast<std::size_t>(end - buf.data()));
  bool negative = s.front() == '-';
  if (negative) s.remove_prefix(1);
  auto e_pos = s.find('e');
  std::string mantissa;
  for (char c : s.substr(0, e_pos))
    if (c != '.') mantissa.push_back(c);
  int exponent = 0;
  auto exp_text = s.substr(e_pos + 1);
  if (!exp_text.empty() && exp_text.front() == '+') exp_text.remove_prefix(1);
  std::from_chars(exp_text.data(), exp_text.data() + exp_text.size(), exponent);

  // value = 0.mantissa * 10^(exponent + 1)
  long keep = static_cast<long>(exponent) + 1 + digits;
  if (keep >= static_cast<long>(mantissa.size())) return x;
  if (keep < 0) return 0.0;
  std::string kept = mantissa.substr(0, static_cast<std::size_t>(keep));
  int scale = exponent + 1;
  if (mantissa[static_cast<std::size_t>(keep)] >= '5') {
    int i = static_cast<int>(kept.size()) - 1;
    while (i >= 0 && kept[static_cast<std::size_t>(i)] == '9') kept[static_cast<std::size_t>(i--)] = '0';
    if (i >= 0) {
      ++kept[static_cast<std::size_t>(i)];
    } else {
      kept.insert(kept.begin(), '1');
      ++scale;
    }
  }
  if (kept.empty()) return 0.0;
  std::string text = (negative ? "-0." : "0.") + kept + "e" + std::to_string(scale);
  double out = 0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

struct Arg {
  bool is_range = false;
  CellValue scalar;
  std::vector<CellValue> cells;  // row-major
};

class Evaluator {
 public:
  Evaluator(const std::string& host, const model::Workbook& wb) : host_(host), wb_(wb) {}

  CellValue eval(const Expr& e) {
    return std::visit([&](const auto& n) { return eval_node(n); }, e.node);
  }

 private:
  CellValue eval_node(const NumberLit& n) { return CellValue(n.value); }
  CellValue eval_node(const TextLit& t) { return CellValue(t.value); }
  CellValue eval_node(const BoolLit& b) { return CellValue(b.value); }
  CellValue eval_node(const CellRef& r) { return wb_.value(resolve(r, host_)); }
  CellValue eval_node(const RangeLit&) { return ErrorCode::Value; }

  CellValue eval_node(const Unary& u) {
    auto v = to_number(eval(*u.operand));
    if (auto* err = std::get_if<ErrorCode>(&v)) return *err;
    double d = std::get<double>(v);
    return CellValue(u.op == UnaryOp::Negate ? -d : d);
  }

  CellValue eval_node(const Binary& b) {
    auto lhs = eval(*b.lhs);
    auto rhs = eval(*b.rhs);
    if (lhs.is_error()) return lhs;
    if (rhs.is_error()) return rhs;
    switch (b.op) {
      case BinaryOp::Concat: {
        return std::get<std::string>(to_text(lhs)) + std::get<std::string>(to_text(rhs));
      }
      case BinaryOp::Eq: case BinaryOp::Ne: case BinaryOp::Lt:
      case BinaryOp::Le: case BinaryOp::Gt: case BinaryOp::Ge:
        return compare(b.op, lhs, rhs);
      default: break;
    }
    auto l = to_number(lhs);
    if (auto* err = std::get_if<ErrorCode>(&l)) return *err;
    auto r = to_number(rhs);
    if (auto* err = std::get_if<ErrorCode>(&r)) return *err;
    double x = std::get<double>(l), y = std::get<double>(r);
    switch (b.op) {
      case BinaryOp::Add: return CellValue(x + y);
      case BinaryOp::Sub: return CellValue(x - y);
      case BinaryOp::Mul: return CellValue(x * y);
      case BinaryOp::Div:
        if (y == 0.0) return ErrorCode::Div0;
        return CellValue(x / y);
      case BinaryOp::Pow:
        if (x == 0.0 && y < 0.0) return ErrorCode::Div0;
        return CellValue(std::pow(x, y));
      default: return ErrorCode::Value;
    }
  }

  // Blank takes the type of the other side; mixed types order as
  // number < text < boolean; text compares case-insensitively.
  static CellValue compare(BinaryOp op, CellValue lhs, CellValue rhs) {
    auto blank_as = [](const CellValue& other) -> CellValue {
      if (other.is_text()) return std::string();
      if (other.is_bool()) return false;
      return 0.0;
    };
    if (lhs.is_blank()) lhs = blank_as(rhs);
    if (rhs.is_blank()) rhs = blank_as(lhs);
    auto rank = [](const CellValue& v) { return v.is_number() ? 0 : v.is_text() ? 1 : 2; };
    int c = 0;
    if (rank(lhs) != rank(rhs)) {
      c = rank(lhs) < rank(rhs) ? -1 : 1;
    } else if (lhs.is_number()) {
      c = lhs.number() < rhs.number() ? -1 : lhs.number() > rhs.number() ? 1 : 0;
    } else if (lhs.is_text()) {
      auto a = model::fold_case(lhs.text()), b = model::fold_case(rhs.text());
      c = a < b ? -1 : a > b ? 1 : 0;
    } else {
      c = static_cast<int>(lhs.boolean()) - static_cast<int>(rhs.boolean());
    }
    switch (op) {
      case BinaryOp::Eq: return c == 0;
      case BinaryOp::Ne: return c != 0;
      case BinaryOp::Lt: return c < 0;
      case BinaryOp::Le: return c <= 0;
      case BinaryOp::Gt: return c > 0;
      default: return c >= 0;
    }
  }

  Arg eval_arg(const Expr& e) {
    Arg a;
    if (const auto* r = std::get_if<RangeLit>(&e.node)) {
      a.is_range = true;
      auto range = resolve(*r, host_);
      if (!wb_.has_sheet(range.sheet())) {
        a.is_range = false;
        a.scalar = ErrorCode::Ref;
        return a;
      }
      for (const auto& addr : model::range_cells(range)) a.cells.push_back(wb_.value(addr));
      return a;
    }
    a.scalar = eval(e);
    return a;
  }

  CellValue eval_node(const Call& c) {
    const auto& name = c.name;
    const auto n = c.args.size();
    if (name == "IF") {
      if (n < 2 || n > 3) return ErrorCode::Value;
      if (std::holds_alternative<RangeLit>(c.args[0]->node)) return ErrorCode::Value;
      auto cond = to_bool(eval(*c.args[0]));
      if (auto* err = std::get_if<ErrorCode>(&cond)) return *err;
      if (std::get<bool>(cond)) return scalar_arg(*c.args[1]);
      return n == 3 ? scalar_arg(*c.args[2]) : CellValue(false);
    }
    if (name == "ROUND") {
      if (n < 1 || n > 2) return ErrorCode::Value;
      auto x = numeric_arg(*c.args[0]);
      if (auto* err = std::get_if<ErrorCode>(&x)) return *err;
      double digits = 0;
      if (n == 2) {
        auto d = numeric_arg(*c.args[1]);
        if (auto* err = std::get_if<ErrorCode>(&d)) return *err;
        digits = std::trunc(std::get<double>(d));
      }
      digits = std::clamp(digits, -400.0, 400.0);
      return CellValue(round_decimal(std::get<double>(x), static_cast<int>(digits)));
    }
    if (name == "ABS") {
      if (n != 1) return ErrorCode::Value;
      auto x = numeric_arg(*c.args[0]);
      if (auto* err = std::get_if<ErrorCode>(&x)) return *err;
      return CellValue(std::fabs(std::get<double>(x)));
    }
    if (name == "CONCAT") {
      if (n == 0) return ErrorCode::Value;
      std::string out;
      for (const auto& e : c.args) {
        auto a = eval_arg(*e);
        if (a.is_range) {
          for (const auto& v : a.cells) {
            if (v.is_error()) return v;
            out += v.display();
          }
        } else {
          if (a.scalar.is_error()) return a.scalar;
          out += a.scalar.display();
        }
      }
      return out;
    }
    if (name == "SUM" || name == "AVERAGE" || name == "MIN" || name == "MAX" || name == "COUNT")
      return aggregate(name, c.args);
    return ErrorCode::Name;
  }

  CellValue scalar_arg(const Expr& e) {
    if (std::holds_alternative<RangeLit>(e.node)) return ErrorCode::Value;
    return eval(e);
  }

  Num numeric_arg(const Expr& e) { return to_number(scalar_arg(e)); }

  // Range cells contribute numbers only (blank, text and booleans are
  // skipped); scalar arguments are coerced, except COUNT which counts only
  // numbers. Any error, first in argument order, wins.
  CellValue aggregate(const std::string& name, const std::vector<ExprPtr>& args) {
    if (args.empty()) return ErrorCode::Value;
    bool count_only = name == "COUNT";
    std::vector<double> values;
    for (const auto& e : args) {
      auto a = eval_arg(*e);
      if (a.is_range) {
        for (const auto& v : a.cells) {
          if (v.is_error()) return v;
          if (v.is_number()) values.push_back(v.number());
        }
        continue;
      }
      if (a.scalar.is_error()) return a.scalar;
      if (count_only) {
        if (a.scalar.is_number()) values.push_back(a.scalar.number());
        continue;
      }
      auto num = to_number(a.scalar);
      if (auto* err = std::get_if<ErrorCode>(&num)) return *err;
      values.push_back(std::get<double>(num));
    }
    if (count_only) return CellValue(static_cast<double>(values.size()));
    if (name == "SUM" || name == "AVERAGE") {
      double sum = 0;
      for (double v : values) sum += v;
      if (name == "SUM") return CellValue(sum);
      if (values.empty()) return ErrorCode::Div0;
      return CellValue(sum / static_cast<double>(values.size()));
    }
    if (values.empty()) return CellValue(0.0);
    return CellValue(name == "MIN" ? *std::min_element(values.begin(), values.end())
                                   : *std::max_element(values.begin(), values.end()));
  }

  const std::string& host_;
  const model::Workbook& wb_;
};

model::Cell* mutable_cell(model::Workbook& wb, const model::CellAddress& addr) {
  auto* sheet = wb.find_sheet(addr.sheet);
  if (!sheet) return nullptr;
  auto& cells = sheet->mutable_cells();
  auto it = cells.find(model::GridPos{addr.row, addr.col});
  return it == cells.end() ? nullptr : &it->second;
}

void compute_cell(model::Workbook& wb, const model::CellAddress& addr, model::Cell& cell, bool blocked) {
  if (!cell.is_formula()) {
    cell.computed = cell.literal();
  } else if (blocked) {
    cell.computed = ErrorCode::Cycle;
  } else {
    auto sheet = wb.find_sheet(addr.sheet)->name();
    cell.computed = Evaluator(sheet, wb).eval(*cell.formula().ast->root);
  }
}

void prune_blanks(model::Workbook& wb) {
  for (auto& sheet : wb.mutable_sheets()) {
    std::erase_if(sheet.mutable_cells(),
                  [](const auto& kv) { return !kv.second.is_formula() && kv.second.literal().is_blank(); });
  }
}

std::map<model::CellAddress, CellValue> snapshot(const model::Workbook& wb) {
  std::map<model::CellAddress, CellValue> out;
  for (const auto& sheet : wb.sheets())
    for (const auto& [pos, cell] : sheet.cells()) out.emplace(model::CellAddress{sheet.name(), pos.col, pos.row}, cell.computed);
  return out;
}

}  // namespace

bool is_supported_function(std::string_view name) {
  static constexpr std::array<std::string_view, 9> kNames{"SUM", "AVERAGE", "MIN", "MAX", "COUNT",
                                                          "IF",  "ROUND",   "ABS", "CONCAT"};
  return std::any_of(kNames.begin(), kNames.end(), [&](auto n) { return model::iequals(n, name); });
}

CellValue evaluate(const Expr& expr, const std::string& host_sheet, const model::Workbook& wb) {
  return Evaluator(host_sheet, wb).eval(expr);
}

ChangeSet evaluate_in_place(model::Workbook& wb) {
  auto before = snapshot(wb);
  auto graph = build_dep_graph(wb);
  for (DepGraph::NodeId id = 0; id < graph.size(); ++id) {
    if (!graph.blocked(id)) continue;
    const auto& addr = graph.address(id);
    if (auto* cell = mutable_cell(wb, addr)) compute_cell(wb, addr, *cell, true);
  }
  for (auto id : graph.topo_order()) {
    const auto& addr = graph.address(id);
    if (auto* cell = mutable_cell(wb, addr)) compute_cell(wb, addr, *cell, false);
  }
  prune_blanks(wb);
  wb.mark_evaluated();

  ChangeSet changes;
  auto after = snapshot(wb);
  for (const auto& [addr, old] : before) {
    auto it = after.find(addr);
    CellValue now = it == after.end() ? CellValue{} : it->second;
    if (now != old) changes.emplace(addr, ValueChange{old, now});
  }
  for (const auto& [addr, now] : after)
    if (!before.contains(addr) && !now.is_blank()) changes.emplace(addr, ValueChange{CellValue{}, now});
  return changes;
}

model::Workbook evaluate_all(model::Workbook wb) {
  evaluate_in_place(wb);
  return wb;
}

ChangeSet recalculate(model::Workbook& wb, const std::set<model::CellAddress>& dirty) {
  if (wb.evaluated_generation() != wb.structure_generation()) return evaluate_in_place(wb);

  auto graph = build_dep_graph(wb);
  std::vector<DepGraph::NodeId> seeds;
  for (const auto& d : dirty)
    if (auto id = graph.find(d)) seeds.push_back(*id);
  auto affected = graph.closure(seeds);

  ChangeSet changes;
  auto visit = [&](DepGraph::NodeId id, bool blocked) {
    if (!affected[id]) return;
    const auto& addr = graph.address(id);
    auto* cell = mutable_cell(wb, addr);
    if (!cell) return;
    auto old = cell->computed;
    compute_cell(wb, addr, *cell, blocked);
    if (cell->computed != old) changes.emplace(wb.canonical(addr), ValueChange{old, cell->computed});
  };
  for (DepGraph::NodeId id = 0; id < graph.size(); ++id)
    if (graph.blocked(id)) visit(id, true);
  for (auto id : graph.topo_order()) visit(id, false);
  prune_blanks(wb);
  return changes;
}

}  // namespace discom::engine
