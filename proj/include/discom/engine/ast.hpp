#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "discom/model/address.hpp"

namespace discom::engine {

enum class UnaryOp { Negate, Plus };
enum class BinaryOp { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };

std::string_view symbol(BinaryOp op) noexcept;

struct Expr;
using ExprPtr = std::unique_ptr<const Expr>;

struct NumberLit {
  double value;
};
struct TextLit {
  std::string value;
};
struct BoolLit {
  bool value;
};

/// Cell reference; an empty sheet means "the sheet hosting the formula".
struct CellRef {
  std::string sheet;
  std::int32_t col;
  std::int32_t row;
};

/// Only ever appears as a direct Call argument.
struct RangeLit {
  std::string sheet;
  std::int32_t col1, row1, col2, row2;  // normalized: col1 <= col2, row1 <= row2
};

struct Unary {
  UnaryOp op;
  ExprPtr operand;
};

struct Binary {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Call {
  std::string name;  // uppercased
  std::vector<ExprPtr> args;
};

struct Expr {
  std::variant<NumberLit, TextLit, BoolLit, CellRef, RangeLit, Unary, Binary, Call> node;
};

/// Parsed formula. Immutable and shared between workbook copies.
struct FormulaAst {
  ExprPtr root;
};

/// Resolves a reference against the host sheet.
model::CellAddress resolve(const CellRef& ref, const std::string& host_sheet);
model::RangeRef resolve(const RangeLit& range, const std::string& host_sheet);

/// S-expression rendering, e.g. "(+ A1 (* B2 2))"; used by tests and bindings.
std::string to_sexpr(const Expr& e);

}  // namespace discom::engine
