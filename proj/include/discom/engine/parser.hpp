#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "discom/engine/ast.hpp"
#include "discom/error.hpp"

namespace discom::engine {

/// Syntax error in a formula. offset() is the byte offset into the full
/// source (the leading '=' is offset 0).
class FormulaSyntaxError : public ParseError {
 public:
  FormulaSyntaxError(std::size_t offset, std::vector<std::string> expected, std::string found);

  const std::vector<std::string>& expected() const noexcept { return expected_; }
  const std::string& found() const noexcept { return found_; }

 private:
  std::vector<std::string> expected_;
  std::string found_;
};

/// Operator precedence, loosest first:
///   comparisons, &, + -, * /, unary - +, ^ (right-associative).
/// A range may only appear as a direct function argument.
std::shared_ptr<const FormulaAst> parse_formula(std::string_view source);

}  // namespace discom::engine
