#include "discom/engine/parser.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "discom/model/address.hpp"

namespace discom::engine {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

enum class Tok { Number, Text, Ref, Range, Name, Op, LParen, RParen, Comma, End };

struct Token {
  Tok kind = Tok::End;
  std::size_t offset = 0;
  std::string text;  // raw spelling; for Text the unescaped value
  double number = 0;
  std::string sheet;
  std::int32_t col1 = 0, row1 = 0, col2 = 0, row2 = 0;
};

bool is_run_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

struct LocalRef {
  std::int32_t col, row;
};

// Matches "$?letters$?digits" exactly; nullopt when it is not a cell pattern.
std::optional<LocalRef> match_local(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '$') ++i;
  std::size_t b = i;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  auto col = model::column_index(s.substr(b, i - b));
  if (!col) return std::nullopt;
  if (i < s.size() && s[i] == '$') ++i;
  std::size_t d = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i != s.size() || d == i || i - d > 7) return std::nullopt;
  std::int32_t row = 0;
  std::from_chars(s.data() + d, s.data() + i, row);
  if (row < 1 || row > model::kMaxRow) return std::nullopt;
  return LocalRef{*col, row};
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t = next();
      out.push_back(t);
      if (t.kind == Tok::End) break;
    }
    return out;
  }

 private:
  [[noreturn]] void fail(std::size_t at, std::vector<std::string> expected) {
    std::string found = at < src_.size() ? std::string(1, src_[at]) : std::string("end of input");
    throw FormulaSyntaxError(at, std::move(expected), std::move(found));
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

  Token next() {
    Token t;
    t.offset = pos_;
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))))
      return lex_number(t);
    if (c == '"') return lex_text(t);
    if (c == '\'') return lex_quoted_ref(t);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') return lex_word(t);
    ++pos_;
    switch (c) {
      case '(': t.kind = Tok::LParen; return t;
      case ')': t.kind = Tok::RParen; return t;
      case ',': t.kind = Tok::Comma; return t;
      case '+': case '-': case '*': case '/': case '^': case '&': case '=':
        t.kind = Tok::Op;
        t.text = std::string(1, c);
        return t;
      case '<':
        t.kind = Tok::Op;
        if (peek() == '=' || peek() == '>') {
          t.text = std::string{c, src_[pos_++]};
        } else {
          t.text = "<";
        }
        return t;
      case '>':
        t.kind = Tok::Op;
        if (peek() == '=') {
          ++pos_;
          t.text = ">=";
        } else {
          t.text = ">";
        }
        return t;
      default:
        fail(t.offset, {"expression"});
    }
  }

  Token lex_number(Token t) {
    std::size_t b = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (peek() == '.') {
      ++pos_;
      while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t save = pos_;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (!std::isdigit(static_cast<unsigned char>(peek()))) {
        pos_ = save;
      } else {
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      }
    }
    t.kind = Tok::Number;
    t.text = std::string(src_.substr(b, pos_ - b));
    auto [end, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
    if (ec != std::errc{} || !std::isfinite(t.number)) fail(b, {"finite number"});
    return t;
  }

  Token lex_text(Token t) {
    ++pos_;
    for (;;) {
      if (pos_ >= src_.size()) fail(pos_, {"'\"'"});
      char c = src_[pos_++];
      if (c == '"') {
        if (peek() == '"') {
          t.text.push_back('"');
          ++pos_;
          continue;
        }
        break;
      }
      t.text.push_back(c);
    }
    t.kind = Tok::Text;
    return t;
  }

  Token lex_quoted_ref(Token t) {
    ++pos_;
    std::string sheet;
    for (;;) {
      if (pos_ >= src_.size()) fail(pos_, {"'"});
      char c = src_[pos_++];
      if (c == '\'') {
        if (peek() == '\'') {
          sheet.push_back('\'');
          ++pos_;
          continue;
        }
        break;
      }
      sheet.push_back(c);
    }
    if (sheet.empty() || !model::valid_sheet_name(sheet)) fail(t.offset, {"sheet name"});
    if (peek() != '!') fail(pos_, {"'!'"});
    ++pos_;
    return lex_local_ref(t, std::move(sheet));
  }

  Token lex_word(Token t) {
    std::size_t b = pos_;
    while (is_run_char(peek())) ++pos_;
    std::string_view run = src_.substr(b, pos_ - b);
    if (peek() == '!') {
      if (run.find('$') != std::string_view::npos) fail(b, {"sheet name"});
      ++pos_;
      return lex_local_ref(t, std::string(run));
    }
    std::size_t after = pos_;
    skip_space();
    bool call = peek() == '(';
    pos_ = after;
    if (!call) {
      if (auto first = match_local(run)) return finish_ref(t, {}, *first);
    }
    bool ident = !run.empty() && (std::isalpha(static_cast<unsigned char>(run[0])) || run[0] == '_') &&
                 run.find('$') == std::string_view::npos;
    if (!ident) fail(b, {"cell reference", "function name"});
    t.kind = Tok::Name;
    t.text = std::string(run);
    return t;
  }

  Token lex_local_ref(Token t, std::string sheet) {
    std::size_t b = pos_;
    while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '$') ++pos_;
    auto first = match_local(src_.substr(b, pos_ - b));
    if (!first) fail(b, {"cell reference"});
    return finish_ref(t, std::move(sheet), *first);
  }

  Token finish_ref(Token t, std::string sheet, LocalRef first) {
    t.sheet = std::move(sheet);
    t.col1 = t.col2 = first.col;
    t.row1 = t.row2 = first.row;
    t.kind = Tok::Ref;
    if (peek() == ':') {
      ++pos_;
      std::size_t b = pos_;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '$') ++pos_;
      auto second = match_local(src_.substr(b, pos_ - b));
      if (!second) fail(b, {"cell reference"});
      t.kind = Tok::Range;
      t.col1 = std::min(first.col, second->col);
      t.col2 = std::max(first.col, second->col);
      t.row1 = std::min(first.row, second->row);
      t.row2 = std::max(first.row, second->row);
    }
    t.text = std::string(src_.substr(t.offset, pos_ - t.offset));
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 1;  // skip the leading '='
};

ExprPtr make(auto node) { return std::make_unique<const Expr>(Expr{std::move(node)}); }

class Parser {
 public:
  Parser(std::string_view src, std::vector<Token> toks) : src_(src), toks_(std::move(toks)) {}

  ExprPtr parse() {
    auto e = comparison();
    if (cur().kind != Tok::End) fail({"operator", "end of formula"});
    return e;
  }

 private:
  const Token& cur() const { return toks_[i_]; }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const auto& t = cur();
    std::string found;
    switch (t.kind) {
      case Tok::End: found = "end of input"; break;
      case Tok::LParen: found = "("; break;
      case Tok::RParen: found = ")"; break;
      case Tok::Comma: found = ","; break;
      default: found = t.text;
    }
    throw FormulaSyntaxError(t.offset, std::move(expected), std::move(found));
  }

  bool at_op(std::string_view op) const { return cur().kind == Tok::Op && cur().text == op; }

  ExprPtr comparison() {
    auto lhs = concat();
    for (;;) {
      std::optional<BinaryOp> op;
      if (at_op("=")) op = BinaryOp::Eq;
      else if (at_op("<>")) op = BinaryOp::Ne;
      else if (at_op("<")) op = BinaryOp::Lt;
      else if (at_op("<=")) op = BinaryOp::Le;
      else if (at_op(">")) op = BinaryOp::Gt;
      else if (at_op(">=")) op = BinaryOp::Ge;
      if (!op) return lhs;
      ++i_;
      lhs = make(Binary{*op, std::move(lhs), concat()});
    }
  }

  ExprPtr concat() {
    auto lhs = additive();
    while (at_op("&")) {
      ++i_;
      lhs = make(Binary{BinaryOp::Concat, std::move(lhs), additive()});
    }
    return lhs;
  }

  ExprPtr additive() {
    auto lhs = multiplicative();
    for (;;) {
      BinaryOp op;
      if (at_op("+")) op = BinaryOp::Add;
      else if (at_op("-")) op = BinaryOp::Sub;
      else return lhs;
      ++i_;
      lhs = make(Binary{op, std::move(lhs), multiplicative()});
    }
  }

  ExprPtr multiplicative() {
    auto lhs = unary();
    for (;;) {
      BinaryOp op;
      if (at_op("*")) op = BinaryOp::Mul;
      else if (at_op("/")) op = BinaryOp::Div;
      else return lhs;
      ++i_;
      lhs = make(Binary{op, std::move(lhs), unary()});
    }
  }

  ExprPtr unary() {
    if (at_op("-")) {
      ++i_;
      return make(Unary{UnaryOp::Negate, unary()});
    }
    if (at_op("+")) {
      ++i_;
      return make(Unary{UnaryOp::Plus, unary()});
    }
    return power();
  }

  ExprPtr power() {
    auto base = primary();
    if (at_op("^")) {
      ++i_;
      return make(Binary{BinaryOp::Pow, std::move(base), unary()});
    }
    return base;
  }

  ExprPtr primary() {
    const auto& t = cur();
    switch (t.kind) {
      case Tok::Number: ++i_; return make(NumberLit{t.number});
      case Tok::Text: ++i_; return make(TextLit{t.text});
      case Tok::Ref: ++i_; return make(CellRef{t.sheet, t.col1, t.row1});
      case Tok::Range:
        throw FormulaSyntaxError(t.offset, {"scalar expression"},
                                 t.text + " (a range is only allowed as a function argument)");
      case Tok::LParen: {
        ++i_;
        auto e = comparison();
        if (cur().kind != Tok::RParen) fail({"operator", "')'"});
        ++i_;
        return e;
      }
      case Tok::Name: return name();
      default: fail({"number", "text", "cell reference", "function call", "'('", "'-'", "'+'"});
    }
  }

  ExprPtr name() {
    const auto& t = cur();
    std::string upper = t.text;
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    ++i_;
    if (cur().kind != Tok::LParen) {
      if (upper == "TRUE") return make(BoolLit{true});
      if (upper == "FALSE") return make(BoolLit{false});
      --i_;
      fail({"cell reference", "function call", "TRUE", "FALSE"});
    }
    ++i_;
    Call call{upper, {}};
    if (cur().kind == Tok::RParen) {
      ++i_;
      return make(std::move(call));
    }
    for (;;) {
      call.args.push_back(argument());
      if (cur().kind == Tok::Comma) {
        ++i_;
        continue;
      }
      if (cur().kind == Tok::RParen) {
        ++i_;
        return make(std::move(call));
      }
      fail({"operator", "','", "')'"});
    }
  }

  ExprPtr argument() {
    const auto& t = cur();
    if (t.kind == Tok::Range) {
      auto next = toks_[i_ + 1].kind;
      if (next == Tok::Comma || next == Tok::RParen) {
        ++i_;
        return make(RangeLit{t.sheet, t.col1, t.row1, t.col2, t.row2});
      }
    }
    if (t.kind == Tok::End) fail({"expression", "')'"});
    return comparison();
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

}  // namespace

FormulaSyntaxError::FormulaSyntaxError(std::size_t offset, std::vector<std::string> expected, std::string found)
    : ParseError(offset, "syntax error at offset " + std::to_string(offset) + ": expected " + join(expected) +
                             "; found " + found),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

std::shared_ptr<const FormulaAst> parse_formula(std::string_view source) {
  if (source.empty() || source.front() != '=')
    throw FormulaSyntaxError(0, {"'='"}, source.empty() ? "end of input" : std::string(1, source.front()));
  auto tokens = Lexer(source).run();
  auto root = Parser(source, std::move(tokens)).parse();
  return std::make_shared<const FormulaAst>(FormulaAst{std::move(root)});
}

}  // namespace discom::engine
