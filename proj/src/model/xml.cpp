#include "discom/model/xml.hpp"

#include <cctype>
#include <charconv>

namespace discom::model::xml {

namespace {

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == ':';
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view doc) : doc_(doc) {}

  Element document() {
    skip_space();
    if (doc_.substr(pos_, 5) == "<?xml") {
      auto end = doc_.find("?>", pos_);
      if (end == std::string_view::npos) fail("unterminated XML declaration");
      pos_ = end + 2;
      skip_space();
    }
    auto root = element();
    skip_space();
    if (pos_ != doc_.size()) fail("trailing content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw DecodeError(pos_, msg); }

  char peek() const { return pos_ < doc_.size() ? doc_[pos_] : '\0'; }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_space() {
    while (pos_ < doc_.size() && std::isspace(static_cast<unsigned char>(doc_[pos_]))) ++pos_;
  }

  std::string name() {
    auto b = pos_;
    while (pos_ < doc_.size() && is_name_char(doc_[pos_])) ++pos_;
    if (b == pos_) fail("expected a name");
    return std::string(doc_.substr(b, pos_ - b));
  }

  std::string decode_until(char stop) {
    std::string out;
    while (pos_ < doc_.size() && doc_[pos_] != stop) {
      char c = doc_[pos_];
      if (c == '<' && stop == '"') fail("'<' in attribute value");
      if (c != '&') {
        out.push_back(c);
        ++pos_;
        continue;
      }
      auto semi = doc_.find(';', pos_);
      if (semi == std::string_view::npos || semi - pos_ > 12) fail("unterminated entity");
      auto ent = doc_.substr(pos_ + 1, semi - pos_ - 1);
      if (ent == "amp") out.push_back('&');
      else if (ent == "lt") out.push_back('<');
      else if (ent == "gt") out.push_back('>');
      else if (ent == "quot") out.push_back('"');
      else if (ent == "apos") out.push_back('\'');
      else if (ent.size() > 1 && ent[0] == '#') {
        std::uint32_t cp = 0;
        bool hex = ent[1] == 'x' || ent[1] == 'X';
        auto digits = ent.substr(hex ? 2 : 1);
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
        if (ec != std::errc{} || p != digits.data() + digits.size() || cp > 0x10FFFF) fail("bad character reference");
        append_utf8(out, cp);
      } else {
        fail("unknown entity '&" + std::string(ent) + ";'");
      }
      pos_ = semi + 1;
    }
    return out;
  }

  Element element() {
    Element e;
    e.offset = pos_;
    expect('<');
    e.name = name();
    for (;;) {
      skip_space();
      if (peek() == '/') {
        ++pos_;
        expect('>');
        return e;
      }
      if (peek() == '>') {
        ++pos_;
        break;
      }
      auto key = name();
      skip_space();
      expect('=');
      skip_space();
      expect('"');
      auto value = decode_until('"');
      expect('"');
      for (const auto& [k, v] : e.attributes)
        if (k == key) fail("duplicate attribute '" + key + "'");
      e.attributes.emplace_back(std::move(key), std::move(value));
    }
    // Content: either text or child elements (whitespace between children
    // is ignored).
    for (;;) {
      if (pos_ >= doc_.size()) fail("unterminated element <" + e.name + ">");
      if (doc_.substr(pos_, 2) == "</") {
        pos_ += 2;
        auto closing = name();
        if (closing != e.name) fail("mismatched closing tag </" + closing + "> for <" + e.name + ">");
        skip_space();
        expect('>');
        if (!e.children.empty()) {
          bool blank = true;
          for (char c : e.text) blank = blank && std::isspace(static_cast<unsigned char>(c));
          if (!blank) fail("mixed content in <" + e.name + ">");
          e.text.clear();
        }
        return e;
      }
      if (peek() == '<') {
        e.children.push_back(element());
      } else {
        e.text += decode_until('<');
      }
    }
  }

  std::string_view doc_;
  std::size_t pos_ = 0;
};

}  // namespace

const std::string* Element::attribute(std::string_view key) const {
  for (const auto& [k, v] : attributes)
    if (k == key) return &v;
  return nullptr;
}

const std::string& Element::required(std::string_view key) const {
  if (const auto* v = attribute(key)) return *v;
  throw DecodeError(offset, "<" + name + "> is missing attribute '" + std::string(key) + "'");
}

Element parse(std::string_view document) { return Reader(document).document(); }

void append_escaped(std::string& out, std::string_view text, bool in_attribute) {
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"':
        if (in_attribute)
          out += "&quot;";
        else
          out.push_back(c);
        break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          out += "&#" + std::to_string(static_cast<int>(c)) + ";";
        } else {
          out.push_back(c);
        }
    }
  }
}

}  // namespace discom::model::xml
