#include "memscope/region_config.hpp"

#include <cctype>
#include <cstdio>
#include <optional>

namespace memscope {
namespace {

enum class Tok { ident, number, string, at, lbrace, rbrace, langle, rangle, equals, semi, end };

struct Token {
  Tok kind;
  std::string text;      // ident / string payload
  std::uint64_t value;   // number payload
  int line;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_space();
    if (pos_ >= text_.size()) return {Tok::end, "", 0, line_};
    char c = text_[pos_];
    int line = line_;
    switch (c) {
      case '@': ++pos_; return {Tok::at, "@", 0, line};
      case '{': ++pos_; return {Tok::lbrace, "{", 0, line};
      case '}': ++pos_; return {Tok::rbrace, "}", 0, line};
      case '<': ++pos_; return {Tok::langle, "<", 0, line};
      case '>': ++pos_; return {Tok::rangle, ">", 0, line};
      case '=': ++pos_; return {Tok::equals, "=", 0, line};
      case ';': ++pos_; return {Tok::semi, ";", 0, line};
      case '"': return lex_string();
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return lex_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_ident();
    throw ParseError(line_, std::string("unexpected character '") + c + "'");
  }

 private:
  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  Token lex_string() {
    int line = line_;
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\n') throw ParseError(line, "unterminated string");
      out.push_back(text_[pos_++]);
    }
    if (pos_ >= text_.size()) throw ParseError(line, "unterminated string");
    ++pos_;  // closing quote
    return {Tok::string, out, 0, line};
  }

  Token lex_number() {
    int line = line_;
    std::uint64_t v = 0;
    if (text_.substr(pos_).starts_with("0x") || text_.substr(pos_).starts_with("0X")) {
      pos_ += 2;
      size_t start = pos_;
      while (pos_ < text_.size() && std::isxdigit(static_cast<unsigned char>(text_[pos_]))) {
        v = v * 16 + hex_digit(text_[pos_++]);
      }
      if (pos_ == start) throw ParseError(line, "malformed hex literal");
    } else {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        v = v * 10 + static_cast<std::uint64_t>(text_[pos_++] - '0');
      }
    }
    return {Tok::number, "", v, line};
  }

  // Node names and property names. Also covers bare-hex unit addresses such
  // as "a0000000"; those start with a digit and are handled by lex_number, so
  // unit addresses are re-read from either token kind by the parser.
  Token lex_ident() {
    int line = line_;
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ',') {
        out.push_back(c);
        ++pos_;
      } else {
        break;
      }
    }
    return {Tok::ident, out, 0, line};
  }

  static std::uint64_t hex_digit(char c) {
    if (c >= '0' && c <= '9') return static_cast<std::uint64_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint64_t>(c - 'a' + 10);
    return static_cast<std::uint64_t>(c - 'A' + 10);
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1;
};

class Parser {
 public:
  Parser(std::string_view text, std::uint64_t page_size)
      : lex_(text), page_size_(page_size) {
    advance();
  }

  RegionParseResult run() {
    RegionParseResult out;
    while (cur_.kind != Tok::end) {
      parse_node(out);
    }
    return out;
  }

 private:
  void advance() { cur_ = lex_.next(); }

  void expect(Tok kind, const char* what) {
    if (cur_.kind != kind) throw ParseError(cur_.line, std::string("expected ") + what);
    advance();
  }

  void parse_node(RegionParseResult& out) {
    if (cur_.kind != Tok::ident)
      throw ParseError(cur_.line, "expected node name");
    const std::string name = cur_.text;
    const int node_line = cur_.line;
    advance();
    expect(Tok::at, "'@' after node name");
    // Unit address: bare hex (conventionally) or a 0x literal; informational
    // only, the authoritative base comes from reg.
    if (cur_.kind == Tok::number || cur_.kind == Tok::ident) {
      advance();
    } else {
      throw ParseError(cur_.line, "expected unit address after '@'");
    }
    expect(Tok::lbrace, "'{'");

    std::optional<std::string> compatible;
    std::optional<std::vector<std::uint64_t>> reg_cells;
    while (cur_.kind != Tok::rbrace) {
      parse_prop(compatible, reg_cells);
    }
    advance();  // '}'
    expect(Tok::semi, "';' after node");

    // Only nodes tagged "mempool" are candidates; anything else is not for us.
    if (!compatible || *compatible != "mempool") return;

    if (!reg_cells) {
      out.diagnostics.push_back("node '" + name + "' (line " + std::to_string(node_line) +
                                "): missing reg property, node ignored");
      return;
    }
    if (reg_cells->size() != 4) {
      out.diagnostics.push_back("node '" + name + "' (line " + std::to_string(node_line) +
                                "): reg must carry 4 cells, got " +
                                std::to_string(reg_cells->size()) + ", node ignored");
      return;
    }
    const std::uint64_t base = ((*reg_cells)[0] << 32) | (*reg_cells)[1];
    const std::uint64_t size = ((*reg_cells)[2] << 32) | (*reg_cells)[3];
    if (size == 0) {
      out.diagnostics.push_back("node '" + name + "' (line " + std::to_string(node_line) +
                                "): zero-sized region, node ignored");
      return;
    }
    if (size % page_size_ != 0) {
      out.diagnostics.push_back("node '" + name + "' (line " + std::to_string(node_line) +
                                "): size " + std::to_string(size) +
                                " not a multiple of the page size, node ignored");
      return;
    }
    out.regions.push_back({name, base, size, *compatible});
  }

  void parse_prop(std::optional<std::string>& compatible,
                  std::optional<std::vector<std::uint64_t>>& reg_cells) {
    if (cur_.kind != Tok::ident)
      throw ParseError(cur_.line, "expected property name");
    const std::string prop = cur_.text;
    const int prop_line = cur_.line;
    advance();
    expect(Tok::equals, "'=' after property name");

    if (prop == "compatible" || prop == "device_type") {
      if (cur_.kind != Tok::string)
        throw ParseError(prop_line, "expected string value for '" + prop + "'");
      if (prop == "compatible") compatible = cur_.text;
      advance();
    } else if (prop == "reg") {
      expect(Tok::langle, "'<'");
      std::vector<std::uint64_t> cells;
      while (cur_.kind == Tok::number) {
        cells.push_back(cur_.value);
        advance();
      }
      expect(Tok::rangle, "'>'");
      reg_cells = std::move(cells);
    } else {
      throw ParseError(prop_line, "unknown property '" + prop + "'");
    }
    expect(Tok::semi, "';' after property");
  }

  Lexer lex_;
  std::uint64_t page_size_;
  Token cur_{Tok::end, "", 0, 1};
};

}  // namespace

RegionParseResult parse_region_config(std::string_view text, std::uint64_t page_size) {
  Parser p(text, page_size);
  return p.run();
}

std::string render_region_config(const std::vector<MemoryRegionDescriptor>& regions) {
  std::string out;
  char buf[160];
  for (const auto& r : regions) {
    std::snprintf(buf, sizeof(buf), "%s@%llx {\n", r.name.c_str(),
                  static_cast<unsigned long long>(r.base));
    out += buf;
    out += "  compatible = \"" + r.compatible + "\";\n";
    std::snprintf(buf, sizeof(buf), "  reg = <0x%llx 0x%llx 0x%llx 0x%llx>;\n",
                  static_cast<unsigned long long>(r.base >> 32),
                  static_cast<unsigned long long>(r.base & 0xffffffffull),
                  static_cast<unsigned long long>(r.size >> 32),
                  static_cast<unsigned long long>(r.size & 0xffffffffull));
    out += buf;
    out += "};\n";
  }
  return out;
}

std::vector<MemoryRegionDescriptor> default_regions() {
  return {
      {"dram", 0x10000000, 256ull << 20, "mempool"},
      {"pldram", 0x50000000, 256ull << 20, "mempool"},
      {"bram", 0xa0000000, 1ull << 20, "mempool"},
      {"ocm", 0xfffc0000, 128ull << 10, "mempool"},
  };
}

}  // namespace memscope
