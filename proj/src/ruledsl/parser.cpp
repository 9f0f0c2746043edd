#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include "klafate/ruledsl.hpp"

namespace klafate::rules {

namespace {

enum class Tok {
  Ident,
  Number,
  Minus,
  LParen,
  RParen,
  Cmp,
  And,
  Or,
  Not,
  If,
  Else,
  True,
  False,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourcePos pos;
  double number = 0.0;
  Comparator cmp = Comparator::Less;
};

std::string describe(const Token& t) {
  switch (t.kind) {
  case Tok::End: return "end of input";
  case Tok::Ident: return "identifier '" + t.text + "'";
  case Tok::Number: return "number '" + t.text + "'";
  default: return "'" + t.text + "'";
  }
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}
bool is_operator_char(char c) {
  static constexpr std::string_view ops = "+-*/%&|!=^~:?,<>;@";
  return ops.find(c) != std::string_view::npos;
}

class Lexer {
public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.pos = pos_;
      if (i_ >= text_.size()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      const char c = text_[i_];
      if (is_ident_start(c)) {
        const std::size_t start = i_;
        while (i_ < text_.size() && is_ident_char(text_[i_])) advance();
        t.text = std::string(text_.substr(start, i_ - start));
        t.kind = keyword(t.text);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        lex_number(t);
      } else if (c == '(' || c == ')') {
        t.kind = c == '(' ? Tok::LParen : Tok::RParen;
        t.text = std::string(1, c);
        advance();
      } else if (is_operator_char(c)) {
        lex_operator(t);
      } else {
        throw SyntaxError(std::string("unexpected character '") + c + "'", pos_);
      }
      out.push_back(std::move(t));
    }
  }

private:
  static Tok keyword(const std::string& s) {
    if (s == "and") return Tok::And;
    if (s == "or") return Tok::Or;
    if (s == "not") return Tok::Not;
    if (s == "if") return Tok::If;
    if (s == "else") return Tok::Else;
    if (s == "true") return Tok::True;
    if (s == "false") return Tok::False;
    return Tok::Ident;
  }

  void advance() {
    if (text_[i_] == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else {
      ++pos_.column;
    }
    ++i_;
  }

  void skip_space() {
    while (i_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[i_]))) advance();
  }

  void lex_number(Token& t) {
    const std::size_t start = i_;
    auto digits = [&] {
      while (i_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i_]))) advance();
    };
    digits();
    if (i_ < text_.size() && text_[i_] == '.') {
      advance();
      digits();
    }
    if (i_ < text_.size() && (text_[i_] == 'e' || text_[i_] == 'E')) {
      std::size_t look = i_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        while (i_ < look) advance();
        digits();
      }
    }
    if (i_ < text_.size() && is_ident_start(text_[i_])) {
      throw SyntaxError("malformed number", t.pos);
    }
    t.kind = Tok::Number;
    t.text = std::string(text_.substr(start, i_ - start));
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
    if (ec != std::errc() || !std::isfinite(t.number)) {
      throw SyntaxError("number out of range '" + t.text + "'", t.pos);
    }
  }

  void lex_operator(Token& t) {
    const std::size_t start = i_;
    while (i_ < text_.size() && is_operator_char(text_[i_])) advance();
    std::string op(text_.substr(start, i_ - start));
    // A single '-' directly before a digit is the sign of a literal.
    if (op == "-") {
      t.kind = Tok::Minus;
      t.text = op;
      return;
    }
    static const std::pair<std::string_view, Comparator> table[] = {
        {"<", Comparator::Less},    {"<=", Comparator::LessEqual}, {">", Comparator::Greater},
        {">=", Comparator::GreaterEqual}, {"==", Comparator::Equal}, {"!=", Comparator::NotEqual},
    };
    for (const auto& [sym, cmp] : table) {
      if (op == sym) {
        t.kind = Tok::Cmp;
        t.cmp = cmp;
        t.text = op;
        return;
      }
    }
    // "<-1" style runs: comparator followed by a literal sign.
    if (op.size() >= 2 && op.back() == '-') {
      std::string head = op.substr(0, op.size() - 1);
      for (const auto& [sym, cmp] : table) {
        if (head == sym) {
          // Rewind one char so the minus is lexed on its own.
          --i_;
          --pos_.column;
          t.kind = Tok::Cmp;
          t.cmp = cmp;
          t.text = head;
          return;
        }
      }
    }
    throw UnknownOperator(op, t.pos);
  }

  std::string_view text_;
  std::size_t i_ = 0;
  SourcePos pos_;
};

class Parser {
public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  ExprPtr parse_all() {
    auto e = parse_select();
    if (peek().kind != Tok::End) {
      fail({"and", "or", "if", "comparison operator", "end of input"});
    }
    return e;
  }

private:
  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_++]; }
  bool accept(Tok k) {
    if (peek().kind == k) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    throw SyntaxError("unexpected " + describe(peek()), peek().pos, std::move(expected));
  }

  ExprPtr parse_select() {
    auto value = parse_or();
    if (peek().kind == Tok::If) {
      const SourcePos pos = take().pos;
      auto condition = parse_or();
      if (!accept(Tok::Else)) fail({"else"});
      auto otherwise = parse_select();
      return make_select(std::move(value), std::move(condition), std::move(otherwise), pos);
    }
    return value;
  }

  ExprPtr parse_or() {
    auto lhs = parse_and();
    while (peek().kind == Tok::Or) {
      const SourcePos pos = take().pos;
      lhs = make_or(std::move(lhs), parse_and(), pos);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    auto lhs = parse_not();
    while (peek().kind == Tok::And) {
      const SourcePos pos = take().pos;
      lhs = make_and(std::move(lhs), parse_not(), pos);
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (peek().kind == Tok::Not) {
      const SourcePos pos = take().pos;
      return make_not(parse_not(), pos);
    }
    return parse_comparison();
  }

  ExprPtr parse_comparison() {
    auto lhs = parse_primary();
    if (peek().kind == Tok::Cmp) {
      const Token op = take();
      auto rhs = parse_primary();
      if (peek().kind == Tok::Cmp) {
        throw SyntaxError("chained comparisons are not supported", peek().pos,
                          {"and", "or", "')'"});
      }
      return make_comparison(op.cmp, std::move(lhs), std::move(rhs), op.pos);
    }
    return lhs;
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    switch (t.kind) {
    case Tok::Number: {
      auto tok = take();
      return make_number(tok.number, tok.pos);
    }
    case Tok::Minus: {
      const SourcePos pos = take().pos;
      if (peek().kind != Tok::Number || peek().pos.column != pos.column + 1 ||
          peek().pos.line != pos.line) {
        throw UnknownOperator("-", pos);
      }
      return make_number(-take().number, pos);
    }
    case Tok::True:
      return make_bool(true, take().pos);
    case Tok::False:
      return make_bool(false, take().pos);
    case Tok::Ident: {
      auto tok = take();
      return make_ref(std::move(tok.text), tok.pos);
    }
    case Tok::LParen: {
      take();
      auto inner = parse_select();
      if (!accept(Tok::RParen)) fail({"')'"});
      return inner;
    }
    default:
      fail({"identifier", "number", "true", "false", "not", "'('"});
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

} // namespace

ExprPtr parse_rule(std::string_view text) {
  if (trim(text).empty()) {
    throw SyntaxError("empty rule", SourcePos{}, {"expression"});
  }
  return Parser(Lexer(text).run()).parse_all();
}

std::vector<Alias> parse_defs(std::string_view text) {
  std::vector<Alias> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(';', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string part = trim(text.substr(start, end - start));
    start = end + 1;
    if (part.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const std::size_t def = part.find(":=");
    if (def == std::string::npos) {
      throw SyntaxError("alias definition needs ':=' in '" + part + "'", SourcePos{}, {"':='"});
    }
    std::string name = trim(std::string_view(part).substr(0, def));
    if (name.empty() || !is_ident_start(name.front()) ||
        !std::all_of(name.begin(), name.end(), is_ident_char)) {
      throw SyntaxError("invalid alias name '" + name + "'", SourcePos{}, {"identifier"});
    }
    for (const auto& a : out) {
      if (a.name == name) {
        throw SyntaxError("alias '" + name + "' defined twice", SourcePos{});
      }
    }
    out.push_back(Alias{std::move(name), parse_rule(std::string_view(part).substr(def + 2))});
    if (end == text.size()) break;
  }
  return out;
}

} // namespace klafate::rules
