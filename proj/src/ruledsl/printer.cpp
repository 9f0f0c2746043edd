#include <charconv>

#include "klafate/ruledsl.hpp"

namespace klafate::rules {

namespace {

enum Prec : int { kSelect = 0, kOr = 1, kAnd = 2, kNot = 3, kCompare = 4, kPrimary = 5 };

int precedence(const Expr& e) {
  return std::visit(
      [](const auto& n) -> int {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Select>) return kSelect;
        else if constexpr (std::is_same_v<T, Or>) return kOr;
        else if constexpr (std::is_same_v<T, And>) return kAnd;
        else if constexpr (std::is_same_v<T, Not>) return kNot;
        else if constexpr (std::is_same_v<T, Comparison>) return kCompare;
        else return kPrimary;
      },
      e.node);
}

void print(const Expr& e, int min_prec, std::string& out) {
  const bool parens = precedence(e) < min_prec;
  if (parens) out += '(';
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberLiteral>) {
          out += format_number(n.value);
        } else if constexpr (std::is_same_v<T, BoolLiteral>) {
          out += n.value ? "true" : "false";
        } else if constexpr (std::is_same_v<T, Ref>) {
          out += n.name;
        } else if constexpr (std::is_same_v<T, Comparison>) {
          print(*n.lhs, kPrimary, out);
          out += ' ';
          out += comparator_symbol(n.op);
          out += ' ';
          print(*n.rhs, kPrimary, out);
        } else if constexpr (std::is_same_v<T, Not>) {
          out += "not ";
          print(*n.operand, kNot, out);
        } else if constexpr (std::is_same_v<T, And>) {
          print(*n.lhs, kAnd, out);
          out += " and ";
          print(*n.rhs, kNot, out);
        } else if constexpr (std::is_same_v<T, Or>) {
          // Conjunctions under a disjunction get (redundant) parentheses so
          // the written rule reads the way workbooks spell it.
          print(*n.lhs, std::holds_alternative<And>(n.lhs->node) ? kNot : kOr, out);
          out += " or ";
          print(*n.rhs, std::holds_alternative<And>(n.rhs->node) ? kNot : kAnd, out);
        } else {
          print(*n.value, kOr, out);
          out += " if ";
          print(*n.condition, kOr, out);
          out += " else ";
          print(*n.otherwise, kSelect, out);
        }
      },
      e.node);
  if (parens) out += ')';
}

} // namespace

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string to_string(const Expr& expr) {
  std::string out;
  print(expr, kSelect, out);
  return out;
}

std::string defs_to_string(const std::vector<Alias>& defs) {
  std::string out;
  for (std::size_t i = 0; i < defs.size(); ++i) {
    if (i) out += "; ";
    out += defs[i].name + " := " + to_string(*defs[i].expr);
  }
  return out;
}

} // namespace klafate::rules
