#include "klafate/ruledsl.hpp"

namespace klafate::rules {

namespace {
ExprPtr wrap(Node node, SourcePos pos) {
  return std::make_shared<const Expr>(Expr{std::move(node), pos});
}
} // namespace

ExprPtr make_number(double v, SourcePos pos) { return wrap(NumberLiteral{v}, pos); }
ExprPtr make_bool(bool v, SourcePos pos) { return wrap(BoolLiteral{v}, pos); }
ExprPtr make_ref(std::string name, SourcePos pos, RefKind kind) {
  return wrap(Ref{std::move(name), kind}, pos);
}
ExprPtr make_comparison(Comparator op, ExprPtr lhs, ExprPtr rhs, SourcePos pos) {
  return wrap(Comparison{op, std::move(lhs), std::move(rhs)}, pos);
}
ExprPtr make_not(ExprPtr operand, SourcePos pos) { return wrap(Not{std::move(operand)}, pos); }
ExprPtr make_and(ExprPtr lhs, ExprPtr rhs, SourcePos pos) {
  return wrap(And{std::move(lhs), std::move(rhs)}, pos);
}
ExprPtr make_or(ExprPtr lhs, ExprPtr rhs, SourcePos pos) {
  return wrap(Or{std::move(lhs), std::move(rhs)}, pos);
}
ExprPtr make_select(ExprPtr value, ExprPtr condition, ExprPtr otherwise, SourcePos pos) {
  return wrap(Select{std::move(value), std::move(condition), std::move(otherwise)}, pos);
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) {
    return false;
  }
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, NumberLiteral>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, BoolLiteral>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, Ref>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, Comparison>) {
          return x.op == y.op && structurally_equal(*x.lhs, *y.lhs) &&
                 structurally_equal(*x.rhs, *y.rhs);
        } else if constexpr (std::is_same_v<T, Not>) {
          return structurally_equal(*x.operand, *y.operand);
        } else if constexpr (std::is_same_v<T, And> || std::is_same_v<T, Or>) {
          return structurally_equal(*x.lhs, *y.lhs) && structurally_equal(*x.rhs, *y.rhs);
        } else {
          return structurally_equal(*x.value, *y.value) &&
                 structurally_equal(*x.condition, *y.condition) &&
                 structurally_equal(*x.otherwise, *y.otherwise);
        }
      },
      a.node);
}

std::string_view comparator_symbol(Comparator op) {
  switch (op) {
  case Comparator::Less: return "<";
  case Comparator::LessEqual: return "<=";
  case Comparator::Greater: return ">";
  case Comparator::GreaterEqual: return ">=";
  case Comparator::Equal: return "==";
  case Comparator::NotEqual: return "!=";
  }
  return "?";
}

namespace {
std::string at(SourcePos pos) {
  return " at line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column);
}
} // namespace

SyntaxError::SyntaxError(const std::string& message, SourcePos pos,
                         std::vector<std::string> expected)
    : Error([&] {
        std::string text = "syntax error" + at(pos) + ": " + message;
        if (!expected.empty()) {
          text += " (expected ";
          for (std::size_t i = 0; i < expected.size(); ++i) {
            text += (i ? ", " : "") + expected[i];
          }
          text += ")";
        }
        return text;
      }()),
      pos_(pos), expected_(std::move(expected)) {}

UnknownOperator::UnknownOperator(const std::string& op, SourcePos pos)
    : SyntaxError("unknown operator '" + op + "'", pos), op_(op) {}

UnresolvedName::UnresolvedName(std::string name, SourcePos pos)
    : Error("unresolved name '" + name + "'" + at(pos)), name_(std::move(name)), pos_(pos) {}

TypeMismatch::TypeMismatch(const std::string& message, SourcePos pos)
    : Error("type mismatch" + at(pos) + ": " + message), pos_(pos) {}

EvalError::EvalError(const std::string& message, std::string variable)
    : Error(message), variable_(std::move(variable)) {}

} // namespace klafate::rules
