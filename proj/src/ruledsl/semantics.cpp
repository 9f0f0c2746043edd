#include <cmath>
#include <map>

#include "klafate/ruledsl.hpp"

namespace klafate::rules {

namespace {

const char* kind_name(ValueKind k) {
  switch (k) {
  case ValueKind::Boolean: return "boolean";
  case ValueKind::Real: return "real";
  case ValueKind::Any: return "any";
  }
  return "?";
}

bool fits(ValueKind actual, ValueKind wanted) {
  return actual == ValueKind::Any || wanted == ValueKind::Any || actual == wanted;
}

void require(ValueKind actual, ValueKind wanted, const char* what, SourcePos pos) {
  if (!fits(actual, wanted)) {
    throw TypeMismatch(std::string(what) + " must be " + kind_name(wanted) + ", found " +
                           kind_name(actual),
                       pos);
  }
}

TypedExpr check(const ExprPtr& e, const SymbolTable& symbols) {
  const SourcePos pos = e->pos;
  return std::visit(
      [&](const auto& n) -> TypedExpr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberLiteral>) {
          return {e, ValueKind::Real};
        } else if constexpr (std::is_same_v<T, BoolLiteral>) {
          return {e, ValueKind::Boolean};
        } else if constexpr (std::is_same_v<T, Ref>) {
          const auto var = symbols.variables.find(n.name);
          const bool is_threshold = symbols.thresholds.contains(n.name);
          if (var != symbols.variables.end() && is_threshold) {
            throw TypeMismatch("'" + n.name + "' is declared both as variable and threshold", pos);
          }
          if (var != symbols.variables.end()) {
            return {make_ref(n.name, pos, RefKind::Variable), var->second};
          }
          if (is_threshold) {
            return {make_ref(n.name, pos, RefKind::Threshold), ValueKind::Real};
          }
          throw UnresolvedName(n.name, pos);
        } else if constexpr (std::is_same_v<T, Comparison>) {
          auto lhs = check(n.lhs, symbols);
          auto rhs = check(n.rhs, symbols);
          if (n.op == Comparator::Equal || n.op == Comparator::NotEqual) {
            if (!fits(lhs.kind, rhs.kind)) {
              throw TypeMismatch(std::string("cannot compare ") + kind_name(lhs.kind) + " with " +
                                     kind_name(rhs.kind),
                                 pos);
            }
          } else {
            require(lhs.kind, ValueKind::Real, "ordering operand", n.lhs->pos);
            require(rhs.kind, ValueKind::Real, "ordering operand", n.rhs->pos);
          }
          return {make_comparison(n.op, lhs.expr, rhs.expr, pos), ValueKind::Boolean};
        } else if constexpr (std::is_same_v<T, Not>) {
          auto inner = check(n.operand, symbols);
          require(inner.kind, ValueKind::Boolean, "operand of 'not'", n.operand->pos);
          return {make_not(inner.expr, pos), ValueKind::Boolean};
        } else if constexpr (std::is_same_v<T, And> || std::is_same_v<T, Or>) {
          auto lhs = check(n.lhs, symbols);
          auto rhs = check(n.rhs, symbols);
          const char* what = std::is_same_v<T, And> ? "operand of 'and'" : "operand of 'or'";
          require(lhs.kind, ValueKind::Boolean, what, n.lhs->pos);
          require(rhs.kind, ValueKind::Boolean, what, n.rhs->pos);
          if constexpr (std::is_same_v<T, And>) {
            return {make_and(lhs.expr, rhs.expr, pos), ValueKind::Boolean};
          } else {
            return {make_or(lhs.expr, rhs.expr, pos), ValueKind::Boolean};
          }
        } else {
          auto value = check(n.value, symbols);
          auto condition = check(n.condition, symbols);
          auto otherwise = check(n.otherwise, symbols);
          require(value.kind, ValueKind::Real, "selected value", n.value->pos);
          require(condition.kind, ValueKind::Boolean, "selection condition", n.condition->pos);
          require(otherwise.kind, ValueKind::Real, "else value", n.otherwise->pos);
          return {make_select(value.expr, condition.expr, otherwise.expr, pos), ValueKind::Real};
        }
      },
      e->node);
}

void collect(const Expr& e, std::set<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Ref>) {
          out.insert(n.name);
        } else if constexpr (std::is_same_v<T, Comparison> || std::is_same_v<T, And> ||
                             std::is_same_v<T, Or>) {
          collect(*n.lhs, out);
          collect(*n.rhs, out);
        } else if constexpr (std::is_same_v<T, Not>) {
          collect(*n.operand, out);
        } else if constexpr (std::is_same_v<T, Select>) {
          collect(*n.value, out);
          collect(*n.condition, out);
          collect(*n.otherwise, out);
        }
      },
      e.node);
}

ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr, std::less<>>& env) {
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Ref>) {
          auto it = env.find(n.name);
          return it == env.end() ? e : it->second;
        } else if constexpr (std::is_same_v<T, Comparison>) {
          return make_comparison(n.op, substitute(n.lhs, env), substitute(n.rhs, env), e->pos);
        } else if constexpr (std::is_same_v<T, Not>) {
          return make_not(substitute(n.operand, env), e->pos);
        } else if constexpr (std::is_same_v<T, And>) {
          return make_and(substitute(n.lhs, env), substitute(n.rhs, env), e->pos);
        } else if constexpr (std::is_same_v<T, Or>) {
          return make_or(substitute(n.lhs, env), substitute(n.rhs, env), e->pos);
        } else if constexpr (std::is_same_v<T, Select>) {
          return make_select(substitute(n.value, env), substitute(n.condition, env),
                             substitute(n.otherwise, env), e->pos);
        } else {
          return e;
        }
      },
      e->node);
}

const Value& lookup(const Ref& ref, const Snapshot& snapshot, const ThresholdSet& thresholds,
                    Value& scratch) {
  if (ref.kind != RefKind::Threshold) {
    if (auto it = snapshot.values.find(ref.name); it != snapshot.values.end()) {
      return it->second;
    }
  }
  if (ref.kind != RefKind::Variable) {
    if (auto it = thresholds.find(ref.name); it != thresholds.end()) {
      scratch = it->second.value;
      return scratch;
    }
  }
  throw EvalError("no value for '" + ref.name + "'", ref.name);
}

bool as_bool(const Value& v, const Expr& where) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw EvalError("expected boolean value for '" + to_string(where) + "'", "");
}

double as_real(const Value& v, const Expr& where) {
  if (const double* d = std::get_if<double>(&v)) return *d;
  throw EvalError("expected real value for '" + to_string(where) + "'", "");
}

} // namespace

TypedExpr typecheck(const ExprPtr& expr, const SymbolTable& symbols) {
  return check(expr, symbols);
}

TypedExpr typecheck(const ExprPtr& expr, const std::set<std::string>& variables,
                    const std::set<std::string>& thresholds) {
  SymbolTable table;
  for (const auto& v : variables) table.variables.emplace(v, ValueKind::Any);
  table.thresholds.insert(thresholds.begin(), thresholds.end());
  return check(expr, table);
}

std::set<std::string> referenced_names(const Expr& expr) {
  std::set<std::string> out;
  collect(expr, out);
  return out;
}

ExprPtr expand_aliases(const ExprPtr& expr, const std::vector<Alias>& defs) {
  std::map<std::string, ExprPtr, std::less<>> env;
  for (const auto& alias : defs) {
    // Aliases defined later are not yet in env, so forward and self references
    // stay unresolved names and fail at typecheck.
    env.insert_or_assign(alias.name, substitute(alias.expr, env));
  }
  return substitute(expr, env);
}

Value evaluate(const Expr& expr, const Snapshot& snapshot, const ThresholdSet& thresholds) {
  return std::visit(
      [&](const auto& n) -> Value {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberLiteral>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, BoolLiteral>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, Ref>) {
          Value scratch;
          return lookup(n, snapshot, thresholds, scratch);
        } else if constexpr (std::is_same_v<T, Comparison>) {
          const Value lhs = evaluate(*n.lhs, snapshot, thresholds);
          const Value rhs = evaluate(*n.rhs, snapshot, thresholds);
          if (n.op == Comparator::Equal || n.op == Comparator::NotEqual) {
            bool equal = false;
            if (lhs.index() != rhs.index()) {
              throw EvalError("cannot compare boolean with real in '" + to_string(expr) + "'", "");
            }
            if (const double* a = std::get_if<double>(&lhs)) {
              equal = std::abs(*a - std::get<double>(rhs)) <= kEqualityTolerance;
            } else {
              equal = std::get<bool>(lhs) == std::get<bool>(rhs);
            }
            return n.op == Comparator::Equal ? equal : !equal;
          }
          const double a = as_real(lhs, *n.lhs);
          const double b = as_real(rhs, *n.rhs);
          switch (n.op) {
          case Comparator::Less: return a < b;
          case Comparator::LessEqual: return a <= b;
          case Comparator::Greater: return a > b;
          default: return a >= b;
          }
        } else if constexpr (std::is_same_v<T, Not>) {
          return !as_bool(evaluate(*n.operand, snapshot, thresholds), *n.operand);
        } else if constexpr (std::is_same_v<T, And>) {
          if (!as_bool(evaluate(*n.lhs, snapshot, thresholds), *n.lhs)) return false;
          return as_bool(evaluate(*n.rhs, snapshot, thresholds), *n.rhs);
        } else if constexpr (std::is_same_v<T, Or>) {
          if (as_bool(evaluate(*n.lhs, snapshot, thresholds), *n.lhs)) return true;
          return as_bool(evaluate(*n.rhs, snapshot, thresholds), *n.rhs);
        } else {
          if (as_bool(evaluate(*n.condition, snapshot, thresholds), *n.condition)) {
            return evaluate(*n.value, snapshot, thresholds);
          }
          return evaluate(*n.otherwise, snapshot, thresholds);
        }
      },
      expr.node);
}

bool eval_bool(const Expr& expr, const Snapshot& snapshot, const ThresholdSet& thresholds) {
  return as_bool(evaluate(expr, snapshot, thresholds), expr);
}

double eval_real(const Expr& expr, const Snapshot& snapshot, const ThresholdSet& thresholds) {
  return as_real(evaluate(expr, snapshot, thresholds), expr);
}

} // namespace klafate::rules
