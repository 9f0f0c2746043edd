#pragma once

// Rule expression language used by workbook cells: boolean rules over
// process variables and thresholds plus `x if c else y` selection for the
// real-valued weight criteria. Grammar reference: docs/rule_grammar.md.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "klafate/error.hpp"

namespace klafate::rules {

enum class ValueKind { Boolean, Real, Any };

enum class Comparator { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual };

enum class RefKind { Unresolved, Variable, Threshold };

struct SourcePos {
  int line = 1;
  int column = 1;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct NumberLiteral {
  double value = 0.0;
};
struct BoolLiteral {
  bool value = false;
};
// Variable or threshold reference; typecheck fills in the kind.
struct Ref {
  std::string name;
  RefKind kind = RefKind::Unresolved;
};
struct Comparison {
  Comparator op = Comparator::Less;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct Not {
  ExprPtr operand;
};
struct And {
  ExprPtr lhs;
  ExprPtr rhs;
};
struct Or {
  ExprPtr lhs;
  ExprPtr rhs;
};
// `value if condition else otherwise`
struct Select {
  ExprPtr value;
  ExprPtr condition;
  ExprPtr otherwise;
};

using Node = std::variant<NumberLiteral, BoolLiteral, Ref, Comparison, Not, And, Or, Select>;

struct Expr {
  Node node;
  SourcePos pos;
};

ExprPtr make_number(double v, SourcePos pos = {});
ExprPtr make_bool(bool v, SourcePos pos = {});
ExprPtr make_ref(std::string name, SourcePos pos = {}, RefKind kind = RefKind::Unresolved);
ExprPtr make_comparison(Comparator op, ExprPtr lhs, ExprPtr rhs, SourcePos pos = {});
ExprPtr make_not(ExprPtr operand, SourcePos pos = {});
ExprPtr make_and(ExprPtr lhs, ExprPtr rhs, SourcePos pos = {});
ExprPtr make_or(ExprPtr lhs, ExprPtr rhs, SourcePos pos = {});
ExprPtr make_select(ExprPtr value, ExprPtr condition, ExprPtr otherwise, SourcePos pos = {});

// Equality of shape and payload; positions and reference kinds are ignored.
bool structurally_equal(const Expr& a, const Expr& b);

std::string_view comparator_symbol(Comparator op);

// --- errors ---------------------------------------------------------------

class SyntaxError : public Error {
public:
  SyntaxError(const std::string& message, SourcePos pos, std::vector<std::string> expected = {});
  SourcePos pos() const noexcept { return pos_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
  SourcePos pos_;
  std::vector<std::string> expected_;
};

class UnknownOperator : public SyntaxError {
public:
  UnknownOperator(const std::string& op, SourcePos pos);
  const std::string& op() const noexcept { return op_; }

private:
  std::string op_;
};

class UnresolvedName : public Error {
public:
  UnresolvedName(std::string name, SourcePos pos);
  const std::string& name() const noexcept { return name_; }
  SourcePos pos() const noexcept { return pos_; }

private:
  std::string name_;
  SourcePos pos_;
};

class TypeMismatch : public Error {
public:
  TypeMismatch(const std::string& message, SourcePos pos);
  SourcePos pos() const noexcept { return pos_; }

private:
  SourcePos pos_;
};

class EvalError : public Error {
public:
  EvalError(const std::string& message, std::string variable);
  const std::string& variable() const noexcept { return variable_; }

private:
  std::string variable_;
};

// --- parsing and printing -------------------------------------------------

ExprPtr parse_rule(std::string_view text);

// Canonical text. parse_rule(to_string(e)) is structurally equal to e.
std::string to_string(const Expr& expr);
inline std::string to_string(const ExprPtr& expr) { return to_string(*expr); }

std::string format_number(double v);

// Named sub-condition, written `C1 := <expr>` in a workbook defs cell.
struct Alias {
  std::string name;
  ExprPtr expr;
};

// Parses `C1 := expr; C2 := expr`. Empty text yields no aliases.
std::vector<Alias> parse_defs(std::string_view text);
std::string defs_to_string(const std::vector<Alias>& defs);

// Inlines aliases into `expr`. An alias may use any alias defined before it.
ExprPtr expand_aliases(const ExprPtr& expr, const std::vector<Alias>& defs);

// --- typing ---------------------------------------------------------------

struct SymbolTable {
  std::map<std::string, ValueKind, std::less<>> variables;
  std::set<std::string, std::less<>> thresholds;
};

struct TypedExpr {
  ExprPtr expr; // references resolved to Variable / Threshold
  ValueKind kind = ValueKind::Any;
};

TypedExpr typecheck(const ExprPtr& expr, const SymbolTable& symbols);
// Variables given as a bare name set are treated as ValueKind::Any.
TypedExpr typecheck(const ExprPtr& expr, const std::set<std::string>& variables,
                    const std::set<std::string>& thresholds);

// Names referenced anywhere in the expression, sorted.
std::set<std::string> referenced_names(const Expr& expr);

// --- evaluation -----------------------------------------------------------

using Value = std::variant<bool, double>;

struct Snapshot {
  std::map<std::string, Value, std::less<>> values;
  double timestamp = 0.0;

  void set(std::string name, Value v) { values.insert_or_assign(std::move(name), v); }
  bool operator==(const Snapshot&) const = default;
};

struct Threshold {
  double value = 0.0;
  std::string unit;
  bool operator==(const Threshold&) const = default;
};

using ThresholdSet = std::map<std::string, Threshold, std::less<>>;

inline constexpr double kEqualityTolerance = 1e-9;

Value evaluate(const Expr& expr, const Snapshot& snapshot, const ThresholdSet& thresholds);
bool eval_bool(const Expr& expr, const Snapshot& snapshot, const ThresholdSet& thresholds);
double eval_real(const Expr& expr, const Snapshot& snapshot, const ThresholdSet& thresholds);

} // namespace klafate::rules
