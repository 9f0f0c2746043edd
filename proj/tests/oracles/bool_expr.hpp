#pragma once

// Independent model of boolean rule expressions over up to four variables
// C1..C4: random generation, direct evaluation over an assignment and
// printing with randomly redundant parentheses.

#include <array>
#include <memory>
#include <string>

#include "support.hpp"

namespace oracle {

struct RefExpr {
  enum Kind { Var, Lit, Neg, Conj, Disj, EqTrue } kind = Lit;
  int var = 0;
  bool lit = false;
  std::shared_ptr<RefExpr> a, b;
};

using RefPtr = std::shared_ptr<RefExpr>;

inline RefPtr gen_ref(testsupport::Gen& g, int depth, int nvars) {
  auto e = std::make_shared<RefExpr>();
  const int roll = depth <= 0 ? g.integer(0, 5) : g.integer(0, 11);
  if (roll <= 4) {
    e->kind = RefExpr::Var;
    e->var = g.integer(0, nvars - 1);
  } else if (roll == 5) {
    e->kind = RefExpr::Lit;
    e->lit = g.coin();
  } else if (roll <= 7) {
    e->kind = RefExpr::Neg;
    e->a = gen_ref(g, depth - 1, nvars);
  } else if (roll <= 9) {
    e->kind = roll == 8 ? RefExpr::Conj : RefExpr::Disj;
    e->a = gen_ref(g, depth - 1, nvars);
    e->b = gen_ref(g, depth - 1, nvars);
  } else {
    e->kind = RefExpr::EqTrue;
    e->var = g.integer(0, nvars - 1);
    e->lit = g.coin();
  }
  return e;
}

inline bool ref_eval(const RefExpr& e, const std::array<bool, 4>& v) {
  switch (e.kind) {
  case RefExpr::Var: return v[static_cast<std::size_t>(e.var)];
  case RefExpr::Lit: return e.lit;
  case RefExpr::Neg: return !ref_eval(*e.a, v);
  case RefExpr::Conj: return ref_eval(*e.a, v) && ref_eval(*e.b, v);
  case RefExpr::Disj: return ref_eval(*e.a, v) || ref_eval(*e.b, v);
  case RefExpr::EqTrue: return v[static_cast<std::size_t>(e.var)] == e.lit;
  }
  return false;
}

// Binding strength: or 1, and 2, not 3, atoms 4.
inline int strength(const RefExpr& e) {
  switch (e.kind) {
  case RefExpr::Disj: return 1;
  case RefExpr::Conj: return 2;
  case RefExpr::Neg: return 3;
  default: return 4;
  }
}

inline std::string ref_text(const RefExpr& e, testsupport::Gen& g);

inline std::string child_text(const RefExpr& child, int min_strength, testsupport::Gen& g) {
  auto t = ref_text(child, g);
  if (strength(child) < min_strength || (strength(child) < 4 && g.integer(0, 3) == 0)) {
    return "(" + t + ")";
  }
  return t;
}

inline std::string ref_text(const RefExpr& e, testsupport::Gen& g) {
  switch (e.kind) {
  case RefExpr::Var: return "C" + std::to_string(e.var + 1);
  case RefExpr::Lit: return e.lit ? "true" : "false";
  case RefExpr::Neg: return "not " + child_text(*e.a, 3, g);
  case RefExpr::Conj: return child_text(*e.a, 2, g) + " and " + child_text(*e.b, 3, g);
  case RefExpr::Disj: return child_text(*e.a, 1, g) + " or " + child_text(*e.b, 2, g);
  case RefExpr::EqTrue:
    return "C" + std::to_string(e.var + 1) + (g.coin() ? " == " : "==") +
           (e.lit ? "true" : "false");
  }
  return "";
}

} // namespace oracle
