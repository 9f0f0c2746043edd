#include "klafate/exclusivity.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <random>
#include <unordered_map>

namespace klafate::rules {

namespace {

// Postfix program evaluated bit-sliced: lane j of a block holds assignment
// block * 64 + j, so one pass decides 64 assignments.
inline constexpr std::uint32_t kLaneBits = 6;
inline constexpr std::uint64_t kLanePattern[kLaneBits] = {
    0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL, 0xF0F0F0F0F0F0F0F0ULL,
    0xFF00FF00FF00FF00ULL, 0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL};

struct Program {
  enum class Op : std::uint8_t { Var, Const, Not, And, Or };
  struct Instr {
    Op op;
    std::uint32_t arg;
  };
  std::vector<Instr> code;

  std::uint64_t run(std::uint64_t block, std::vector<std::uint64_t>& stack) const {
    stack.clear();
    for (const auto& in : code) {
      switch (in.op) {
      case Op::Var:
        if (in.arg < kLaneBits) {
          stack.push_back(kLanePattern[in.arg]);
        } else {
          stack.push_back(((block >> (in.arg - kLaneBits)) & 1U) ? ~0ULL : 0ULL);
        }
        break;
      case Op::Const: stack.push_back(in.arg ? ~0ULL : 0ULL); break;
      case Op::Not: stack.back() = ~stack.back(); break;
      case Op::And: {
        const auto b = stack.back();
        stack.pop_back();
        stack.back() &= b;
        break;
      }
      case Op::Or: {
        const auto b = stack.back();
        stack.pop_back();
        stack.back() |= b;
        break;
      }
      }
    }
    return stack.back();
  }

  bool holds(std::uint64_t mask, std::vector<std::uint64_t>& stack) const {
    const auto lanes = run(mask >> kLaneBits, stack);
    return ((lanes >> (mask & 63U)) & 1U) != 0;
  }
};

void compile(const Expr& e, const std::unordered_map<std::string, std::uint32_t>& index,
             Program& p) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        using Op = Program::Op;
        if constexpr (std::is_same_v<T, Ref>) {
          auto it = index.find(n.name);
          if (it == index.end()) {
            throw InvalidParameter("rule references '" + n.name +
                                   "' which is not a listed condition variable");
          }
          p.code.push_back({Op::Var, it->second});
        } else if constexpr (std::is_same_v<T, BoolLiteral>) {
          p.code.push_back({Op::Const, n.value ? 1U : 0U});
        } else if constexpr (std::is_same_v<T, Not>) {
          compile(*n.operand, index, p);
          p.code.push_back({Op::Not, 0});
        } else if constexpr (std::is_same_v<T, And> || std::is_same_v<T, Or>) {
          compile(*n.lhs, index, p);
          compile(*n.rhs, index, p);
          p.code.push_back({std::is_same_v<T, And> ? Op::And : Op::Or, 0});
        } else {
          throw InvalidParameter("exclusivity check needs purely boolean rules; abstract "
                                 "comparisons into atoms first");
        }
      },
      e.node);
}

void check_capacity(std::span<const std::string> vars) {
  if (vars.size() > kMaxExhaustiveConditions) {
    throw CapacityError(std::to_string(vars.size()) +
                        " condition variables exceed the exhaustive limit of " +
                        std::to_string(kMaxExhaustiveConditions) +
                        "; use sample_mutual_exclusivity instead");
  }
}

ExclusivityReport make_report(std::uint64_t witness_mask, std::span<const std::string> vars,
                              std::vector<std::size_t> overlapping, std::uint64_t checked) {
  ExclusivityReport r;
  r.exclusive = false;
  r.assignments_checked = checked;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    r.witness[vars[i]] = ((witness_mask >> i) & 1U) != 0;
  }
  r.overlapping_rules = std::move(overlapping);
  return r;
}

Snapshot assignment_snapshot(std::uint64_t mask, std::span<const std::string> vars) {
  Snapshot s;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    s.set(vars[i], ((mask >> i) & 1U) != 0);
  }
  return s;
}

} // namespace

ExclusivityReport check_mutual_exclusivity(std::span<const ExprPtr> rules,
                                           std::span<const std::string> condition_vars) {
  check_capacity(condition_vars);
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::uint32_t i = 0; i < condition_vars.size(); ++i) index.emplace(condition_vars[i], i);

  std::vector<Program> programs(rules.size());
  for (std::size_t r = 0; r < rules.size(); ++r) compile(*rules[r], index, programs[r]);

  const std::int64_t total = std::int64_t{1} << condition_vars.size();
  const std::int64_t blocks = std::max<std::int64_t>(1, total >> kLaneBits);
  const std::uint64_t live = total >= 64 ? ~0ULL : ((1ULL << total) - 1);
  std::int64_t first = std::numeric_limits<std::int64_t>::max();

#pragma omp parallel
  {
    std::vector<std::uint64_t> stack;
    stack.reserve(64);
#pragma omp for reduction(min : first) schedule(static)
    for (std::int64_t block = 0; block < blocks; ++block) {
      if ((block << kLaneBits) > first) continue;
      std::uint64_t once = 0;
      std::uint64_t twice = 0;
      for (const auto& p : programs) {
        const auto hit = p.run(static_cast<std::uint64_t>(block), stack) & live;
        twice |= once & hit;
        once |= hit;
      }
      if (twice != 0) {
        first = std::min(first, (block << kLaneBits) + std::countr_zero(twice));
      }
    }
  }

  ExclusivityReport r;
  r.assignments_checked = static_cast<std::uint64_t>(total);
  if (first == std::numeric_limits<std::int64_t>::max()) return r;

  std::vector<std::size_t> overlapping;
  std::vector<std::uint64_t> stack;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    if (programs[i].holds(static_cast<std::uint64_t>(first), stack)) overlapping.push_back(i);
  }
  return make_report(static_cast<std::uint64_t>(first), condition_vars, std::move(overlapping),
                     r.assignments_checked);
}

ExclusivityReport check_mutual_exclusivity_serial(std::span<const ExprPtr> rules,
                                                  std::span<const std::string> condition_vars) {
  check_capacity(condition_vars);
  const std::uint64_t total = std::uint64_t{1} << condition_vars.size();
  const ThresholdSet none;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    const Snapshot s = assignment_snapshot(mask, condition_vars);
    std::vector<std::size_t> hits;
    for (std::size_t r = 0; r < rules.size(); ++r) {
      if (eval_bool(*rules[r], s, none)) hits.push_back(r);
    }
    if (hits.size() >= 2) return make_report(mask, condition_vars, std::move(hits), mask + 1);
  }
  ExclusivityReport r;
  r.assignments_checked = total;
  return r;
}

ExclusivityReport sample_mutual_exclusivity(std::span<const ExprPtr> rules,
                                            std::span<const std::string> condition_vars,
                                            std::uint64_t samples, std::uint64_t seed) {
  if (condition_vars.size() > 64) {
    throw CapacityError("sampling supports at most 64 condition variables");
  }
  std::mt19937_64 rng(seed);
  const ThresholdSet none;
  const std::uint64_t keep =
      condition_vars.size() == 64 ? ~0ULL : ((1ULL << condition_vars.size()) - 1);
  for (std::uint64_t i = 0; i < samples; ++i) {
    const std::uint64_t mask = rng() & keep;
    const Snapshot s = assignment_snapshot(mask, condition_vars);
    std::vector<std::size_t> hits;
    for (std::size_t r = 0; r < rules.size(); ++r) {
      if (eval_bool(*rules[r], s, none)) hits.push_back(r);
    }
    if (hits.size() >= 2) return make_report(mask, condition_vars, std::move(hits), i + 1);
  }
  ExclusivityReport r;
  r.assignments_checked = samples;
  return r;
}

namespace {

struct AtomTable {
  std::vector<std::string> names;
  std::unordered_map<std::string, std::size_t> index;

  ExprPtr atom(const std::string& name, SourcePos pos) {
    if (!index.contains(name)) {
      index.emplace(name, names.size());
      names.push_back(name);
    }
    return make_ref(name, pos);
  }
};

ExprPtr abstract(const ExprPtr& e, AtomTable& atoms) {
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Ref>) {
          return atoms.atom(n.name, e->pos);
        } else if constexpr (std::is_same_v<T, BoolLiteral>) {
          return e;
        } else if constexpr (std::is_same_v<T, Not>) {
          return make_not(abstract(n.operand, atoms), e->pos);
        } else if constexpr (std::is_same_v<T, And>) {
          auto lhs = abstract(n.lhs, atoms);
          return make_and(std::move(lhs), abstract(n.rhs, atoms), e->pos);
        } else if constexpr (std::is_same_v<T, Or>) {
          auto lhs = abstract(n.lhs, atoms);
          return make_or(std::move(lhs), abstract(n.rhs, atoms), e->pos);
        } else if constexpr (std::is_same_v<T, Comparison>) {
          std::string a = to_string(*n.lhs);
          std::string b = to_string(*n.rhs);
          bool negated = false;
          std::string_view sym = "<";
          switch (n.op) {
          case Comparator::Less: break;
          case Comparator::Greater: std::swap(a, b); break;
          case Comparator::GreaterEqual: negated = true; break;
          case Comparator::LessEqual: std::swap(a, b); negated = true; break;
          case Comparator::Equal: sym = "=="; break;
          case Comparator::NotEqual: sym = "=="; negated = true; break;
          }
          if (sym == "==" && b < a) std::swap(a, b);
          auto ref = atoms.atom(a + " " + std::string(sym) + " " + b, e->pos);
          return negated ? make_not(ref, e->pos) : ref;
        } else {
          throw InvalidParameter("selection expressions cannot appear in boolean rules");
        }
      },
      e->node);
}

} // namespace

AtomAbstraction abstract_atoms(std::span<const ExprPtr> rules) {
  AtomTable atoms;
  AtomAbstraction out;
  for (const auto& r : rules) out.rules.push_back(abstract(r, atoms));
  out.atoms = std::move(atoms.names);
  return out;
}

} // namespace klafate::rules
