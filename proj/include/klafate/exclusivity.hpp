#pragma once

// Mutual-exclusivity check for switch-case rule sets: no assignment of the
// condition variables may make two rules true at once.
//
// check_mutual_exclusivity enumerates all 2^n assignments with an OpenMP
// kernel over a compiled program evaluated 64 assignments per word. check_mutual_exclusivity_serial is
// the reference implementation: a plain loop through the tree evaluator.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "klafate/ruledsl.hpp"

namespace klafate::rules {

inline constexpr std::size_t kMaxExhaustiveConditions = 20;

struct ExclusivityReport {
  bool exclusive = true;
  // Populated when not exclusive: lowest-numbered colliding assignment
  // (bit i of the assignment index is condition_vars[i]).
  std::map<std::string, bool> witness;
  std::vector<std::size_t> overlapping_rules; // indices of rules true under the witness
  std::uint64_t assignments_checked = 0;
};

ExclusivityReport check_mutual_exclusivity(std::span<const ExprPtr> rules,
                                           std::span<const std::string> condition_vars);

ExclusivityReport check_mutual_exclusivity_serial(std::span<const ExprPtr> rules,
                                                  std::span<const std::string> condition_vars);

// Random-assignment variant for condition sets above the exhaustive bound.
// A clean result is evidence, not proof.
ExclusivityReport sample_mutual_exclusivity(std::span<const ExprPtr> rules,
                                            std::span<const std::string> condition_vars,
                                            std::uint64_t samples, std::uint64_t seed);

// Rules rewritten over boolean atoms. Each comparison becomes an atom in a
// canonical orientation (`a >= b` is `not (a < b)`, `a > b` is `b < a`,
// `a != b` is `not (a == b)`), and boolean references stay as they are.
// Atoms are treated as independent, which over-approximates what the
// numeric comparisons allow.
struct AtomAbstraction {
  std::vector<ExprPtr> rules;
  std::vector<std::string> atoms;
};

AtomAbstraction abstract_atoms(std::span<const ExprPtr> rules);

} // namespace klafate::rules
