#ifndef GRAMMAR_STEER_SPECIALIZATION_H_
#define GRAMMAR_STEER_SPECIALIZATION_H_

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "grammar_steer/earley.h"
#include "grammar_steer/grammar.h"

namespace grammar_steer {

struct SpecializeOptions {
  /// Keep extended alternatives (`x+`, `x*`, `x?`) as written instead of
  /// expanding them to the number of repetitions the derivation used.
  bool keep_extended = false;
  WhitespacePolicy policy = WhitespacePolicy::kFlexible;
};

struct SpecializationResult {
  Grammar grammar;
  std::set<AltRef> used_alts;  // into the full grammar
  /// Extended alternatives of the full grammar -> the repetition counts they were expanded with.
  std::map<AltRef, std::set<std::vector<int>>> concretized;
};

/// The rules used by the first derivation of y, in first-use order. Throws NoParse.
SpecializationResult specialize(std::string_view y, const Grammar& full, const SpecializeOptions& options = {});

/// y is a complete member of spec's grammar.
bool check_property1(const SpecializationResult& spec, std::string_view y,
                     WhitespacePolicy policy = WhitespacePolicy::kFlexible);

/// No single alternative can be removed while keeping y derivable.
bool check_property2(const SpecializationResult& spec, std::string_view y,
                     WhitespacePolicy policy = WhitespacePolicy::kFlexible);

/// Alternatives whose removal still leaves y derivable (empty iff check_property2 holds).
std::vector<AltRef> removable_alternatives(const Grammar& g, std::string_view y,
                                           WhitespacePolicy policy = WhitespacePolicy::kFlexible);

/// `sub` with rules in `full`'s definition order and, within a rule, alternatives in the
/// order of the full alternatives they instantiate. Unknown rules and alternatives go last.
Grammar canonicalize(const Grammar& sub, const Grammar& full);

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_SPECIALIZATION_H_
