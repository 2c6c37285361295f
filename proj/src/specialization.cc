#include "grammar_steer/specialization.h"

#include <algorithm>
#include <cstdint>
#include <optional>

namespace grammar_steer {

namespace {

void collect(const DerivationTree& node, const Grammar& full, const SpecializeOptions& options,
             GrammarBuilder& builder, SpecializationResult& out) {
  if (node.is_leaf()) return;
  const AltRef& ref = *node.alt;
  const SymbolSeq& alt = full.alternative(ref);
  out.used_alts.insert(ref);
  if (has_repetition(alt) && !options.keep_extended) {
    builder.add_alternative(ref.lhs, instantiate(alt, node.repeat_counts));
    out.concretized[ref].insert(node.repeat_counts);
  } else {
    builder.add_alternative(ref.lhs, alt);
  }
  for (const auto& child : node.children) collect(child, full, options, builder, out);
}

bool derives(const Grammar& g, std::string_view y, WhitespacePolicy policy) {
  return recognize(y, g, policy) == Recognition::kComplete;
}

}  // namespace

SpecializationResult specialize(std::string_view y, const Grammar& full, const SpecializeOptions& options) {
  ParseResult parsed = parse(y, full, options.policy);
  SpecializationResult out;
  GrammarBuilder builder;
  collect(parsed.tree, full, options, builder, out);
  out.grammar = builder.build(full.start());
  return out;
}

bool check_property1(const SpecializationResult& spec, std::string_view y, WhitespacePolicy policy) {
  if (spec.grammar.empty()) return false;
  return derives(spec.grammar, y, policy);
}

std::vector<AltRef> removable_alternatives(const Grammar& g, std::string_view y, WhitespacePolicy policy) {
  std::vector<AltRef> out;
  for (const Rule& rule : g.rules()) {
    for (std::size_t i = 0; i < rule.alternatives.size(); ++i) {
      std::vector<Rule> rules;
      for (const Rule& r : g.rules()) {
        if (r.lhs != rule.lhs) {
          rules.push_back(r);
          continue;
        }
        Rule kept{r.lhs, {}};
        for (std::size_t j = 0; j < r.alternatives.size(); ++j) {
          if (j != i) kept.alternatives.push_back(r.alternatives[j]);
        }
        if (!kept.alternatives.empty()) rules.push_back(std::move(kept));
      }
      bool has_start = false;
      for (const Rule& r : rules) has_start |= r.lhs == g.start();
      if (has_start && derives(Grammar(std::move(rules), g.start()), y, policy)) out.push_back({rule.lhs, i});
    }
  }
  return out;
}

bool check_property2(const SpecializationResult& spec, std::string_view y, WhitespacePolicy policy) {
  if (spec.grammar.empty()) return false;
  return removable_alternatives(spec.grammar, y, policy).empty();
}

Grammar canonicalize(const Grammar& sub, const Grammar& full) {
  auto source_index = [&](const std::string& lhs, const SymbolSeq& alt) {
    const Rule* r = full.find(lhs);
    if (r) {
      for (std::size_t j = 0; j < r->alternatives.size(); ++j) {
        if (concretizes(alt, r->alternatives[j])) return j;
      }
    }
    return SIZE_MAX;
  };
  auto sorted = [&](const Rule& r) {
    std::vector<std::pair<std::size_t, std::size_t>> order;
    for (std::size_t i = 0; i < r.alternatives.size(); ++i) order.emplace_back(source_index(r.lhs, r.alternatives[i]), i);
    std::stable_sort(order.begin(), order.end());
    Rule out{r.lhs, {}};
    for (const auto& [src, i] : order) out.alternatives.push_back(r.alternatives[i]);
    return out;
  };
  std::vector<std::optional<Rule>> known(full.rules().size());
  std::vector<Rule> rules;
  std::vector<Rule> unknown;
  for (const Rule& r : sub.rules()) {
    if (auto i = full.index_of(r.lhs)) {
      known[*i] = sorted(r);
    } else {
      unknown.push_back(r);
    }
  }
  for (auto& r : known) {
    if (r) rules.push_back(std::move(*r));
  }
  for (Rule& r : unknown) rules.push_back(std::move(r));
  return Grammar(std::move(rules), sub.start());
}

}  // namespace grammar_steer
