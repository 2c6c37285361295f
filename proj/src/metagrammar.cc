#include "grammar_steer/metagrammar.h"

#include <set>

namespace grammar_steer {

namespace {

Item term(std::string text) { return {Symbol::terminal(std::move(text)), Repetition::kOnce}; }
Item nonterm(std::string name) { return {Symbol::nonterminal(std::move(name)), Repetition::kOnce}; }

std::string space_if(bool b) { return b ? " " : ""; }

class Builder {
 public:
  Builder(const Grammar& full, int max_rep) : full_(full), max_rep_(max_rep) {}

  Grammar build() {
    const auto& rules = full_.rules();
    const std::size_t n = rules.size();
    const std::size_t s = *full_.index_of(full_.start());

    add("meta__root", {nonterm(first(0)), nonterm("meta__end")});
    add("meta__end", {});
    add("meta__end", {term("\n")});
    for (std::size_t i = 0; i <= s; ++i) {
      add(first(i), {nonterm(block(i)), nonterm(rest(i + 1))});
      if (i < s) add(first(i), {nonterm(first(i + 1))});
    }
    for (std::size_t i = s + 1; i <= n; ++i) {
      if (i == n) {
        add(rest(i), {});
        break;
      }
      add(rest(i), {term("\n"), nonterm(block(i)), nonterm(rest(i + 1))});
      add(rest(i), {nonterm(rest(i + 1))});
    }
    for (std::size_t i = 0; i < n; ++i) add_block(i);
    return builder_.build("meta__root");
  }

 private:
  static std::string first(std::size_t i) { return "meta__first" + std::to_string(i); }
  static std::string rest(std::size_t i) { return "meta__rest" + std::to_string(i); }
  static std::string block(std::size_t i) { return "meta__block" + std::to_string(i); }
  static std::string tag(std::size_t i, std::size_t j) { return std::to_string(i) + "_" + std::to_string(j); }

  void add(const std::string& lhs, SymbolSeq alt) { builder_.add_alternative(lhs, std::move(alt)); }

  void add_block(std::size_t i) {
    const Rule& r = full_.rules()[i];
    const std::size_t m = r.alternatives.size();
    add(block(i), {term(r.lhs + " ::= "), nonterm("meta__afirst" + tag(i, 0))});
    for (std::size_t j = 0; j < m; ++j) {
      const std::string afirst = "meta__afirst" + tag(i, j);
      add(afirst, {nonterm(group(i, j)), nonterm("meta__arest" + tag(i, j + 1))});
      if (j + 1 < m) add(afirst, {nonterm("meta__afirst" + tag(i, j + 1))});
    }
    for (std::size_t j = 1; j <= m; ++j) {
      const std::string arest = "meta__arest" + tag(i, j);
      if (j == m) {
        add(arest, {});
        break;
      }
      add(arest, {term(" | "), nonterm(group(i, j)), nonterm("meta__arest" + tag(i, j + 1))});
      add(arest, {nonterm("meta__arest" + tag(i, j + 1))});
    }
    for (std::size_t j = 0; j < m; ++j) add_alternative(i, j);
  }

  std::string group(std::size_t i, std::size_t j) const {
    const SymbolSeq& alt = full_.rules()[i].alternatives[j];
    return (has_repetition(alt) ? "meta__grp" : "meta__alt") + tag(i, j);
  }

  void add_alternative(std::size_t i, std::size_t j) {
    const SymbolSeq& alt = full_.rules()[i].alternatives[j];
    alt_ = &alt;
    prefix_ = "meta__alt" + tag(i, j);
    add(prefix_, seq(0, false));
    if (has_repetition(alt)) {
      const std::string grp = "meta__grp" + tag(i, j);
      add(grp, {nonterm(prefix_)});
      add(grp, {nonterm(prefix_), term(" | "), nonterm(grp)});
    }
  }

  // Text of items k.. of the current alternative; `emitted` tells whether anything precedes them.
  SymbolSeq seq(std::size_t k, bool emitted) {
    const SymbolSeq& alt = *alt_;
    if (k == alt.size()) return emitted ? SymbolSeq{} : SymbolSeq{term("\"\"")};
    const Item& it = alt[k];
    if (it.rep == Repetition::kOnce) {
      SymbolSeq out{term(space_if(emitted) + serialize_item(it))};
      SymbolSeq tail = seq(k + 1, true);
      out.insert(out.end(), tail.begin(), tail.end());
      return out;
    }
    return {nonterm(repeat(k, emitted, 0))};
  }

  // Item k after `count` copies have been written.
  std::string repeat(std::size_t k, bool emitted, int count) {
    const std::string name = prefix_ + "_r" + std::to_string(k) + (emitted ? "e" : "f") + std::to_string(count);
    if (!made_.insert(name).second) return name;
    const Item& it = (*alt_)[k];
    const int lo = it.rep == Repetition::kPlus ? 1 : 0;
    const int hi = it.rep == Repetition::kOptional ? 1 : max_rep_;
    const bool any = emitted || count > 0;
    if (count < hi) {
      add(name, {term(space_if(any) + serialize_item(Item{it.symbol, Repetition::kOnce})),
                 nonterm(repeat(k, emitted, count + 1))});
    }
    if (count >= lo) add(name, seq(k + 1, any));
    if (count == 0) {
      SymbolSeq verbatim{term(space_if(emitted) + serialize_item(it))};
      SymbolSeq tail = seq(k + 1, true);
      verbatim.insert(verbatim.end(), tail.begin(), tail.end());
      add(name, std::move(verbatim));
    }
    return name;
  }

  const Grammar& full_;
  int max_rep_;
  GrammarBuilder builder_;
  const SymbolSeq* alt_ = nullptr;
  std::string prefix_;
  std::set<std::string> made_;
};

bool has_extended(const Grammar& g) {
  for (const auto& r : g.rules()) {
    for (const auto& alt : r.alternatives) {
      if (has_repetition(alt)) return true;
    }
  }
  return false;
}

}  // namespace

MetaGrammar build_metagrammar(const Grammar& full, const MetaGrammarOptions& options) {
  if (full.empty()) throw GrammarInvariantError("cannot build a metagrammar for an empty grammar");
  if (!options.max_repetitions && has_extended(full)) {
    throw RepetitionBoundRequired("the grammar has repeated items; a repetition bound is required");
  }
  const int bound = options.max_repetitions.value_or(0);
  if (bound < 1 && has_extended(full)) throw RepetitionBoundRequired("the repetition bound must be at least 1");
  MetaGrammar meta;
  meta.grammar = Builder(full, bound).build();
  meta.source = full;
  meta.max_repetitions = bound;
  meta.compiled = std::make_shared<const EarleyGrammar>(meta.grammar, MetaGrammar::kPolicy);
  return meta;
}

Grammar extract_grammar(const DerivationTree& meta_parse, const MetaGrammar& meta) {
  BnfParseOptions opts;
  opts.start = meta.source.start();
  return parse_bnf(yield(meta_parse), opts);
}

Grammar extract_grammar(std::string_view text, const MetaGrammar& meta) {
  return extract_grammar(parse(text, *meta.compiled).tree, meta);
}

bool meta_accepts(const MetaGrammar& meta, std::string_view text) {
  return recognize(text, *meta.compiled) == Recognition::kComplete;
}

}  // namespace grammar_steer
