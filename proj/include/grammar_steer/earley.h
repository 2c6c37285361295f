#ifndef GRAMMAR_STEER_EARLEY_H_
#define GRAMMAR_STEER_EARLEY_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "grammar_steer/grammar.h"

namespace grammar_steer {

class NoParse : public Error {
 public:
  using Error::Error;
};

class NotViable : public Error {
 public:
  using Error::Error;
};

class EmptyLanguage : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// How input whitespace is matched against terminals.
///   kFlexible:   runs collapse to one space; a space may be skipped wherever a terminal may start or end.
///   kNormalized: runs collapse to one space and leading whitespace is dropped; spaces must be matched.
///   kExact:      bytes are matched as given.
enum class WhitespacePolicy : std::uint8_t { kFlexible, kNormalized, kExact };

std::string normalize_whitespace(std::string_view s, WhitespacePolicy policy);

/// What to put between two adjacent terminals when rendering text for a flexible grammar:
/// nothing after an opening bracket or quote, before a closing one, next to whitespace
/// or an empty side, between digits, or next to a one-character word; one space otherwise.
std::string_view token_separator(std::string_view left, std::string_view right);
std::string join_tokens(const std::vector<std::string>& tokens);

/// A grammar compiled for recognition. Immutable; share freely across threads.
class EarleyGrammar {
 public:
  explicit EarleyGrammar(const Grammar& g, WhitespacePolicy policy = WhitespacePolicy::kFlexible);

  const Grammar& source() const { return source_; }
  const DesugaredGrammar& desugared() const { return desugared_; }
  WhitespacePolicy policy() const { return policy_; }
  /// True when the start symbol derives no terminal string.
  bool empty_language() const { return empty_; }
  /// Distinct terminal texts (normalized), sorted.
  const std::vector<std::string>& terminals() const { return terminals_; }

  // Compiled form. Symbols >= 0 are nonterminal ids; a terminal id t is stored as ~t.
  struct Production {
    int lhs = 0;
    std::vector<int> rhs;
    std::size_t alt_index = 0;  // index in the desugared rule of lhs
  };
  const std::vector<Production>& productions() const { return productions_; }
  const std::vector<std::vector<int>>& productions_of() const { return by_lhs_; }
  const std::vector<std::string>& nonterminal_names() const { return nt_names_; }
  const std::string& terminal_text(int sym) const { return terminals_[static_cast<std::size_t>(~sym)]; }
  bool nullable(int nt) const { return nullable_[static_cast<std::size_t>(nt)]; }
  int start_production() const { return 0; }

  struct MinYield {
    std::size_t length = 0;
    std::string text;
    std::vector<int> terms;  // terminal ids, left to right
    bool finite = false;
  };
  const MinYield& min_yield(int nt) const { return min_yield_[static_cast<std::size_t>(nt)]; }

 private:
  Grammar source_;
  DesugaredGrammar desugared_;
  WhitespacePolicy policy_;
  bool empty_ = false;
  std::vector<std::string> terminals_;
  std::vector<std::string> nt_names_;
  std::vector<Production> productions_;
  std::vector<std::vector<int>> by_lhs_;
  std::vector<bool> nullable_;
  std::vector<MinYield> min_yield_;
};

/// Incremental character-level Earley chart. Input is normalized under the grammar's policy as it is fed.
class Chart {
 public:
  explicit Chart(std::shared_ptr<const EarleyGrammar> g);
  explicit Chart(const EarleyGrammar& g);  // borrows `g`; it must outlive the chart

  /// Feeds characters until one cannot be consumed. Returns true if all were consumed;
  /// otherwise the chart stays at the longest viable prefix.
  bool feed(std::string_view text);
  /// Normalized text consumed so far.
  const std::string& text() const { return text_; }
  std::size_t size() const { return text_.size(); }
  /// Drops state beyond normalized position `n`.
  void truncate(std::size_t n);

  bool complete() const;
  bool at_boundary(std::size_t pos) const;
  bool at_boundary() const { return at_boundary(text_.size()); }
  /// Whole terminals w such that text()·w is viable.
  std::set<std::string> continuations();

  // Chart access for parse reconstruction and completion search.
  struct Item {
    std::uint32_t prod;
    std::uint16_t dot;
    std::uint16_t toff;  // characters of the next terminal already matched
    std::uint32_t origin;
    bool operator==(const Item&) const = default;
  };
  const std::vector<Item>& items(std::size_t pos) const { return sets_[pos].items; }
  bool contains(std::size_t pos, const Item& item) const;
  bool completed(std::size_t pos, int nt, std::size_t origin) const;
  const EarleyGrammar& grammar() const { return *g_; }

 private:
  struct Set {
    std::vector<Item> items;
    std::unordered_set<std::uint64_t> seen;
    std::unordered_map<int, std::vector<std::uint32_t>> waiting;  // nonterminal -> item indices
    std::unordered_set<std::uint64_t> done;                        // (lhs, origin) completed here
    bool boundary = false;
  };
  void init();
  bool step(char c);
  void add(Set& set, std::size_t pos, const Item& item);
  void close(std::size_t pos);

  std::shared_ptr<const EarleyGrammar> owned_;
  const EarleyGrammar* g_;
  std::string text_;
  std::vector<Set> sets_;
};

enum class Recognition { kComplete, kViablePrefix, kInvalid };

std::string_view to_string(Recognition r);

Recognition recognize(std::string_view s, const EarleyGrammar& g);
Recognition recognize(std::string_view s, const Grammar& g,
                      WhitespacePolicy policy = WhitespacePolicy::kFlexible);

struct DerivationTree {
  std::optional<AltRef> alt;  // set on interior nodes (rule of the original grammar)
  std::string terminal;       // set on leaves
  std::vector<DerivationTree> children;
  /// Per item of the alternative: how many times it was derived (1 for plain items).
  std::vector<int> repeat_counts;

  bool is_leaf() const { return !alt.has_value(); }
  bool operator==(const DerivationTree&) const = default;
};

struct ParseResult {
  DerivationTree tree;
  bool ambiguous = false;
};

/// Throws NoParse when s is not in L(g).
ParseResult parse(std::string_view s, const EarleyGrammar& g);
ParseResult parse(std::string_view s, const Grammar& g,
                  WhitespacePolicy policy = WhitespacePolicy::kFlexible);

/// Concatenated terminal leaves.
std::string yield(const DerivationTree& t);
/// Leaves joined with token_separator.
std::string render(const DerivationTree& t);
std::vector<std::string> leaves(const DerivationTree& t);
std::size_t interior_node_count(const DerivationTree& t);

struct PrefixAnalysis {
  std::string prefix;
  std::set<std::string> continuations;
  std::optional<std::size_t> failure_index;  // in normalized coordinates

  bool operator==(const PrefixAnalysis&) const = default;
};

/// Throws EmptyLanguage when g derives nothing.
PrefixAnalysis longest_valid_prefix(std::string_view s, const EarleyGrammar& g);
PrefixAnalysis longest_valid_prefix(std::string_view s, const Grammar& g,
                                    WhitespacePolicy policy = WhitespacePolicy::kFlexible);

/// Throws NotViable unless prefix is viable.
std::set<std::string> valid_continuations(std::string_view prefix, const EarleyGrammar& g);
std::set<std::string> valid_continuations(std::string_view prefix, const Grammar& g,
                                          WhitespacePolicy policy = WhitespacePolicy::kFlexible);

/// Shortest s (ties: lexicographically smallest) with prefix·s in L(g), as the
/// remaining pieces: whole terminals, preceded by the rest of a partially matched one.
std::vector<std::string> shortest_completion_terminals(std::string_view prefix, const EarleyGrammar& g);
std::string shortest_completion(std::string_view prefix, const EarleyGrammar& g);
std::string shortest_completion(std::string_view prefix, const Grammar& g,
                                WhitespacePolicy policy = WhitespacePolicy::kFlexible);

inline constexpr std::size_t kDefaultEnumerationCap = 2'000'000;

/// Every string of L(g) with at most max_len characters (terminals concatenated without separators).
std::set<std::string> enumerate_language(const Grammar& g, std::size_t max_len,
                                         std::size_t node_cap = kDefaultEnumerationCap);

/// `[lhs child ...]` with quoted terminal leaves.
std::string linearize_derivation(const DerivationTree& t);

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_EARLEY_H_
