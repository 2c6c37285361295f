#ifndef GRAMMAR_STEER_GRAMMAR_H_
#define GRAMMAR_STEER_GRAMMAR_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grammar_steer {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed grammar text. Line and column are 1-based.
class BnfSyntaxError : public Error {
 public:
  BnfSyntaxError(const std::string& msg, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Two `::=` blocks share a left-hand side while merging is disabled.
class DuplicateRuleError : public Error {
 public:
  using Error::Error;
};

/// Violation of a Grammar structural invariant (unknown start, repeated lhs, bad name).
class GrammarInvariantError : public Error {
 public:
  using Error::Error;
};

enum class SymbolKind : std::uint8_t { kTerminal, kNonterminal };

struct Symbol {
  SymbolKind kind = SymbolKind::kTerminal;
  std::string text;

  static Symbol terminal(std::string text) { return {SymbolKind::kTerminal, std::move(text)}; }
  static Symbol nonterminal(std::string name) {
    return {SymbolKind::kNonterminal, std::move(name)};
  }
  bool is_terminal() const { return kind == SymbolKind::kTerminal; }

  auto operator<=>(const Symbol&) const = default;
};

enum class Repetition : std::uint8_t { kOnce, kOptional, kStar, kPlus };

/// One position in an alternative: a symbol with its repetition marker.
struct Item {
  Symbol symbol;
  Repetition rep = Repetition::kOnce;

  auto operator<=>(const Item&) const = default;
};

/// An alternative. The empty sequence is the empty string, written `""`.
using SymbolSeq = std::vector<Item>;

bool has_repetition(const SymbolSeq& seq);

struct Rule {
  std::string lhs;
  std::vector<SymbolSeq> alternatives;

  bool operator==(const Rule&) const = default;
};

/// Names the alternative a derivation step used.
struct AltRef {
  std::string lhs;
  std::size_t alt_index = 0;

  auto operator<=>(const AltRef&) const = default;
};

/// An immutable context-free grammar: one Rule per lhs, in definition order.
class Grammar {
 public:
  Grammar() = default;
  /// Throws GrammarInvariantError when a lhs repeats, a rule has no
  /// alternatives, a name is malformed, or `start` has no rule.
  Grammar(std::vector<Rule> rules, std::string start);

  const std::vector<Rule>& rules() const { return rules_; }
  const std::string& start() const { return start_; }
  bool empty() const { return rules_.empty(); }

  const Rule* find(std::string_view lhs) const;
  std::optional<std::size_t> index_of(std::string_view lhs) const;
  const SymbolSeq& alternative(const AltRef& ref) const;

  bool operator==(const Grammar& other) const {
    return start_ == other.start_ && rules_ == other.rules_;
  }

 private:
  std::vector<Rule> rules_;
  std::string start_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Accumulates alternatives per lhs in first-definition order, dropping duplicates.
class GrammarBuilder {
 public:
  /// Returns false when `alt` was already present for `lhs`.
  bool add_alternative(const std::string& lhs, SymbolSeq alt);
  bool has_rule(std::string_view lhs) const;
  Grammar build(std::string start) const;
  Grammar build() const;  // start = first rule

 private:
  std::vector<Rule> rules_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool is_valid_nonterminal_name(std::string_view name);

struct BnfParseOptions {
  bool merge_duplicate_lhs = true;
  std::optional<std::string> start;  // default: first rule's lhs
};

Grammar parse_bnf(std::string_view text, const BnfParseOptions& options = {});

/// Canonical text form: one line per rule, ` | ` between alternatives, LF line ends.
std::string serialize(const Grammar& g);
std::string serialize_alternative(const SymbolSeq& alt);
std::string serialize_item(const Item& item);
/// Double-quoted with backslash escapes for `"`, `\` and control characters.
std::string quote_terminal(std::string_view text);

enum class DiagnosticKind { kUndefinedNonterminal, kUnreachableRule, kUnproductiveNonterminal };

struct Diagnostic {
  DiagnosticKind kind;
  std::string nonterminal;
  std::string message;

  bool operator==(const Diagnostic&) const = default;
};

std::string_view to_string(DiagnosticKind kind);

/// Empty iff the grammar is clean.
std::vector<Diagnostic> validate(const Grammar& g);

struct DesugaredGrammar {
  Grammar grammar;
  /// Auxiliary nonterminal -> the repeated item it stands for.
  std::map<std::string, Item> aux;
};

/// Replaces every `x?`, `x*`, `x+` by a fresh right-recursive `<lhs>__rep<N>` rule.
DesugaredGrammar desugar_tracked(const Grammar& g);
Grammar desugar(const Grammar& g);

/// True when `sub` instantiates `full`, each repeated item either kept verbatim
/// or expanded to a fixed number of plain copies. `counts` receives the copy
/// count per item of `full` (-1 for items kept verbatim).
bool concretizes(const SymbolSeq& sub, const SymbolSeq& full, std::vector<int>* counts = nullptr);

/// Expands the repeated items of `alt` by `counts` (same convention as concretizes).
SymbolSeq instantiate(const SymbolSeq& alt, const std::vector<int>& counts);

/// Every alternative of `sub` is an alternative, or a concretization of one, of the same lhs in `full`.
bool is_subset(const Grammar& sub, const Grammar& full);

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_GRAMMAR_H_
