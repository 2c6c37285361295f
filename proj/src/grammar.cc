#include "grammar_steer/grammar.h"

#include <algorithm>
#include <deque>
#include <functional>
#include <set>

namespace grammar_steer {

BnfSyntaxError::BnfSyntaxError(const std::string& msg, int line, int column)
    : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
      line_(line),
      column_(column) {}

bool has_repetition(const SymbolSeq& seq) {
  return std::any_of(seq.begin(), seq.end(),
                     [](const Item& it) { return it.rep != Repetition::kOnce; });
}

bool is_valid_nonterminal_name(std::string_view name) {
  if (name.empty()) return false;
  auto is_alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  if (!is_alpha(name.front())) return false;
  for (char c : name) {
    if (!(is_alpha(c) || is_digit(c) || c == '?' || c == '!' || c == '.' || c == '-')) return false;
  }
  // A trailing `?` always reads as the optional marker.
  return name.back() != '?';
}

Grammar::Grammar(std::vector<Rule> rules, std::string start)
    : rules_(std::move(rules)), start_(std::move(start)) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const Rule& r = rules_[i];
    if (!is_valid_nonterminal_name(r.lhs)) {
      throw GrammarInvariantError("invalid nonterminal name '" + r.lhs + "'");
    }
    if (r.alternatives.empty()) {
      throw GrammarInvariantError("rule '" + r.lhs + "' has no alternatives");
    }
    if (!index_.emplace(r.lhs, i).second) {
      throw GrammarInvariantError("more than one rule for '" + r.lhs + "'");
    }
    std::set<SymbolSeq> seen;
    for (const SymbolSeq& alt : r.alternatives) {
      if (!seen.insert(alt).second) {
        throw GrammarInvariantError("duplicate alternative in rule '" + r.lhs + "'");
      }
      for (const Item& it : alt) {
        if (it.symbol.is_terminal()) {
          if (it.symbol.text.empty()) {
            throw GrammarInvariantError("empty terminal in rule '" + r.lhs + "'");
          }
        } else if (!is_valid_nonterminal_name(it.symbol.text)) {
          throw GrammarInvariantError("invalid nonterminal name '" + it.symbol.text + "'");
        }
      }
    }
  }
  if (!index_.count(start_)) {
    throw GrammarInvariantError("start symbol '" + start_ + "' has no rule");
  }
}

const Rule* Grammar::find(std::string_view lhs) const {
  auto it = index_.find(std::string(lhs));
  return it == index_.end() ? nullptr : &rules_[it->second];
}

std::optional<std::size_t> Grammar::index_of(std::string_view lhs) const {
  auto it = index_.find(std::string(lhs));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const SymbolSeq& Grammar::alternative(const AltRef& ref) const {
  const Rule* r = find(ref.lhs);
  if (r == nullptr || ref.alt_index >= r->alternatives.size()) {
    throw GrammarInvariantError("unresolvable alternative " + ref.lhs + "#" +
                                std::to_string(ref.alt_index));
  }
  return r->alternatives[ref.alt_index];
}

bool GrammarBuilder::add_alternative(const std::string& lhs, SymbolSeq alt) {
  auto [it, inserted] = index_.emplace(lhs, rules_.size());
  if (inserted) rules_.push_back(Rule{lhs, {}});
  auto& alts = rules_[it->second].alternatives;
  if (std::find(alts.begin(), alts.end(), alt) != alts.end()) return false;
  alts.push_back(std::move(alt));
  return true;
}

bool GrammarBuilder::has_rule(std::string_view lhs) const {
  return index_.count(std::string(lhs)) > 0;
}

Grammar GrammarBuilder::build(std::string start) const { return Grammar(rules_, std::move(start)); }

Grammar GrammarBuilder::build() const {
  if (rules_.empty()) throw GrammarInvariantError("grammar has no rules");
  return Grammar(rules_, rules_.front().lhs);
}

// ---------------------------------------------------------------------------
// Serialization

std::string quote_terminal(std::string_view text) {
  std::string out;
  out.reserve(text.size() + 2);
  out.push_back('"');
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

std::string serialize_item(const Item& item) {
  std::string out =
      item.symbol.is_terminal() ? quote_terminal(item.symbol.text) : item.symbol.text;
  switch (item.rep) {
    case Repetition::kOnce: break;
    case Repetition::kOptional: out += '?'; break;
    case Repetition::kStar: out += '*'; break;
    case Repetition::kPlus: out += '+'; break;
  }
  return out;
}

std::string serialize_alternative(const SymbolSeq& alt) {
  if (alt.empty()) return "\"\"";
  std::string out;
  for (std::size_t i = 0; i < alt.size(); ++i) {
    if (i) out += ' ';
    out += serialize_item(alt[i]);
  }
  return out;
}

std::string serialize(const Grammar& g) {
  std::string out;
  for (const Rule& r : g.rules()) {
    out += r.lhs;
    out += " ::= ";
    for (std::size_t i = 0; i < r.alternatives.size(); ++i) {
      if (i) out += " | ";
      out += serialize_alternative(r.alternatives[i]);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

std::string_view to_string(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::kUndefinedNonterminal: return "undefined-nonterminal";
    case DiagnosticKind::kUnreachableRule: return "unreachable-rule";
    case DiagnosticKind::kUnproductiveNonterminal: return "unproductive-nonterminal";
  }
  return "unknown";
}

namespace {

std::set<std::string> productive_nonterminals(const Grammar& g) {
  std::set<std::string> productive;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Rule& r : g.rules()) {
      if (productive.count(r.lhs)) continue;
      for (const SymbolSeq& alt : r.alternatives) {
        bool ok = std::all_of(alt.begin(), alt.end(), [&](const Item& it) {
          // x? and x* derive the empty string regardless of x. Undefined names
          // are reported on their own and do not also taint their users.
          return it.symbol.is_terminal() || it.rep == Repetition::kOptional ||
                 it.rep == Repetition::kStar || productive.count(it.symbol.text) > 0 ||
                 !g.find(it.symbol.text);
        });
        if (ok) {
          productive.insert(r.lhs);
          changed = true;
          break;
        }
      }
    }
  }
  return productive;
}

}  // namespace

std::vector<Diagnostic> validate(const Grammar& g) {
  std::vector<Diagnostic> out;
  std::set<std::string> reported;
  for (const Rule& r : g.rules()) {
    for (const SymbolSeq& alt : r.alternatives) {
      for (const Item& it : alt) {
        if (it.symbol.is_terminal() || g.find(it.symbol.text)) continue;
        if (reported.insert(it.symbol.text).second) {
          out.push_back({DiagnosticKind::kUndefinedNonterminal, it.symbol.text,
                         "nonterminal '" + it.symbol.text + "' is used in '" + r.lhs +
                             "' but never defined"});
        }
      }
    }
  }
  if (g.empty()) return out;

  std::set<std::string> reachable{g.start()};
  std::deque<std::string> queue{g.start()};
  while (!queue.empty()) {
    const Rule* r = g.find(queue.front());
    queue.pop_front();
    if (!r) continue;
    for (const SymbolSeq& alt : r->alternatives) {
      for (const Item& it : alt) {
        if (!it.symbol.is_terminal() && reachable.insert(it.symbol.text).second) {
          queue.push_back(it.symbol.text);
        }
      }
    }
  }
  for (const Rule& r : g.rules()) {
    if (!reachable.count(r.lhs)) {
      out.push_back({DiagnosticKind::kUnreachableRule, r.lhs,
                     "rule '" + r.lhs + "' is not reachable from '" + g.start() + "'"});
    }
  }

  auto productive = productive_nonterminals(g);
  for (const Rule& r : g.rules()) {
    if (!productive.count(r.lhs)) {
      out.push_back({DiagnosticKind::kUnproductiveNonterminal, r.lhs,
                     "nonterminal '" + r.lhs + "' derives no terminal string"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Desugaring

DesugaredGrammar desugar_tracked(const Grammar& g) {
  std::set<std::string> taken;
  for (const Rule& r : g.rules()) taken.insert(r.lhs);

  DesugaredGrammar out;
  std::vector<Rule> rules;
  for (const Rule& r : g.rules()) {
    Rule main{r.lhs, {}};
    std::vector<Rule> aux_rules;
    int counter = 0;
    for (const SymbolSeq& alt : r.alternatives) {
      SymbolSeq plain;
      for (const Item& it : alt) {
        if (it.rep == Repetition::kOnce) {
          plain.push_back(it);
          continue;
        }
        std::string name;
        do {
          name = r.lhs + "__rep" + std::to_string(counter++);
        } while (taken.count(name));
        taken.insert(name);
        Item x{it.symbol, Repetition::kOnce};
        Item self{Symbol::nonterminal(name), Repetition::kOnce};
        Rule aux{name, {}};
        switch (it.rep) {
          case Repetition::kPlus: aux.alternatives = {{x, self}, {x}}; break;
          case Repetition::kStar: aux.alternatives = {{x, self}, {}}; break;
          case Repetition::kOptional: aux.alternatives = {{x}, {}}; break;
          case Repetition::kOnce: break;
        }
        out.aux.emplace(name, it);
        aux_rules.push_back(std::move(aux));
        plain.push_back(self);
      }
      main.alternatives.push_back(std::move(plain));
    }
    rules.push_back(std::move(main));
    for (Rule& a : aux_rules) rules.push_back(std::move(a));
  }
  out.grammar = Grammar(std::move(rules), g.start());
  return out;
}

Grammar desugar(const Grammar& g) { return desugar_tracked(g).grammar; }

// ---------------------------------------------------------------------------
// Subset relation

namespace {

bool match_from(const SymbolSeq& sub, std::size_t i, const SymbolSeq& full, std::size_t j,
                std::vector<int>& counts) {
  if (j == full.size()) return i == sub.size();
  const Item& f = full[j];
  if (i < sub.size() && sub[i] == f) {
    counts[j] = f.rep == Repetition::kOnce ? 1 : -1;
    if (match_from(sub, i + 1, full, j + 1, counts)) return true;
  }
  if (f.rep == Repetition::kOnce) return false;
  const Item plain{f.symbol, Repetition::kOnce};
  std::size_t max_copies = 0;
  while (i + max_copies < sub.size() && sub[i + max_copies] == plain) ++max_copies;
  if (f.rep == Repetition::kOptional) max_copies = std::min<std::size_t>(max_copies, 1);
  const std::size_t min_copies = f.rep == Repetition::kPlus ? 1 : 0;
  for (std::size_t k = min_copies; k <= max_copies; ++k) {
    counts[j] = static_cast<int>(k);
    if (match_from(sub, i + k, full, j + 1, counts)) return true;
  }
  return false;
}

}  // namespace

bool concretizes(const SymbolSeq& sub, const SymbolSeq& full, std::vector<int>* counts) {
  std::vector<int> local(full.size(), 0);
  bool ok = match_from(sub, 0, full, 0, local);
  if (ok && counts) *counts = std::move(local);
  return ok;
}

SymbolSeq instantiate(const SymbolSeq& alt, const std::vector<int>& counts) {
  SymbolSeq out;
  for (std::size_t j = 0; j < alt.size(); ++j) {
    const Item& it = alt[j];
    if (it.rep == Repetition::kOnce) {
      out.push_back(it);
    } else if (j < counts.size() && counts[j] < 0) {
      out.push_back(it);
    } else {
      int n = j < counts.size() ? counts[j] : 0;
      for (int k = 0; k < n; ++k) out.push_back(Item{it.symbol, Repetition::kOnce});
    }
  }
  return out;
}

bool is_subset(const Grammar& sub, const Grammar& full) {
  for (const Rule& r : sub.rules()) {
    const Rule* fr = full.find(r.lhs);
    if (!fr) return false;
    for (const SymbolSeq& alt : r.alternatives) {
      bool found = std::any_of(fr->alternatives.begin(), fr->alternatives.end(),
                               [&](const SymbolSeq& f) { return concretizes(alt, f); });
      if (!found) return false;
    }
  }
  return true;
}

}  // namespace grammar_steer
