#include "grammar_steer/earley.h"

#include <algorithm>
#include <cctype>
#include <climits>
#include <functional>
#include <map>
#include <unordered_map>

namespace grammar_steer {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

constexpr std::uint32_t kMaxProductions = 1u << 20;
constexpr std::uint32_t kMaxDot = 1u << 8;
constexpr std::uint32_t kMaxToff = 1u << 12;
constexpr std::uint32_t kMaxOrigin = 1u << 24;

std::uint64_t pack(const Chart::Item& it) {
  return (static_cast<std::uint64_t>(it.origin) << 40) | (static_cast<std::uint64_t>(it.prod) << 20) |
         (static_cast<std::uint64_t>(it.dot) << 12) | it.toff;
}

std::uint64_t pack_done(int nt, std::size_t origin) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(nt)) << 32) | origin;
}

}  // namespace

std::string normalize_whitespace(std::string_view s, WhitespacePolicy policy) {
  if (policy == WhitespacePolicy::kExact) return std::string(s);
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (is_space(c)) {
      if (policy == WhitespacePolicy::kNormalized && out.empty()) continue;
      if (!out.empty() && out.back() == ' ') continue;
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

std::string_view token_separator(std::string_view left, std::string_view right) {
  if (left.empty() || right.empty()) return "";
  if (is_space(left.back()) || is_space(right.front())) return "";
  if (std::string_view("([{'\"").find(left.back()) != std::string_view::npos) return "";
  if (std::string_view(")]},'\"").find(right.front()) != std::string_view::npos) return "";
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  // Character-class terminals spell one word together (digits of a number and the like).
  if (alnum(left.back()) && alnum(right.front()) && (left.size() == 1 || right.size() == 1)) return "";
  if (std::isdigit(static_cast<unsigned char>(left.back())) && std::isdigit(static_cast<unsigned char>(right.front()))) return "";
  return " ";
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    out += token_separator(out, t);
    out += t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Compilation

EarleyGrammar::EarleyGrammar(const Grammar& g, WhitespacePolicy policy)
    : source_(g), desugared_(desugar_tracked(g)), policy_(policy) {
  const Grammar& d = desugared_.grammar;

  std::unordered_map<std::string, int> nt_id;
  nt_names_.push_back("");  // augmented start
  for (const Rule& r : d.rules()) {
    nt_id.emplace(r.lhs, static_cast<int>(nt_names_.size()));
    nt_names_.push_back(r.lhs);
  }
  std::map<std::string, int> term_index;
  auto term_text = [&](const std::string& t) {
    // Terminals are matched against normalized input, so normalize them the same way
    // (without trimming: a leading space in a terminal is significant).
    return normalize_whitespace(t, policy == WhitespacePolicy::kExact ? WhitespacePolicy::kExact
                                                                      : WhitespacePolicy::kFlexible);
  };
  for (const Rule& r : d.rules()) {
    for (const SymbolSeq& alt : r.alternatives) {
      for (const Item& it : alt) {
        if (it.symbol.is_terminal()) {
          term_index.emplace(term_text(it.symbol.text), 0);
        } else if (!nt_id.count(it.symbol.text)) {
          nt_id.emplace(it.symbol.text, static_cast<int>(nt_names_.size()));
          nt_names_.push_back(it.symbol.text);  // undefined: no productions
        }
      }
    }
  }
  for (auto& [text, idx] : term_index) {
    if (text.size() >= kMaxToff) throw GrammarInvariantError("terminal too long for the recognizer");
    idx = static_cast<int>(terminals_.size());
    terminals_.push_back(text);
  }

  std::vector<Production> all;
  all.push_back({0, {nt_id.at(d.start())}, 0});
  for (const Rule& r : d.rules()) {
    for (std::size_t i = 0; i < r.alternatives.size(); ++i) {
      Production p{nt_id.at(r.lhs), {}, i};
      for (const Item& it : r.alternatives[i]) {
        p.rhs.push_back(it.symbol.is_terminal() ? ~term_index.at(term_text(it.symbol.text))
                                                : nt_id.at(it.symbol.text));
      }
      if (p.rhs.size() >= kMaxDot) throw GrammarInvariantError("alternative too long for the recognizer");
      all.push_back(std::move(p));
    }
  }

  // Drop productions that mention unproductive nonterminals so that a non-empty
  // chart always means the input can still be completed.
  const std::size_t n = nt_names_.size();
  std::vector<bool> productive(n, false);
  for (bool changed = true; changed;) {
    changed = false;
    for (const Production& p : all) {
      if (productive[static_cast<std::size_t>(p.lhs)]) continue;
      bool ok = std::all_of(p.rhs.begin(), p.rhs.end(),
                            [&](int s) { return s < 0 || productive[static_cast<std::size_t>(s)]; });
      if (ok) {
        productive[static_cast<std::size_t>(p.lhs)] = true;
        changed = true;
      }
    }
  }
  empty_ = !productive[0];
  by_lhs_.assign(n, {});
  for (Production& p : all) {
    bool ok = std::all_of(p.rhs.begin(), p.rhs.end(),
                          [&](int s) { return s < 0 || productive[static_cast<std::size_t>(s)]; });
    if (!ok || !productive[static_cast<std::size_t>(p.lhs)]) continue;
    by_lhs_[static_cast<std::size_t>(p.lhs)].push_back(static_cast<int>(productions_.size()));
    productions_.push_back(std::move(p));
  }
  if (productions_.size() >= kMaxProductions) throw GrammarInvariantError("grammar too large for the recognizer");
  if (empty_) {
    // Keep production 0 addressable; it simply never gets predicted.
    productions_.insert(productions_.begin(), Production{0, {nt_id.at(d.start())}, 0});
    by_lhs_.assign(n, {});
  }

  nullable_.assign(n, false);
  for (bool changed = true; changed;) {
    changed = false;
    for (const Production& p : productions_) {
      if (nullable_[static_cast<std::size_t>(p.lhs)]) continue;
      bool ok = std::all_of(p.rhs.begin(), p.rhs.end(),
                            [&](int s) { return s >= 0 && nullable_[static_cast<std::size_t>(s)]; });
      if (ok) {
        nullable_[static_cast<std::size_t>(p.lhs)] = true;
        changed = true;
      }
    }
  }

  min_yield_.assign(n, {});
  if (empty_) return;
  for (bool changed = true; changed;) {
    changed = false;
    for (const Production& p : productions_) {
      MinYield y;
      y.finite = true;
      for (int s : p.rhs) {
        if (s < 0) {
          const std::string& t = terminal_text(s);
          y.length += t.size();
          y.text += t;
          y.terms.push_back(s);
        } else {
          const MinYield& c = min_yield_[static_cast<std::size_t>(s)];
          if (!c.finite) {
            y.finite = false;
            break;
          }
          y.length += c.length;
          y.text += c.text;
          y.terms.insert(y.terms.end(), c.terms.begin(), c.terms.end());
        }
      }
      if (!y.finite) continue;
      MinYield& cur = min_yield_[static_cast<std::size_t>(p.lhs)];
      if (!cur.finite || y.length < cur.length || (y.length == cur.length && y.text < cur.text)) {
        cur = std::move(y);
        changed = true;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Chart

Chart::Chart(std::shared_ptr<const EarleyGrammar> g) : owned_(std::move(g)), g_(owned_.get()) { init(); }

Chart::Chart(const EarleyGrammar& g) : g_(&g) { init(); }

void Chart::init() {
  sets_.clear();
  text_.clear();
  sets_.emplace_back();
  if (!g_->empty_language()) {
    add(sets_[0], 0, Item{0, 0, 0, 0});
    close(0);
  }
}

void Chart::add(Set& set, std::size_t, const Item& item) {
  if (set.seen.insert(pack(item)).second) set.items.push_back(item);
}

void Chart::close(std::size_t pos) {
  const auto& prods = g_->productions();
  const auto& by_lhs = g_->productions_of();
  Set& set = sets_[pos];
  for (std::size_t k = 0; k < set.items.size(); ++k) {
    const Item it = set.items[k];
    const auto& p = prods[it.prod];
    if (it.toff > 0) continue;
    if (it.dot == p.rhs.size()) {
      set.done.insert(pack_done(p.lhs, it.origin));
      if (it.prod == 0) continue;
      const Set& from = sets_[it.origin];
      auto w = from.waiting.find(p.lhs);
      if (w == from.waiting.end()) continue;
      const std::vector<std::uint32_t> parents = w->second;
      for (std::uint32_t idx : parents) {
        const Item& par = sets_[it.origin].items[idx];
        add(set, pos, Item{par.prod, static_cast<std::uint16_t>(par.dot + 1), 0, par.origin});
      }
      continue;
    }
    int next = p.rhs[it.dot];
    if (next < 0) continue;
    auto& wl = set.waiting[next];
    wl.push_back(static_cast<std::uint32_t>(k));
    if (wl.size() == 1) {
      for (int q : by_lhs[static_cast<std::size_t>(next)]) {
        add(set, pos, Item{static_cast<std::uint32_t>(q), 0, 0, static_cast<std::uint32_t>(pos)});
      }
    }
    if (g_->nullable(next)) {
      add(set, pos, Item{it.prod, static_cast<std::uint16_t>(it.dot + 1), 0, it.origin});
    }
  }
  set.boundary = std::any_of(set.items.begin(), set.items.end(), [](const Item& i) { return i.toff == 0; });
}

bool Chart::step(char c) {
  const std::size_t pos = text_.size();
  if (pos + 1 >= kMaxOrigin) throw BudgetExceeded("input too long for the recognizer");
  const auto& prods = g_->productions();
  Set next;
  const Set& cur = sets_[pos];
  for (const Item& it : cur.items) {
    const auto& p = prods[it.prod];
    if (it.dot == p.rhs.size() || p.rhs[it.dot] >= 0) continue;
    const std::string& t = g_->terminal_text(p.rhs[it.dot]);
    if (t[it.toff] != c) continue;
    if (it.toff + 1u == t.size()) {
      add(next, pos + 1, Item{it.prod, static_cast<std::uint16_t>(it.dot + 1), 0, it.origin});
    } else {
      add(next, pos + 1, Item{it.prod, it.dot, static_cast<std::uint16_t>(it.toff + 1), it.origin});
    }
  }
  if (c == ' ' && g_->policy() == WhitespacePolicy::kFlexible && cur.boundary) {
    for (const Item& it : cur.items) {
      if (it.toff == 0) add(next, pos + 1, it);
    }
  }
  if (next.items.empty()) return false;
  sets_.push_back(std::move(next));
  text_ += c;
  close(pos + 1);
  return true;
}

bool Chart::feed(std::string_view text) {
  const WhitespacePolicy policy = g_->policy();
  for (char c : text) {
    if (policy != WhitespacePolicy::kExact && is_space(c)) {
      if (policy == WhitespacePolicy::kNormalized && text_.empty()) continue;
      if (!text_.empty() && text_.back() == ' ') continue;
      c = ' ';
    }
    if (!step(c)) return false;
  }
  return true;
}

void Chart::truncate(std::size_t n) {
  if (n >= text_.size()) return;
  text_.resize(n);
  sets_.resize(n + 1);
}

bool Chart::complete() const {
  if (g_->empty_language()) return false;
  return contains(text_.size(), Item{0, 1, 0, 0});
}

bool Chart::at_boundary(std::size_t pos) const { return pos < sets_.size() && sets_[pos].boundary; }

bool Chart::contains(std::size_t pos, const Item& item) const {
  return pos < sets_.size() && sets_[pos].seen.count(pack(item)) > 0;
}

bool Chart::completed(std::size_t pos, int nt, std::size_t origin) const {
  return pos < sets_.size() && sets_[pos].done.count(pack_done(nt, origin)) > 0;
}

std::set<std::string> Chart::continuations() {
  std::set<std::string> out;
  const std::size_t pos = text_.size();
  const auto& prods = g_->productions();
  std::set<char> first_chars;
  for (const Item& it : sets_[pos].items) {
    const auto& p = prods[it.prod];
    if (it.dot == p.rhs.size() || p.rhs[it.dot] >= 0) continue;
    const std::string& t = g_->terminal_text(p.rhs[it.dot]);
    if (it.toff == 0) out.insert(t);
    first_chars.insert(t[it.toff]);
  }
  if (g_->policy() == WhitespacePolicy::kFlexible && sets_[pos].boundary) first_chars.insert(' ');
  // A terminal that is not predicted here may still fit by finishing a partly
  // matched terminal or by spanning several shorter ones.
  for (const std::string& t : g_->terminals()) {
    if (out.count(t) || !first_chars.count(t.front())) continue;
    bool ok = feed(t) && text_.size() == pos + t.size();
    truncate(pos);
    if (ok) out.insert(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recognition

std::string_view to_string(Recognition r) {
  switch (r) {
    case Recognition::kComplete: return "complete";
    case Recognition::kViablePrefix: return "viable_prefix";
    case Recognition::kInvalid: return "invalid";
  }
  return "invalid";
}

Recognition recognize(std::string_view s, const EarleyGrammar& g) {
  Chart chart(g);
  if (g.empty_language() || !chart.feed(s)) return Recognition::kInvalid;
  return chart.complete() ? Recognition::kComplete : Recognition::kViablePrefix;
}

Recognition recognize(std::string_view s, const Grammar& g, WhitespacePolicy policy) {
  return recognize(s, EarleyGrammar(g, policy));
}

// ---------------------------------------------------------------------------
// Tree reconstruction

namespace {

struct RawNode {
  int prod = 0;
  // Per rhs symbol: a terminal text, or an index into the node pool.
  std::vector<std::pair<int, std::string>> children;  // (node index or -1, terminal)
};

class TreeBuilder {
 public:
  TreeBuilder(const Chart& chart, const EarleyGrammar& g) : chart_(chart), g_(g), text_(chart.text()) {}

  std::optional<int> build_nt(int nt, std::size_t a, std::size_t b) {
    const Key key{nt, a, b};
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (active_.count(key)) return std::nullopt;
    active_.insert(key);
    std::vector<int> candidates;
    for (int p : g_.productions_of()[static_cast<std::size_t>(nt)]) {
      const auto len = static_cast<std::uint16_t>(g_.productions()[static_cast<std::size_t>(p)].rhs.size());
      if (chart_.contains(b, Chart::Item{static_cast<std::uint32_t>(p), len, 0, static_cast<std::uint32_t>(a)})) {
        candidates.push_back(p);
      }
    }
    if (candidates.size() > 1) ambiguous_ = true;
    std::optional<int> result;
    for (int p : candidates) {
      RawNode node{p, {}};
      if (build_rhs(p, a, g_.productions()[static_cast<std::size_t>(p)].rhs.size(), b, node.children)) {
        std::reverse(node.children.begin(), node.children.end());
        pool_.push_back(std::move(node));
        result = static_cast<int>(pool_.size()) - 1;
        break;
      }
    }
    active_.erase(key);
    if (result) memo_.emplace(key, *result);
    return result;
  }

  const std::vector<RawNode>& pool() const { return pool_; }
  bool ambiguous() const { return ambiguous_; }

 private:
  struct Key {
    int nt;
    std::size_t a, b;
    bool operator<(const Key& o) const { return std::tie(nt, a, b) < std::tie(o.nt, o.a, o.b); }
  };

  bool terminal_spans(const std::string& t, std::size_t q, std::size_t end) const {
    std::string_view span(text_.data() + q, end - q);
    if (span == t) return true;
    if (g_.policy() != WhitespacePolicy::kFlexible) return false;
    if (!span.empty() && span.front() == ' ' && span.substr(1) == t) return true;
    if (!span.empty() && span.back() == ' ' && span.substr(0, span.size() - 1) == t) return true;
    return span.size() >= 2 && span.front() == ' ' && span.back() == ' ' &&
           span.substr(1, span.size() - 2) == t;
  }

  bool symbol_spans(int sym, std::size_t q, std::size_t end) const {
    if (sym < 0) return terminal_spans(g_.terminal_text(sym), q, end);
    return chart_.completed(end, sym, q);
  }

  // Fills `out` right to left with the derivations of rhs[0..k) over [a, end].
  bool build_rhs(int p, std::size_t a, std::size_t k, std::size_t end,
                 std::vector<std::pair<int, std::string>>& out) {
    if (k == 0) return true;
    const auto& rhs = g_.productions()[static_cast<std::size_t>(p)].rhs;
    const int sym = rhs[k - 1];
    std::vector<std::size_t> splits;
    for (std::size_t q = end + 1; q-- > a;) {
      Chart::Item prev{static_cast<std::uint32_t>(p), static_cast<std::uint16_t>(k - 1), 0,
                       static_cast<std::uint32_t>(a)};
      if (chart_.contains(q, prev) && symbol_spans(sym, q, end)) splits.push_back(q);
    }
    if (splits.size() > 1) {
      for (std::size_t q = splits.back(); q < splits.front(); ++q) {
        if (text_[q] != ' ') {
          ambiguous_ = true;
          break;
        }
      }
    }
    for (std::size_t q : splits) {
      const std::size_t mark = out.size();
      if (sym < 0) {
        out.emplace_back(-1, g_.terminal_text(sym));
      } else {
        auto child = build_nt(sym, q, end);
        if (!child) continue;
        out.emplace_back(*child, std::string());
      }
      if (build_rhs(p, a, k - 1, q, out)) return true;
      out.resize(mark);
    }
    return false;
  }

  const Chart& chart_;
  const EarleyGrammar& g_;
  const std::string& text_;
  std::map<Key, int> memo_;
  std::set<Key> active_;
  std::vector<RawNode> pool_;
  bool ambiguous_ = false;
};

class Flattener {
 public:
  Flattener(const EarleyGrammar& g, const std::vector<RawNode>& pool) : g_(g), pool_(pool) {}

  DerivationTree node(int idx) const {
    const RawNode& raw = pool_[static_cast<std::size_t>(idx)];
    const auto& prod = g_.productions()[static_cast<std::size_t>(raw.prod)];
    const std::string& lhs = g_.nonterminal_names()[static_cast<std::size_t>(prod.lhs)];
    DerivationTree t;
    t.alt = AltRef{lhs, prod.alt_index};
    const SymbolSeq& original = g_.source().alternative(*t.alt);
    for (std::size_t j = 0; j < raw.children.size(); ++j) {
      const auto& [child, term] = raw.children[j];
      if (child < 0) {
        t.children.push_back(leaf(term));
        t.repeat_counts.push_back(1);
      } else if (j < original.size() && original[j].rep != Repetition::kOnce) {
        int count = 0;
        unroll(child, t.children, count);
        t.repeat_counts.push_back(count);
      } else {
        t.children.push_back(node(child));
        t.repeat_counts.push_back(1);
      }
    }
    return t;
  }

 private:
  static DerivationTree leaf(const std::string& text) {
    DerivationTree t;
    t.terminal = text;
    return t;
  }

  void unroll(int idx, std::vector<DerivationTree>& out, int& count) const {
    const RawNode& raw = pool_[static_cast<std::size_t>(idx)];
    const int aux_lhs = g_.productions()[static_cast<std::size_t>(raw.prod)].lhs;
    for (const auto& [child, term] : raw.children) {
      if (child >= 0 && g_.productions()[static_cast<std::size_t>(pool_[static_cast<std::size_t>(child)].prod)].lhs ==
                            aux_lhs) {
        unroll(child, out, count);
      } else {
        ++count;
        out.push_back(child < 0 ? leaf(term) : node(child));
      }
    }
  }

  const EarleyGrammar& g_;
  const std::vector<RawNode>& pool_;
};

}  // namespace

ParseResult parse(std::string_view s, const EarleyGrammar& g) {
  Chart chart(g);
  if (g.empty_language() || !chart.feed(s) || !chart.complete()) {
    throw NoParse("input is not in the language of the grammar");
  }
  TreeBuilder builder(chart, g);
  const int start = g.productions()[0].rhs[0];
  auto root = builder.build_nt(start, 0, chart.size());
  if (!root) throw NoParse("no derivation found");
  ParseResult result;
  result.tree = Flattener(g, builder.pool()).node(*root);
  result.ambiguous = builder.ambiguous();
  return result;
}

ParseResult parse(std::string_view s, const Grammar& g, WhitespacePolicy policy) {
  return parse(s, EarleyGrammar(g, policy));
}

std::string yield(const DerivationTree& t) {
  if (t.is_leaf()) return t.terminal;
  std::string out;
  for (const auto& c : t.children) out += yield(c);
  return out;
}

namespace {

void collect_leaves(const DerivationTree& t, std::vector<std::string>& out) {
  if (t.is_leaf()) {
    if (!t.terminal.empty()) out.push_back(t.terminal);
    return;
  }
  for (const auto& c : t.children) collect_leaves(c, out);
}

}  // namespace

std::vector<std::string> leaves(const DerivationTree& t) {
  std::vector<std::string> out;
  collect_leaves(t, out);
  return out;
}

std::string render(const DerivationTree& t) { return join_tokens(leaves(t)); }

std::size_t interior_node_count(const DerivationTree& t) {
  if (t.is_leaf()) return 0;
  std::size_t n = 1;
  for (const auto& c : t.children) n += interior_node_count(c);
  return n;
}

std::string linearize_derivation(const DerivationTree& t) {
  if (t.is_leaf()) return quote_terminal(t.terminal);
  std::string out = "[" + t.alt->lhs;
  for (const auto& c : t.children) {
    out += ' ';
    out += linearize_derivation(c);
  }
  out += ']';
  return out;
}

// ---------------------------------------------------------------------------
// Prefix analysis

PrefixAnalysis longest_valid_prefix(std::string_view s, const EarleyGrammar& g) {
  if (g.empty_language()) throw EmptyLanguage("grammar generates no strings");
  Chart chart(g);
  PrefixAnalysis out;
  if (!chart.feed(s)) {
    out.failure_index = chart.size();
    std::size_t pos = chart.size();
    while (!chart.at_boundary(pos)) --pos;
    chart.truncate(pos);
  }
  out.prefix = chart.text();
  out.continuations = chart.continuations();
  return out;
}

PrefixAnalysis longest_valid_prefix(std::string_view s, const Grammar& g, WhitespacePolicy policy) {
  return longest_valid_prefix(s, EarleyGrammar(g, policy));
}

std::set<std::string> valid_continuations(std::string_view prefix, const EarleyGrammar& g) {
  Chart chart(g);
  if (g.empty_language() || !chart.feed(prefix)) throw NotViable("prefix is not viable");
  return chart.continuations();
}

std::set<std::string> valid_continuations(std::string_view prefix, const Grammar& g, WhitespacePolicy policy) {
  return valid_continuations(prefix, EarleyGrammar(g, policy));
}

// ---------------------------------------------------------------------------
// Shortest completion

namespace {

struct Cost {
  bool finite = false;
  std::size_t length = 0;
  std::string text;
  std::vector<std::string> pieces;

  bool better_than(const Cost& o) const {
    if (!finite) return false;
    if (!o.finite) return true;
    return length < o.length || (length == o.length && text < o.text);
  }
  void append_piece(const std::string& s) {
    length += s.size();
    text += s;
    pieces.push_back(s);
  }
  void append(const Cost& o) {
    length += o.length;
    text += o.text;
    pieces.insert(pieces.end(), o.pieces.begin(), o.pieces.end());
  }
};

Cost rest_after(const EarleyGrammar& g, int prod, std::size_t from) {
  Cost c;
  c.finite = true;
  const auto& rhs = g.productions()[static_cast<std::size_t>(prod)].rhs;
  for (std::size_t i = from; i < rhs.size(); ++i) {
    if (rhs[i] < 0) {
      c.append_piece(g.terminal_text(rhs[i]));
    } else {
      for (int t : g.min_yield(rhs[i]).terms) c.append_piece(g.terminal_text(t));
    }
  }
  return c;
}

}  // namespace

std::vector<std::string> shortest_completion_terminals(std::string_view prefix, const EarleyGrammar& g) {
  Chart chart(g);
  if (g.empty_language() || !chart.feed(prefix)) throw NotViable("prefix is not viable");
  const auto& prods = g.productions();
  const std::size_t n = chart.size();

  // after[o][A]: cheapest way to finish the parse once A, begun at o, is complete.
  std::vector<std::unordered_map<int, Cost>> after(n + 1);
  auto parent_cost = [&](const Chart::Item& it, std::size_t o) -> const Cost* {
    static const Cost kAccept{true, 0, {}, {}};
    if (it.prod == 0) return &kAccept;
    const int lhs = prods[it.prod].lhs;
    auto& m = after[it.origin];
    auto f = m.find(lhs);
    (void)o;
    return f == m.end() ? nullptr : &f->second;
  };
  for (std::size_t o = 0; o <= n; ++o) {
    for (bool changed = true; changed;) {
      changed = false;
      for (const Chart::Item& it : chart.items(o)) {
        const auto& rhs = prods[it.prod].rhs;
        if (it.toff != 0 || it.dot == rhs.size() || rhs[it.dot] < 0) continue;
        const Cost* par = parent_cost(it, o);
        if (!par || !par->finite) continue;
        Cost c = rest_after(g, static_cast<int>(it.prod), it.dot + 1u);
        c.append(*par);
        Cost& slot = after[o][rhs[it.dot]];
        if (c.better_than(slot)) {
          slot = std::move(c);
          changed = true;
        }
      }
    }
  }

  Cost best;
  for (const Chart::Item& it : chart.items(n)) {
    const auto& rhs = prods[it.prod].rhs;
    Cost c;
    c.finite = true;
    std::size_t from = it.dot;
    if (it.toff > 0) {
      c.append_piece(g.terminal_text(rhs[it.dot]).substr(it.toff));
      ++from;
    }
    c.append(rest_after(g, static_cast<int>(it.prod), from));
    const Cost* par = parent_cost(it, n);
    if (!par || !par->finite) continue;
    c.append(*par);
    if (c.better_than(best)) best = std::move(c);
  }
  if (!best.finite) throw NotViable("no completion exists");
  return best.pieces;
}

std::string shortest_completion(std::string_view prefix, const EarleyGrammar& g) {
  std::string out;
  for (const auto& p : shortest_completion_terminals(prefix, g)) out += p;
  return out;
}

std::string shortest_completion(std::string_view prefix, const Grammar& g, WhitespacePolicy policy) {
  return shortest_completion(prefix, EarleyGrammar(g, policy));
}

// ---------------------------------------------------------------------------
// Enumeration

std::set<std::string> enumerate_language(const Grammar& g, std::size_t max_len, std::size_t node_cap) {
  const EarleyGrammar eg(g, WhitespacePolicy::kExact);
  std::set<std::string> out;
  if (eg.empty_language()) return out;
  const auto& prods = eg.productions();
  const std::size_t n = eg.nonterminal_names().size();

  // Epsilon-free variants of every production; the empty string is handled at the root.
  std::vector<std::vector<std::vector<int>>> variants(n);
  for (std::size_t pi = 1; pi < prods.size(); ++pi) {
    const auto& p = prods[pi];
    std::vector<std::size_t> optional_pos;
    for (std::size_t i = 0; i < p.rhs.size(); ++i) {
      if (p.rhs[i] >= 0 && eg.nullable(p.rhs[i])) optional_pos.push_back(i);
    }
    if (optional_pos.size() > 16) throw BudgetExceeded("too many nullable symbols in one alternative");
    std::set<std::vector<int>> seen;
    for (std::uint32_t mask = 0; mask < (1u << optional_pos.size()); ++mask) {
      std::vector<int> rhs;
      std::size_t oi = 0;
      for (std::size_t i = 0; i < p.rhs.size(); ++i) {
        if (oi < optional_pos.size() && optional_pos[oi] == i) {
          bool drop = (mask >> oi) & 1u;
          ++oi;
          if (drop) continue;
        }
        rhs.push_back(p.rhs[i]);
      }
      if (rhs.empty()) continue;
      if (rhs.size() == 1 && rhs[0] == p.lhs) continue;
      if (seen.insert(rhs).second) variants[static_cast<std::size_t>(p.lhs)].push_back(std::move(rhs));
    }
  }

  // Shortest non-empty yield per nonterminal (every symbol now yields at least one character).
  constexpr std::size_t kInf = SIZE_MAX / 4;
  std::vector<std::size_t> minlen(n, kInf);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t a = 0; a < n; ++a) {
      for (const auto& rhs : variants[a]) {
        std::size_t total = 0;
        for (int s : rhs) total = std::min(kInf, total + (s < 0 ? eg.terminal_text(s).size() : minlen[static_cast<std::size_t>(s)]));
        if (total < minlen[a]) {
          minlen[a] = total;
          changed = true;
        }
      }
    }
  }

  const int start = prods[0].rhs[0];
  if (eg.nullable(start)) out.insert("");

  // exact[a][len]: strings of exactly len characters derived from a. Every symbol of a
  // variant yields at least one character, so a layer only depends on shorter layers,
  // except through unit variants, which are closed by iterating within the layer.
  using Layer = std::set<std::string>;
  std::vector<std::vector<Layer>> exact(n, std::vector<Layer>(max_len + 1));
  std::size_t nodes = 0;
  auto symbol_strings = [&](int s, std::size_t len) -> const Layer* {
    static const Layer kEmpty;
    if (s >= 0) return &exact[static_cast<std::size_t>(s)][len];
    return &kEmpty;
  };
  auto min_of = [&](int s) { return s < 0 ? eg.terminal_text(s).size() : minlen[static_cast<std::size_t>(s)]; };

  // All strings of length len derived by rhs[i..], given every layer below len.
  std::function<void(const std::vector<int>&, std::size_t, std::size_t, const std::string&, Layer&)> expand;
  expand = [&](const std::vector<int>& rhs, std::size_t i, std::size_t len, const std::string& acc, Layer& sink) {
    const int s = rhs[i];
    if (i + 1 == rhs.size()) {
      if (s < 0) {
        if (eg.terminal_text(s).size() == len) sink.insert(acc + eg.terminal_text(s));
      } else {
        for (const auto& x : *symbol_strings(s, len)) sink.insert(acc + x);
      }
      return;
    }
    std::size_t rest_min = 0;
    for (std::size_t j = i + 1; j < rhs.size(); ++j) rest_min = std::min(kInf, rest_min + min_of(rhs[j]));
    if (rest_min >= len) return;
    if (s < 0) {
      const std::string& t = eg.terminal_text(s);
      if (t.size() + rest_min <= len) expand(rhs, i + 1, len - t.size(), acc + t, sink);
      return;
    }
    for (std::size_t k = std::max<std::size_t>(1, minlen[static_cast<std::size_t>(s)]); k + rest_min <= len; ++k) {
      for (const auto& x : exact[static_cast<std::size_t>(s)][k]) expand(rhs, i + 1, len - k, acc + x, sink);
    }
  };

  for (std::size_t len = 1; len <= max_len; ++len) {
    for (std::size_t a = 0; a < n; ++a) {
      if (minlen[a] > len) continue;
      for (const auto& rhs : variants[a]) {
        if (rhs.size() == 1 && rhs[0] >= 0) continue;
        expand(rhs, 0, len, "", exact[a][len]);
      }
    }
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t a = 0; a < n; ++a) {
        for (const auto& rhs : variants[a]) {
          if (rhs.size() != 1 || rhs[0] < 0) continue;
          for (const auto& x : exact[static_cast<std::size_t>(rhs[0])][len]) changed |= exact[a][len].insert(x).second;
        }
      }
    }
    for (std::size_t a = 0; a < n; ++a) nodes += exact[a][len].size();
    if (nodes > node_cap) throw BudgetExceeded("language enumeration exceeded its node cap");
    const auto& top = exact[static_cast<std::size_t>(start)][len];
    out.insert(top.begin(), top.end());
  }
  return out;
}

}  // namespace grammar_steer
