// Extended-BNF reader.
//
//   file  := (rule | ';;')*
//   rule  := NAME '::=' alts
//   alts  := seq (('|' | '||') seq)*
//   seq   := item*          -- ends before '|', ';;', ')', EOF or `NAME ::=`
//   item  := atom ('?' | '*' | '+')?
//   atom  := NAME | STRING | STRING '..' STRING | '(' alts ')'
//
// `#` starts a comment that runs to the end of the line. A range alternative
// expands into one alternative per character; a group or range that is not a
// whole alternative becomes an auxiliary `<lhs>__grp<N>` rule.

#include <set>

#include "grammar_steer/grammar.h"

namespace grammar_steer {
namespace {

enum class Tok { kName, kString, kDefine, kBar, kSemi, kLParen, kRParen, kRange, kQuestion, kStar, kPlus, kEnd };

struct Token {
  Tok kind;
  std::string text;
  int line;
  int column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    while (true) {
      skip_space_and_comments();
      int line = line_, col = col_;
      if (pos_ >= src_.size()) {
        out.push_back({Tok::kEnd, "", line, col});
        return out;
      }
      char c = src_[pos_];
      if (c == '"') {
        out.push_back({Tok::kString, read_string(), line, col});
      } else if (src_.substr(pos_, 3) == "::=") {
        advance(3);
        out.push_back({Tok::kDefine, "::=", line, col});
      } else if (src_.substr(pos_, 2) == "||") {
        advance(2);
        out.push_back({Tok::kBar, "||", line, col});
      } else if (c == '|') {
        advance(1);
        out.push_back({Tok::kBar, "|", line, col});
      } else if (src_.substr(pos_, 2) == ";;") {
        advance(2);
        out.push_back({Tok::kSemi, ";;", line, col});
      } else if (src_.substr(pos_, 2) == "..") {
        advance(2);
        out.push_back({Tok::kRange, "..", line, col});
      } else if (c == '(') {
        advance(1);
        out.push_back({Tok::kLParen, "(", line, col});
      } else if (c == ')') {
        advance(1);
        out.push_back({Tok::kRParen, ")", line, col});
      } else if (c == '?') {
        advance(1);
        out.push_back({Tok::kQuestion, "?", line, col});
      } else if (c == '*') {
        advance(1);
        out.push_back({Tok::kStar, "*", line, col});
      } else if (c == '+') {
        advance(1);
        out.push_back({Tok::kPlus, "+", line, col});
      } else if (is_name_start(c)) {
        out.push_back({Tok::kName, read_name(), line, col});
      } else {
        throw BnfSyntaxError(std::string("unexpected character '") + c + "'", line, col);
      }
    }
  }

 private:
  static bool is_name_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
  }
  static bool is_name_char(char c) {
    return is_name_start(c) || (c >= '0' && c <= '9') || c == '?' || c == '!' || c == '.' ||
           c == '-';
  }

  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        advance(1);
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance(1);
      } else {
        break;
      }
    }
  }

  std::string read_name() {
    std::size_t start = pos_;
    std::size_t end = pos_;
    while (end < src_.size() && is_name_char(src_[end])) ++end;
    // `name?`, `name..` and `name-` never end a name: the suffix is syntax.
    while (end > start + 1 && (src_[end - 1] == '?' || src_[end - 1] == '.')) --end;
    std::string name(src_.substr(start, end - start));
    advance(end - start);
    return name;
  }

  std::string read_string() {
    int line = line_, col = col_;
    advance(1);
    std::string out;
    while (true) {
      if (pos_ >= src_.size()) throw BnfSyntaxError("unterminated string literal", line, col);
      char c = src_[pos_];
      if (c == '"') {
        advance(1);
        return out;
      }
      if (c == '\n') throw BnfSyntaxError("newline in string literal", line_, col_);
      if (c == '\\') {
        if (pos_ + 1 >= src_.size()) throw BnfSyntaxError("dangling escape", line_, col_);
        char e = src_[pos_ + 1];
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          default: throw BnfSyntaxError(std::string("unknown escape '\\") + e + "'", line_, col_);
        }
        advance(2);
        continue;
      }
      out += c;
      advance(1);
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, const BnfParseOptions& opts) : toks_(std::move(toks)), opts_(opts) {}

  Grammar parse() {
    for (const Token& t : toks_) {
      if (t.kind == Tok::kName && peek_is_define(&t - toks_.data())) names_.insert(t.text);
    }
    while (cur().kind != Tok::kEnd) {
      if (cur().kind == Tok::kSemi) {
        ++pos_;
        continue;
      }
      parse_rule();
    }
    if (!builder_.has_rule(first_lhs_)) {
      throw BnfSyntaxError("grammar has no rules", cur().line, cur().column);
    }
    std::string start = opts_.start.value_or(first_lhs_);
    if (!builder_.has_rule(start)) {
      throw BnfSyntaxError("start symbol '" + start + "' has no rule", 1, 1);
    }
    return builder_.build(start);
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  bool peek_is_define(std::size_t i) const {
    return i + 1 < toks_.size() && toks_[i + 1].kind == Tok::kDefine;
  }
  bool at_rule_start() const { return cur().kind == Tok::kName && peek_is_define(pos_); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw BnfSyntaxError(msg, cur().line, cur().column);
  }

  void parse_rule() {
    if (cur().kind != Tok::kName) fail("expected rule name, found '" + cur().text + "'");
    std::string lhs = cur().text;
    if (!is_valid_nonterminal_name(lhs)) fail("invalid rule name '" + lhs + "'");
    ++pos_;
    if (cur().kind != Tok::kDefine) fail("expected '::=' after '" + lhs + "'");
    ++pos_;
    if (defined_.count(lhs) && !opts_.merge_duplicate_lhs) {
      throw DuplicateRuleError("rule '" + lhs + "' is defined more than once");
    }
    defined_.insert(lhs);
    if (first_lhs_.empty()) first_lhs_ = lhs;
    current_lhs_ = lhs;
    auto alts = parse_alts();
    for (auto& a : alts) builder_.add_alternative(lhs, std::move(a));
    for (auto& [name, galts] : pending_groups_) {
      for (auto& a : galts) builder_.add_alternative(name, std::move(a));
    }
    pending_groups_.clear();
  }

  std::vector<SymbolSeq> parse_alts() {
    std::vector<SymbolSeq> alts;
    while (true) {
      auto expanded = parse_seq();
      for (auto& a : expanded) alts.push_back(std::move(a));
      if (cur().kind == Tok::kBar) {
        ++pos_;
        continue;
      }
      return alts;
    }
  }

  // One source alternative; a bare range expands to several.
  std::vector<SymbolSeq> parse_seq() {
    const Token start_tok = cur();
    SymbolSeq seq;
    bool explicit_empty = false;
    std::optional<std::vector<std::string>> lone_range;
    int items = 0;
    while (true) {
      Tok k = cur().kind;
      if (k == Tok::kBar || k == Tok::kSemi || k == Tok::kRParen || k == Tok::kEnd) break;
      if (at_rule_start()) break;
      ++items;
      if (k == Tok::kString && toks_[pos_ + 1].kind == Tok::kRange) {
        auto chars = parse_range();
        if (is_rep(cur().kind) || items > 1 || !ends_seq(pos_)) {
          std::vector<SymbolSeq> alts;
          for (auto& c : chars) alts.push_back({Item{Symbol::terminal(c), Repetition::kOnce}});
          Item it{Symbol::nonterminal(make_group(std::move(alts))), parse_rep()};
          seq.push_back(std::move(it));
        } else {
          lone_range = std::move(chars);
        }
        continue;
      }
      if (k == Tok::kString) {
        std::string text = cur().text;
        ++pos_;
        Repetition rep = parse_rep();
        if (text.empty()) {
          if (rep != Repetition::kOnce) fail("repetition applied to empty string");
          explicit_empty = true;
          continue;
        }
        seq.push_back(Item{Symbol::terminal(std::move(text)), rep});
        continue;
      }
      if (k == Tok::kName) {
        std::string name = cur().text;
        if (!is_valid_nonterminal_name(name)) fail("invalid nonterminal name '" + name + "'");
        ++pos_;
        seq.push_back(Item{Symbol::nonterminal(std::move(name)), parse_rep()});
        continue;
      }
      if (k == Tok::kLParen) {
        ++pos_;
        auto inner = parse_alts();
        if (cur().kind != Tok::kRParen) fail("expected ')'");
        ++pos_;
        Repetition rep = parse_rep();
        if (inner.size() == 1 && rep == Repetition::kOnce) {
          for (auto& it : inner.front()) seq.push_back(std::move(it));
        } else if (inner.size() == 1 && inner.front().size() == 1 &&
                   inner.front().front().rep == Repetition::kOnce) {
          seq.push_back(Item{inner.front().front().symbol, rep});
        } else {
          seq.push_back(Item{Symbol::nonterminal(make_group(std::move(inner))), rep});
        }
        continue;
      }
      fail("unexpected '" + cur().text + "'");
    }
    if (lone_range) {
      std::vector<SymbolSeq> alts;
      for (auto& c : *lone_range) alts.push_back({Item{Symbol::terminal(c), Repetition::kOnce}});
      return alts;
    }
    if (seq.empty() && !explicit_empty) {
      throw BnfSyntaxError("empty alternative (write \"\" for the empty string)", start_tok.line,
                           start_tok.column);
    }
    return {std::move(seq)};
  }

  static bool is_rep(Tok k) { return k == Tok::kQuestion || k == Tok::kStar || k == Tok::kPlus; }

  bool ends_seq(std::size_t i) const {
    Tok k = toks_[i].kind;
    return k == Tok::kBar || k == Tok::kSemi || k == Tok::kRParen || k == Tok::kEnd ||
           (k == Tok::kName && peek_is_define(i));
  }

  Repetition parse_rep() {
    switch (cur().kind) {
      case Tok::kQuestion: ++pos_; return Repetition::kOptional;
      case Tok::kStar: ++pos_; return Repetition::kStar;
      case Tok::kPlus: ++pos_; return Repetition::kPlus;
      default: return Repetition::kOnce;
    }
  }

  std::vector<std::string> parse_range() {
    const Token lo = cur();
    pos_ += 2;  // string, '..'
    if (cur().kind != Tok::kString) fail("expected string after '..'");
    const Token hi = cur();
    ++pos_;
    if (lo.text.size() != 1 || hi.text.size() != 1) {
      throw BnfSyntaxError("range bounds must be single characters", lo.line, lo.column);
    }
    auto a = static_cast<unsigned char>(lo.text[0]);
    auto b = static_cast<unsigned char>(hi.text[0]);
    if (a > b) throw BnfSyntaxError("empty character range", lo.line, lo.column);
    std::vector<std::string> out;
    for (unsigned c = a; c <= b; ++c) out.emplace_back(1, static_cast<char>(c));
    return out;
  }

  std::string make_group(std::vector<SymbolSeq> alts) {
    std::string name;
    do {
      name = current_lhs_ + "__grp" + std::to_string(group_counter_[current_lhs_]++);
    } while (names_.count(name));
    names_.insert(name);
    pending_groups_.emplace_back(name, std::move(alts));
    return name;
  }

  std::vector<Token> toks_;
  const BnfParseOptions& opts_;
  std::size_t pos_ = 0;
  GrammarBuilder builder_;
  std::set<std::string> defined_;
  std::set<std::string> names_;
  std::map<std::string, int> group_counter_;
  std::vector<std::pair<std::string, std::vector<SymbolSeq>>> pending_groups_;
  std::string first_lhs_;
  std::string current_lhs_;
};

}  // namespace

Grammar parse_bnf(std::string_view text, const BnfParseOptions& options) {
  Parser p(Lexer(text).tokenize(), options);
  return p.parse();
}

}  // namespace grammar_steer
