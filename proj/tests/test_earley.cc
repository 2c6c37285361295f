#include <random>

#include "doctest.h"
#include "grammar_steer/earley.h"
#include "oracle.h"
#include "test_util.h"

using namespace grammar_steer;

namespace {

Grammar constraint_grammar() {
  BnfParseOptions opt;
  opt.start = "constraint";
  return parse_bnf(testing::read_file(testing::corpus_path("calendar/grammar.bnf")), opt);
}

void collect_alts(const DerivationTree& t, std::set<AltRef>& out) {
  if (t.is_leaf()) return;
  out.insert(*t.alt);
  for (const auto& c : t.children) collect_alts(c, out);
}

// Viability by brute force: some string of the bounded language starts with p.
bool viable_in(const testing::StringSet& lang, const std::string& p) {
  auto it = lang.lower_bound(p);
  return it != lang.end() && it->compare(0, p.size(), p) == 0;
}

}  // namespace

TEST_CASE("recognize: exemplar program under its specialized grammar") {
  Grammar sub = parse_bnf(testing::kCalendarExemplarGrammar);
  CHECK(recognize(testing::kCalendarExemplarProgram, sub) == Recognition::kComplete);
  // The exemplar as typeset drops one opening parenthesis and is only a prefix.
  CHECK(recognize("QueryEvent(& (start_? Wednesday) (attendee_? Bob Carol))", sub) == Recognition::kInvalid);
}

TEST_CASE("recognize: trivial cases") {
  Grammar g = parse_bnf("s ::= \"a\"");
  CHECK(recognize("", g) == Recognition::kViablePrefix);
  CHECK(recognize("a", g) == Recognition::kComplete);
  CHECK(recognize("b", g) == Recognition::kInvalid);
  CHECK(recognize("aa", g) == Recognition::kInvalid);
}

TEST_CASE("recognize: a name cannot stand where a date is expected") {
  Grammar g = testing::calendar_grammar();
  CHECK(recognize("QueryEvent((& (start_? Jean", g) == Recognition::kInvalid);
  auto a = longest_valid_prefix("QueryEvent((& (start_? Jean", g);
  CHECK(a.prefix == "QueryEvent((& (start_? ");
  CHECK(a.failure_index == std::optional<std::size_t>(23));
  CHECK(a.continuations == std::set<std::string>{"Monday", "Wednesday"});
}

TEST_CASE("whitespace policies") {
  Grammar g = testing::calendar_grammar();
  CHECK(recognize("QueryEvent(  (attendee_?\n Bob\tCarol ) )", g) == Recognition::kComplete);
  CHECK(recognize("QueryEvent((attendee_?Bob Carol))", g) == Recognition::kComplete);
  CHECK(recognize("  QueryEvent((attendee_? Bob))  ", g) == Recognition::kComplete);
  CHECK(recognize("QueryEvent((attendee_? B ob))", g) == Recognition::kInvalid);
  Grammar spaced = parse_bnf("s ::= \"a\" \" \" \"b\"");
  CHECK(recognize("a b", spaced, WhitespacePolicy::kNormalized) == Recognition::kComplete);
  CHECK(recognize("a   b", spaced, WhitespacePolicy::kNormalized) == Recognition::kComplete);
  CHECK(recognize("ab", spaced, WhitespacePolicy::kNormalized) == Recognition::kInvalid);
  CHECK(recognize("a  b", spaced, WhitespacePolicy::kExact) == Recognition::kInvalid);
  CHECK(normalize_whitespace("  a \n\t b ", WhitespacePolicy::kFlexible) == " a b ");
  CHECK(normalize_whitespace("  a \n\t b ", WhitespacePolicy::kNormalized) == "a b ");
}

TEST_CASE("parse: derivation of the exemplar uses exactly the specialized rules") {
  Grammar sub = parse_bnf(testing::kCalendarExemplarGrammar);
  ParseResult r = parse(testing::kCalendarExemplarProgram, sub);
  std::set<AltRef> used;
  collect_alts(r.tree, used);
  std::set<AltRef> all;
  for (const auto& rule : sub.rules()) {
    for (std::size_t i = 0; i < rule.alternatives.size(); ++i) all.insert({rule.lhs, i});
  }
  CHECK(used == all);
  CHECK_FALSE(r.ambiguous);
  CHECK(normalize_whitespace(yield(r.tree), WhitespacePolicy::kFlexible) ==
        "QueryEvent((&(start_?Wednesday)(attendee_?BobCarol)))");
}

TEST_CASE("parse: trivial and right-recursive") {
  ParseResult one = parse("a", parse_bnf("s ::= \"a\""));
  REQUIRE(one.tree.children.size() == 1);
  CHECK(one.tree.children[0].terminal == "a");

  ParseResult two = parse("aa", parse_bnf("s ::= \"a\" s | \"a\""), WhitespacePolicy::kExact);
  CHECK(two.tree.alt == std::optional<AltRef>(AltRef{"s", 0}));
  REQUIRE(two.tree.children.size() == 2);
  CHECK(two.tree.children[0].terminal == "a");
  CHECK(two.tree.children[1].alt == std::optional<AltRef>(AltRef{"s", 1}));
  CHECK_FALSE(two.ambiguous);

  CHECK_THROWS_AS(parse("b", parse_bnf("s ::= \"a\"")), NoParse);
}

TEST_CASE("parse: ambiguity is noted and the lowest alternative wins") {
  Grammar g = parse_bnf("s ::= t | u ;; t ::= \"x\" ;; u ::= \"x\"");
  ParseResult r = parse("x", g);
  CHECK(r.ambiguous);
  CHECK(r.tree.alt == std::optional<AltRef>(AltRef{"s", 0}));
  Grammar split = parse_bnf("s ::= a a ;; a ::= \"x\" | \"xx\" | \"\"");
  CHECK(parse("xxx", split, WhitespacePolicy::kExact).ambiguous);
}

TEST_CASE("parse: repetition counts") {
  Grammar g = testing::calendar_grammar();
  ParseResult r = parse("QueryEvent((attendee_? Bob Carol Jean))", g);
  const DerivationTree& c = r.tree.children[1];
  CHECK(c.alt == std::optional<AltRef>(AltRef{"constraint", 2}));
  CHECK(c.repeat_counts == std::vector<int>{1, 3, 1});
  CHECK(c.children.size() == 5);
  ParseResult t = parse("QueryEvent((start_? Monday))", g);
  CHECK(t.tree.children[1].repeat_counts == std::vector<int>{1, 1, 0, 1});
}

TEST_CASE("longest_valid_prefix: invalid attendee") {
  Grammar g = testing::calendar_grammar();
  auto a = longest_valid_prefix("QueryEvent((& (start_? Wednesday) (attendee_? Jean's Manager)))", g);
  CHECK(a.prefix == "QueryEvent((& (start_? Wednesday) (attendee_? Jean");
  CHECK(a.continuations.count("Jean"));
  CHECK(a.continuations.count("FindManager("));

  auto b = longest_valid_prefix("QueryEvent((& (start_? Wednesday) (attendee_? ManagerOf(Jean))))", g);
  CHECK(b.prefix == "QueryEvent((& (start_? Wednesday) (attendee_? ");
  CHECK(b.continuations == std::set<std::string>{"Bob", "Carol", "FindManager(", "Jean"});
  CHECK(b.failure_index.has_value());
}

TEST_CASE("longest_valid_prefix: trivial cases") {
  Grammar g = parse_bnf("s ::= \"a\"");
  auto full = longest_valid_prefix("a", g);
  CHECK(full.prefix == "a");
  CHECK_FALSE(full.failure_index.has_value());
  CHECK(full.continuations.empty());
  auto x = longest_valid_prefix("x", g);
  CHECK(x.prefix == "");
  CHECK(x.continuations == std::set<std::string>{"a"});
  CHECK(x.failure_index == std::optional<std::size_t>(0));
  CHECK_THROWS_AS(longest_valid_prefix("a", parse_bnf("s ::= s \"a\"")), EmptyLanguage);
}

TEST_CASE("longest_valid_prefix backs off to a terminal boundary") {
  Grammar g = testing::calendar_grammar();
  auto a = longest_valid_prefix("QueryEvent((start_? Wedn", g);
  CHECK(a.prefix == "QueryEvent((start_? Wedn");
  auto b = longest_valid_prefix("QueryEvent((start_? Wednes)", g);
  CHECK(b.prefix == "QueryEvent((start_? ");
  CHECK(b.failure_index == std::optional<std::size_t>(26));
}

TEST_CASE("valid_continuations") {
  Grammar g = testing::calendar_grammar();
  CHECK(valid_continuations("", g) == std::set<std::string>{"CreateEvent(", "QueryEvent("});
  auto c = valid_continuations("(& ", constraint_grammar());
  CHECK(c == std::set<std::string>{"(&", "(attendee_?", "(start_?"});
  CHECK(valid_continuations("a", parse_bnf("s ::= \"a\"")).empty());
  CHECK_THROWS_AS(valid_continuations("Query(", g), NotViable);
  // A terminal can be viable by spanning two shorter ones.
  Grammar span = parse_bnf("s ::= \"a\" \"b\" | t ;; t ::= \"ab\" \"c\"");
  CHECK(valid_continuations("", span, WhitespacePolicy::kExact) == std::set<std::string>{"a", "ab"});
  CHECK(valid_continuations("a", span, WhitespacePolicy::kExact) == std::set<std::string>{"b"});
}

TEST_CASE("enumerate_language") {
  CHECK(enumerate_language(parse_bnf("s ::= \"a\" | \"a\" s"), 3) == std::set<std::string>{"a", "aa", "aaa"});
  CHECK(enumerate_language(parse_bnf("s ::= \"ab\"?"), 2) == std::set<std::string>{"", "ab"});
  Grammar sub = parse_bnf(testing::kCalendarExemplarGrammar);
  const std::string y = normalize_whitespace(testing::kCalendarExemplarProgram, WhitespacePolicy::kExact);
  std::string compact;
  for (char ch : y) {
    if (ch != ' ') compact += ch;
  }
  auto lang = enumerate_language(sub, compact.size());
  CHECK(lang.count(compact));
  std::map<std::size_t, int> by_len;
  for (const auto& s : lang) ++by_len[s.size()];
  // Smallest programs: one start constraint, or an attendee constraint with two Bobs.
  CHECK(by_len.begin()->first == std::string("QueryEvent((start_?Wednesday))").size());
  CHECK(by_len.begin()->second == 2);
  CHECK(lang.count("QueryEvent((attendee_?BobBob))"));
  CHECK(lang == testing::bounded_language(sub, compact.size()));
  CHECK_THROWS_AS(enumerate_language(testing::calendar_grammar(), 60, 1000), BudgetExceeded);
}

TEST_CASE("shortest_completion") {
  Grammar g = testing::calendar_grammar();
  CHECK(shortest_completion(testing::kCalendarTestProgram, g) == "");
  CHECK(shortest_completion("QueryEvent(", g) == "(attendee_?Bob))");
  CHECK(shortest_completion("", parse_bnf("s ::= \"a\" s | \"a\"")) == "a");
  CHECK(shortest_completion("QueryEvent((start_? Wedn", g) == "esday))");
  CHECK_THROWS_AS(shortest_completion("Event", g), NotViable);
  auto pieces = shortest_completion_terminals("QueryEvent((start_? Wedn", EarleyGrammar(g));
  CHECK(pieces == std::vector<std::string>{"esday", ")", ")"});
}

TEST_CASE("linearize_derivation") {
  ParseResult r = parse("(attendee_? FindManager(Jean))", constraint_grammar());
  CHECK(linearize_derivation(r.tree) ==
        "[constraint \"(attendee_?\" [attendee \"FindManager(\" [attendee \"Jean\"] \")\"] \")\"]");
  CHECK(linearize_derivation(parse("a", parse_bnf("s ::= \"a\"")).tree) == "[s \"a\"]");
  ParseResult y1 = parse(testing::kCalendarExemplarProgram, parse_bnf(testing::kCalendarExemplarGrammar));
  const std::string lin = linearize_derivation(y1.tree);
  CHECK(std::count(lin.begin(), lin.end(), '[') == static_cast<long>(interior_node_count(y1.tree)));
  CHECK(linearize_derivation(parse("", parse_bnf("s ::= \"\"")).tree) == "[s]");
}

TEST_CASE("chart: incremental feeding and truncation") {
  EarleyGrammar eg(testing::calendar_grammar());
  Chart chart(eg);
  CHECK(chart.feed("QueryEvent((attendee_? "));
  auto at = chart.continuations();
  CHECK(at == std::set<std::string>{"Bob", "Carol", "FindManager(", "Jean"});
  CHECK(chart.feed("Bob))"));
  CHECK(chart.complete());
  chart.truncate(11);
  CHECK(chart.text() == "QueryEvent(");
  CHECK_FALSE(chart.feed("(start_? Friday"));
  CHECK(chart.text() == "QueryEvent((start_? ");
}

TEST_CASE("property: recognize agrees with the oracle on random grammars") {
  std::mt19937 rng(2024);
  const auto strings = testing::all_ab_strings(8);
  for (int i = 0; i < 20; ++i) {
    Grammar g = testing::random_grammar(rng);
    EarleyGrammar eg(g, WhitespacePolicy::kExact);
    auto lang = testing::bounded_language(g, 8);
    auto big = testing::bounded_language(g, 12);
    CHECK(enumerate_language(g, 8) == lang);
    for (const auto& s : strings) {
      Recognition want = lang.count(s) ? Recognition::kComplete
                         : viable_in(big, s) ? Recognition::kViablePrefix
                                             : Recognition::kInvalid;
      Recognition got = recognize(s, eg);
      if (got == Recognition::kViablePrefix && want == Recognition::kInvalid) continue;  // needs a longer witness
      CHECK_MESSAGE(got == want, serialize(g) << " on '" << s << "'");
    }
  }
}

TEST_CASE("property: prefix maximality, continuations, shortest completion") {
  std::mt19937 rng(99);
  testing::RandomGrammarOptions opt;
  opt.max_rules = 4;
  int checked = 0;
  for (int i = 0; i < 200 && checked < 40; ++i) {
    Grammar g = testing::random_grammar(rng, opt);
    EarleyGrammar eg(g, WhitespacePolicy::kExact);
    if (eg.empty_language()) continue;
    auto lang = testing::bounded_language(g, 14);
    ++checked;
    const auto& terms = eg.terminals();
    for (const auto& s : testing::all_ab_strings(6)) {
      PrefixAnalysis a = longest_valid_prefix(s, eg);
      REQUIRE(s.compare(0, a.prefix.size(), a.prefix) == 0);
      CHECK(recognize(a.prefix, eg) != Recognition::kInvalid);
      if (a.prefix == s) {
        CHECK_FALSE(a.failure_index.has_value());
      } else {
        REQUIRE(a.failure_index.has_value());
        CHECK(recognize(s.substr(0, *a.failure_index + 1), eg) == Recognition::kInvalid);
        CHECK(recognize(s.substr(0, *a.failure_index), eg) != Recognition::kInvalid);
        // No longer boundary prefix of s is viable: every longer viable prefix ends mid-terminal.
        Chart chart(eg);
        chart.feed(s.substr(0, *a.failure_index));
        for (std::size_t k = a.prefix.size() + 1; k <= *a.failure_index; ++k) CHECK_FALSE(chart.at_boundary(k));
      }
      for (const auto& w : terms) {
        const bool in = a.continuations.count(w) > 0;
        CHECK_MESSAGE(in == (recognize(a.prefix + w, eg) != Recognition::kInvalid), serialize(g) << " '" << a.prefix << "' + " << w);
        if (in) {
          // The witness may exceed the oracle's bound; when it fits, the oracle must contain it.
          const std::string witness = a.prefix + w + shortest_completion(a.prefix + w, eg);
          if (witness.size() <= 14) CHECK_MESSAGE(lang.count(witness), serialize(g) << " " << witness);
        }
      }
      const std::string done = a.prefix + shortest_completion(a.prefix, eg);
      CHECK(recognize(done, eg) == Recognition::kComplete);
      if (done.size() <= 14) {
        CHECK(lang.count(done));
        for (const auto& other : lang) {
          if (other.size() < done.size() && other.compare(0, a.prefix.size(), a.prefix) == 0) {
            FAIL_CHECK("shorter completion exists: " << other);
          }
          if (other.size() == done.size() && other < done && other.compare(0, a.prefix.size(), a.prefix) == 0) {
            FAIL_CHECK("lexicographically smaller completion exists: " << other);
          }
        }
      }
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("property: yield reproduces the input") {
  Grammar g = testing::calendar_grammar();
  for (const char* s : {testing::kCalendarTestProgram, testing::kCalendarExemplarProgram,
                        "QueryEvent((attendee_? FindManager(FindManager(Bob)) Carol))"}) {
    ParseResult r = parse(s, g);
    auto strip = [](std::string v) {
      v.erase(std::remove(v.begin(), v.end(), ' '), v.end());
      return v;
    };
    CHECK(strip(yield(r.tree)) == strip(s));
  }
}
