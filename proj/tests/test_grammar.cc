#include <random>

#include "doctest.h"
#include "grammar_steer/grammar.h"
#include "oracle.h"
#include "test_util.h"

using namespace grammar_steer;

namespace {

const char* kCorpora[] = {"calendar", "geoquery", "overnight"};

Grammar corpus(const std::string& name) {
  return parse_bnf(testing::read_file(testing::corpus_path(name + "/grammar.bnf")));
}

}  // namespace

TEST_CASE("calendar grammar parses with the expected rules") {
  Grammar g = testing::calendar_grammar();
  CHECK(g.start() == "event");
  std::vector<std::string> lhs;
  for (const auto& r : g.rules()) lhs.push_back(r.lhs);
  CHECK(lhs == std::vector<std::string>{"event", "constraint", "date", "number", "number__grp0", "time", "attendee"});
  CHECK(g.find("number")->alternatives.size() == 1);
  CHECK(g.find("constraint")->alternatives.size() == 3);
  CHECK(g.find("attendee")->alternatives.size() == 4);
  CHECK(validate(g).empty());
}

TEST_CASE("minimal grammars") {
  Grammar g = parse_bnf("s ::= \"a\"");
  REQUIRE(g.rules().size() == 1);
  REQUIRE(g.rules()[0].alternatives.size() == 1);
  CHECK(g.rules()[0].alternatives[0] == SymbolSeq{{Symbol::terminal("a"), Repetition::kOnce}});

  Grammar r = parse_bnf("s ::= \"a\" s | \"a\"");
  REQUIRE(r.rules()[0].alternatives.size() == 2);
  CHECK(r.rules()[0].alternatives[0].size() == 2);
  CHECK(r.rules()[0].alternatives[1].size() == 1);
  CHECK(parse_bnf(serialize(r)) == r);
}

TEST_CASE("serialize is canonical") {
  Grammar g = parse_bnf("s ::= \"a\"");
  CHECK(serialize(g) == "s ::= \"a\"\n");
  Grammar ab = parse_bnf("s ::= \"a\" | \"b\"");
  Grammar ba = parse_bnf("s ::= \"b\" | \"a\"");
  CHECK(serialize(ab) != serialize(ba));
  CHECK(serialize(parse_bnf("s ::= \"\" | \"q\\\"\\\\\"")) == "s ::= \"\" | \"q\\\"\\\\\"\n");
}

TEST_CASE("round trip over the bundled corpora") {
  for (const char* name : kCorpora) {
    Grammar g = corpus(name);
    CHECK_MESSAGE(parse_bnf(serialize(g)) == g, name);
    CHECK_MESSAGE(serialize(parse_bnf(serialize(g))) == serialize(g), name);
    CHECK_MESSAGE(validate(g).empty(), name);
  }
}

TEST_CASE("syntax: separators, comments, escapes, both bar forms") {
  Grammar g = parse_bnf(R"(
    # comment line
    a ::= "x" || "y" | b   # trailing comment
    ;;
    b ::= "q\"uote" | "back\\slash" | "tab\t"
  )");
  REQUIRE(g.find("a"));
  CHECK(g.find("a")->alternatives.size() == 3);
  CHECK(g.find("b")->alternatives[0][0].symbol.text == "q\"uote");
  CHECK(g.find("b")->alternatives[1][0].symbol.text == "back\\slash");
  CHECK(g.find("b")->alternatives[2][0].symbol.text == "tab\t");
  CHECK(parse_bnf(serialize(g)) == g);
}

TEST_CASE("syntax errors carry line and column") {
  try {
    parse_bnf("s ::= \"a\"\nt ::= \"b\" @");
    FAIL("expected an error");
  } catch (const BnfSyntaxError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 11);
  }
  CHECK_THROWS_AS(parse_bnf("s ::= \"a"), BnfSyntaxError);
  CHECK_THROWS_AS(parse_bnf("s ::= | \"a\""), BnfSyntaxError);
  CHECK_THROWS_AS(parse_bnf("s \"a\""), BnfSyntaxError);
  CHECK_THROWS_AS(parse_bnf(""), BnfSyntaxError);
  CHECK_THROWS_AS(parse_bnf("s ::= \"b\"..\"a\""), BnfSyntaxError);
}

TEST_CASE("same-lhs blocks merge unless merging is disabled") {
  const char* text = "s ::= \"a\" ;; t ::= \"c\" ;; s ::= \"b\" | \"a\"";
  Grammar g = parse_bnf(text);
  CHECK(g.find("s")->alternatives.size() == 2);
  CHECK(g.rules()[0].lhs == "s");
  BnfParseOptions strict;
  strict.merge_duplicate_lhs = false;
  CHECK_THROWS_AS(parse_bnf(text, strict), DuplicateRuleError);
}

TEST_CASE("undefined nonterminals are only reported by validate") {
  Grammar g = parse_bnf("s ::= t");
  auto d = validate(g);
  REQUIRE(d.size() == 1);
  CHECK(d[0].kind == DiagnosticKind::kUndefinedNonterminal);
  CHECK(d[0].nonterminal == "t");
}

TEST_CASE("validate reports unproductive and unreachable rules") {
  Grammar g = parse_bnf("s ::= \"a\" | u ;; u ::= u");
  auto d = validate(g);
  REQUIRE(d.size() == 1);
  CHECK(d[0].kind == DiagnosticKind::kUnproductiveNonterminal);
  CHECK(d[0].nonterminal == "u");

  auto d2 = validate(parse_bnf("s ::= \"a\" ;; orphan ::= \"b\""));
  REQUIRE(d2.size() == 1);
  CHECK(d2[0].kind == DiagnosticKind::kUnreachableRule);
  CHECK(d2[0].nonterminal == "orphan");
}

TEST_CASE("ranges expand into alternatives") {
  Grammar g = parse_bnf("d ::= \"0\"..\"9\"");
  CHECK(g.find("d")->alternatives.size() == 10);
  Grammar cal = testing::calendar_grammar();
  const auto& number = cal.find("number")->alternatives;
  REQUIRE(number.size() == 1);
  REQUIRE(number[0].size() == 1);
  CHECK(number[0][0].rep == Repetition::kPlus);
  const Rule* grp = cal.find(number[0][0].symbol.text);
  REQUIRE(grp);
  CHECK(grp->alternatives.size() == 10);
}

TEST_CASE("desugar: plus becomes right recursion") {
  Grammar g = parse_bnf("s ::= \"a\"+");
  Grammar d = desugar(g);
  CHECK(d == parse_bnf("s ::= s__rep0 ;; s__rep0 ::= \"a\" s__rep0 | \"a\""));
  CHECK(testing::bounded_language(d, 5) == testing::bounded_language(g, 5));
  CHECK(testing::bounded_language(g, 5) == testing::StringSet{"a", "aa", "aaa", "aaaa", "aaaaa"});
}

TEST_CASE("desugar leaves plain grammars alone") {
  Grammar g = parse_bnf("s ::= \"a\" t | \"b\" ;; t ::= \"c\"");
  CHECK(desugar(g) == g);
}

TEST_CASE("desugar of the digit rule preserves the language") {
  Grammar g = parse_bnf("number ::= (\"0\"..\"9\")+");
  Grammar d = desugar(g);
  for (const auto& r : d.rules()) {
    for (const auto& alt : r.alternatives) CHECK_FALSE(has_repetition(alt));
  }
  auto lang = testing::bounded_language(d, 3);
  CHECK(lang == testing::bounded_language(g, 3));
  CHECK(lang.size() == 10 + 100 + 1000);
}

TEST_CASE("desugar soundness on random grammars") {
  std::mt19937 rng(7);
  for (int i = 0; i < 60; ++i) {
    Grammar g = testing::random_grammar(rng);
    CHECK_MESSAGE(testing::bounded_language(desugar(g), 10) == testing::bounded_language(g, 10), serialize(g));
  }
}

TEST_CASE("is_subset against the calendar grammar") {
  Grammar full = testing::calendar_grammar();
  Grammar sub = parse_bnf(testing::kCalendarExemplarGrammar);
  CHECK(is_subset(sub, full));
  CHECK(is_subset(full, full));
  Grammar extra = parse_bnf(std::string(testing::kCalendarExemplarGrammar) + "date ::= \"Friday\"\n");
  CHECK_FALSE(is_subset(extra, full));
  // Zero optional times and two attendees are concretizations; zero attendees is not.
  CHECK(is_subset(parse_bnf("constraint ::= \"(start_?\" date \")\" ;; date ::= \"Monday\""), full));
  CHECK_FALSE(is_subset(parse_bnf("constraint ::= \"(attendee_?\" \")\""), full));
  CHECK(is_subset(parse_bnf("constraint ::= \"(attendee_?\" attendee+ \")\" ;; attendee ::= \"Bob\""), full));
}

TEST_CASE("concretizes reports counts") {
  Grammar full = parse_bnf("s ::= \"x\" t* \"y\"? t+ ;; t ::= \"t\"");
  const SymbolSeq& alt = full.rules()[0].alternatives[0];
  std::vector<int> counts;
  SymbolSeq sub = parse_bnf("s ::= \"x\" t t \"y\" t+ ;; t ::= \"t\"").rules()[0].alternatives[0];
  REQUIRE(concretizes(sub, alt, &counts));
  CHECK(counts == std::vector<int>{1, 2, 1, -1});
  CHECK(instantiate(alt, counts) == sub);
}

TEST_CASE("subset is a partial order on random rule subsets") {
  std::mt19937 rng(11);
  Grammar full = testing::calendar_grammar();
  auto random_subset = [&](const Grammar& g) {
    GrammarBuilder b;
    for (const auto& r : g.rules()) {
      for (const auto& alt : r.alternatives) {
        if (rng() % 2) b.add_alternative(r.lhs, alt);
      }
    }
    if (!b.has_rule(g.start())) b.add_alternative(g.start(), g.find(g.start())->alternatives[0]);
    return b.build(g.start());
  };
  for (int i = 0; i < 100; ++i) {
    Grammar a = random_subset(full);
    Grammar b = random_subset(a);
    Grammar c = random_subset(b);
    CHECK(is_subset(a, a));
    CHECK(is_subset(a, full));
    CHECK(is_subset(b, a));
    CHECK(is_subset(c, b));
    CHECK(is_subset(c, a));
    if (is_subset(a, b)) CHECK(serialize(a) == serialize(b));
  }
}
