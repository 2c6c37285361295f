#include <random>

#include "corpus_util.h"
#include "doctest.h"
#include "grammar_steer/specialization.h"
#include "oracle.h"
#include "test_util.h"

using namespace grammar_steer;

TEST_CASE("specialize reproduces the printed calendar exemplar grammar") {
  Grammar full = testing::calendar_grammar();
  SpecializationResult r = specialize(testing::kCalendarExemplarProgram, full);
  Grammar want = parse_bnf(testing::kCalendarExemplarGrammar);
  CHECK(r.grammar == want);
  CHECK(serialize(r.grammar) == serialize(want));
  CHECK(r.grammar.start() == full.start());
  CHECK(check_property1(r, testing::kCalendarExemplarProgram));
  CHECK(check_property2(r, testing::kCalendarExemplarProgram));
  CHECK(is_subset(r.grammar, full));
  CHECK(r.used_alts == std::set<AltRef>{{"event", 1}, {"constraint", 0}, {"constraint", 1},
                                        {"constraint", 2}, {"date", 0}, {"attendee", 0}, {"attendee", 1}});
  REQUIRE(r.concretized.size() == 2);
  CHECK(r.concretized.at({"constraint", 1}) == std::set<std::vector<int>>{{1, 1, 0, 1}});
  CHECK(r.concretized.at({"constraint", 2}) == std::set<std::vector<int>>{{1, 2, 1}});
}

TEST_CASE("specialize of a one-rule grammar is the grammar") {
  Grammar g = parse_bnf("s ::= \"a\"");
  CHECK(specialize("a", g).grammar == g);
}

TEST_CASE("extended alternatives are concretized unless kept") {
  Grammar g = parse_bnf(R"bnf(constraint ::= "(attendee_?" attendee+ ")" ;; attendee ::= "Bob" | "Carol")bnf");
  const std::string y = "(attendee_? Bob Carol)";
  SpecializationResult r = specialize(y, g);
  CHECK(r.grammar == parse_bnf(R"bnf(constraint ::= "(attendee_?" attendee attendee ")" ;; attendee ::= "Bob" | "Carol")bnf"));
  SpecializeOptions keep;
  keep.keep_extended = true;
  SpecializationResult k = specialize(y, g, keep);
  CHECK(k.grammar == g);
  CHECK(k.concretized.empty());
  CHECK(check_property1(k, y));
}

TEST_CASE("specialize rejects non-members") {
  CHECK_THROWS_AS(specialize("QueryEvent((attendee_? Jean's))", testing::calendar_grammar()), NoParse);
}

TEST_CASE("property (1)") {
  SpecializationResult r = specialize(testing::kCalendarExemplarProgram, testing::calendar_grammar());
  CHECK(check_property1(r, testing::kCalendarExemplarProgram));
  SpecializationResult broken = r;
  std::vector<Rule> rules;
  for (const auto& rule : r.grammar.rules()) {
    if (rule.lhs != "date") rules.push_back(rule);
  }
  broken.grammar = Grammar(rules, r.grammar.start());
  CHECK_FALSE(check_property1(broken, testing::kCalendarExemplarProgram));

  SpecializationResult eps = specialize("", parse_bnf("s ::= \"\" | \"a\""));
  CHECK(eps.grammar == parse_bnf("s ::= \"\""));
  CHECK(check_property1(eps, ""));
  CHECK(check_property2(eps, ""));
}

TEST_CASE("property (2)") {
  SpecializationResult r = specialize(testing::kCalendarExemplarProgram, testing::calendar_grammar());
  CHECK(check_property2(r, testing::kCalendarExemplarProgram));

  SpecializationResult extra = r;
  extra.grammar = parse_bnf(std::string(testing::kCalendarExemplarGrammar) + " ;; date ::= \"Monday\"");
  CHECK_FALSE(check_property2(extra, testing::kCalendarExemplarProgram));
  CHECK(removable_alternatives(extra.grammar, testing::kCalendarExemplarProgram) == std::vector<AltRef>{{"date", 1}});

  SpecializationResult alias;
  alias.grammar = parse_bnf("s ::= \"a\" | a_alias ;; a_alias ::= \"a\"");
  CHECK(check_property1(alias, "a"));
  CHECK_FALSE(check_property2(alias, "a"));
  CHECK(removable_alternatives(alias.grammar, "a") == std::vector<AltRef>{{"s", 0}, {"s", 1}, {"a_alias", 0}});
}

TEST_CASE("every corpus program satisfies both properties") {
  int pairs = 0;
  for (const auto& name : testing::corpus_names()) {
    Corpus c = testing::load(name);
    for (const auto& ex : c.examples) {
      SpecializationResult r = specialize(ex.y_gold, c.grammar);
      CHECK_MESSAGE(check_property1(r, ex.y_gold), ex.y_gold);
      CHECK_MESSAGE(check_property2(r, ex.y_gold), ex.y_gold << "\n" << serialize(r.grammar));
      CHECK_MESSAGE(is_subset(r.grammar, c.grammar), ex.y_gold);
      CHECK(serialize(specialize(ex.y_gold, c.grammar).grammar) == serialize(r.grammar));
      ++pairs;
    }
  }
  CHECK(pairs >= 60);
}

TEST_CASE("canonicalize follows the full grammar's rule order") {
  Grammar full = parse_bnf("a ::= b c ;; b ::= \"b\" ;; c ::= \"c\" | \"d\"");
  Grammar sub = Grammar({{"a", {{{Symbol::nonterminal("b"), Repetition::kOnce}, {Symbol::nonterminal("c"), Repetition::kOnce}}}},
                         {"c", {{{Symbol::terminal("d"), Repetition::kOnce}}}},
                         {"b", {{{Symbol::terminal("b"), Repetition::kOnce}}}}},
                        "a");
  Grammar canon = canonicalize(sub, full);
  CHECK(serialize(canon) == "a ::= b c\nb ::= \"b\"\nc ::= \"d\"\n");
  CHECK(canonicalize(canon, full) == canon);
}

TEST_CASE("property: unambiguous members of random grammars specialize minimally") {
  std::mt19937 rng(5);
  int checked = 0;
  for (int i = 0; i < 80; ++i) {
    Grammar g = testing::random_grammar(rng);
    auto lang = testing::bounded_language(g, 7);
    EarleyGrammar eg(g, WhitespacePolicy::kExact);
    int taken = 0;
    for (const auto& y : lang) {
      if (taken++ == 6) break;
      SpecializeOptions opt;
      opt.policy = WhitespacePolicy::kExact;
      SpecializationResult r = specialize(y, g, opt);
      CHECK(check_property1(r, y, WhitespacePolicy::kExact));
      CHECK(is_subset(r.grammar, g));
      if (!parse(y, eg).ambiguous) {
        CHECK_MESSAGE(check_property2(r, y, WhitespacePolicy::kExact), serialize(g) << " on '" << y << "'");
        ++checked;
      }
    }
  }
  CHECK(checked > 50);
}
