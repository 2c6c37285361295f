#include <random>

#include "corpus_util.h"
#include "doctest.h"
#include "grammar_steer/earley.h"
#include "grammar_steer/prompting.h"
#include "grammar_steer/specialization.h"
#include "test_util.h"

using namespace grammar_steer;

namespace {

// The model output panel of the calendar figure, in the printed rule layout.
const char* kCalendarOutputPanel = R"txt(BNF grammar rules:
event ::= "CreateEvent(" constraint ")"
;;
constraint ::= "(&" constraint constraint ")"
| "(start_?" date time ")"
| "(attendee_?" attendee ")"
;;
date ::= "Wednesday"
;;
time ::= "NumberPM(3)"
;;
attendee ::=  "FindManager(" attendee ")" || "Jean"
program based on the BNF grammar rules:
CreateEvent((& (start_? Wednesday NumberPM(3)) (attendee_? FindManager(Jean))))
)txt";

std::size_t find_after(const std::string& s, const std::string& what, std::size_t from) {
  auto pos = s.find(what, from);
  REQUIRE_MESSAGE(pos != std::string::npos, what);
  return pos;
}

ExemplarTriple exemplar_for(const std::string& x, const std::string& y, const Grammar& full) {
  std::vector<ExemplarTriple> v{{x, std::nullopt, y, std::nullopt}};
  complete_exemplars(v, full);
  return v.front();
}

}  // namespace

TEST_CASE("grammar prompt layout over a GeoQuery exemplar") {
  Corpus geo = testing::load("geoquery");
  ExemplarTriple ex = exemplar_for("what states border hawaii ?", "answer(state(next_to_2(stateid('hawaii'))))", geo.grammar);
  PromptConfig cfg;
  const std::string p = build_prompt(cfg, {ex}, "how many major cities are in arizona ?");
  std::size_t q = find_after(p, "query: what states border hawaii ?", 0);
  std::size_t r = find_after(p, "BNF grammar rules:\n", q);
  std::size_t g = find_after(p, "STATENAME ::= \"hawaii\"", r);
  std::size_t y = find_after(p, "program based on the BNF grammar rules:\nanswer(state(next_to_2(stateid('hawaii'))))", g);
  find_after(p, "query: how many major cities are in arizona ?", y);
  const std::string tail = "query: how many major cities are in arizona ?\nBNF grammar rules:\n";
  CHECK(p.substr(p.size() - tail.size()) == tail);
  CHECK(p.rfind(default_instruction(PromptMode::kGrammar), 0) == 0);
  CHECK(build_prompt(cfg, {ex}, "how many major cities are in arizona ?") == p);
}

TEST_CASE("standard prompt with one exemplar") {
  PromptConfig cfg;
  cfg.mode = PromptMode::kStandard;
  cfg.instruction = "Translate.";
  const std::string p = build_prompt(cfg, {{"find Bob", std::nullopt, "QueryEvent((attendee_? Bob))", std::nullopt}}, "find Jean");
  CHECK(p == "Translate.\n\nquery: find Bob\nprogram:\nQueryEvent((attendee_? Bob))\n\nquery: find Jean\nprogram:\n");
}

TEST_CASE("the full grammar block precedes the exemplars") {
  Grammar full = testing::calendar_grammar();
  PromptConfig cfg;
  cfg.include_full_grammar = true;
  ExemplarTriple ex = exemplar_for("find the meeting on Wednesday with Bob and Carol", testing::kCalendarExemplarProgram, full);
  CHECK(*ex.spec_grammar == parse_bnf(testing::kCalendarExemplarGrammar));
  const std::string p = build_prompt(cfg, {ex}, "Add meeting with Jean's manager on Wednesday at 3PM", &full);
  std::size_t b = find_after(p, "[BEGIN RULES]\nevent ::= ", 0);
  std::size_t e = find_after(p, "[END RULES]", b);
  CHECK(e < p.find("query:"));
  CHECK_THROWS_AS(build_prompt(cfg, {ex}, "x"), MissingGrammar);
}

TEST_CASE("mode-required fields") {
  PromptConfig cfg;
  CHECK_THROWS_AS(build_prompt(cfg, {{"x", std::nullopt, "y", std::nullopt}}, "t"), MissingGrammar);
  cfg.mode = PromptMode::kDerivationTree;
  CHECK_THROWS_AS(build_prompt(cfg, {{"x", std::nullopt, "y", std::nullopt}}, "t"), MissingLinearization);
  CHECK_THROWS(build_prompt(cfg, {}, "t"));
}

TEST_CASE("derivation-tree prompts show linearized programs") {
  Grammar full = testing::calendar_grammar();
  PromptConfig cfg;
  cfg.mode = PromptMode::kDerivationTree;
  ExemplarTriple ex = exemplar_for("find Bob", "QueryEvent((attendee_? Bob))", full);
  const std::string p = build_prompt(cfg, {ex}, "find Jean");
  CHECK(p.find("program:\n[event \"QueryEvent(\" [constraint \"(attendee_?\" [attendee \"Bob\"] \")\"] \")\"]") != std::string::npos);
  CHECK(program_from_linearization(*ex.deriv_linearized) == "QueryEvent((attendee_? Bob))");
}

TEST_CASE("split_output on the calendar output panel") {
  PromptConfig cfg;
  SplitOutput s = split_output(kCalendarOutputPanel, cfg);
  REQUIRE(s.grammar_text);
  const std::string panel = kCalendarOutputPanel;
  const std::string rules_label = "BNF grammar rules:\n";
  const std::string want_grammar = panel.substr(rules_label.size(), panel.find("\nprogram based") - rules_label.size());
  CHECK(*s.grammar_text == want_grammar);
  CHECK(s.program_text == testing::kCalendarTestProgram);
  Grammar g = parse_bnf(*s.grammar_text);
  CHECK(g.rules().size() == 5);
  CHECK(recognize(s.program_text, g) == Recognition::kComplete);
}

TEST_CASE("split_output on the GeoQuery output") {
  PromptConfig cfg;
  const std::string text =
      "query ::= \"answer(\" answer_type \")\"\n;;\nanswer_type ::= num\n;;\nnum ::= \"count(\" city \")\"\n;;\n"
      "city ::= \"major(\" city \")\" | \"city(\" city \")\" | \"loc_2(\" state \")\"\n;;\n"
      "state ::= \"stateid('\" STATENAME \"')\"\n;;\nSTATENAME ::= \"arizona\"\n"
      "program based on the BNF grammar rules:\nanswer(count(major(city(loc_2(stateid('arizona'))))))\n\nquery: next";
  SplitOutput s = split_output(text, cfg);
  REQUIRE(s.grammar_text);
  Grammar g = parse_bnf(*s.grammar_text);
  CHECK(g.rules().size() == 6);
  CHECK(s.program_text == "answer(count(major(city(loc_2(stateid('arizona'))))))");
  CHECK(recognize(s.program_text, g) == Recognition::kComplete);
}

TEST_CASE("split_output in standard mode and without labels") {
  PromptConfig cfg;
  cfg.mode = PromptMode::kStandard;
  CHECK(split_output("answer(x)", cfg) == SplitOutput{std::nullopt, "answer(x)"});
  CHECK(split_output("program:\n answer(x)\nquery: y", cfg) == SplitOutput{std::nullopt, "answer(x)"});
  PromptConfig gcfg;
  CHECK_THROWS_AS(split_output("answer(x)", gcfg), LabelNotFound);
}

TEST_CASE("echoed exemplars split back exactly") {
  PromptConfig cfg;
  for (const auto& name : testing::corpus_names()) {
    Corpus c = testing::load(name);
    for (const auto& e : c.examples) {
      ExemplarTriple ex = exemplar_for(e.x, e.y_gold, c.grammar);
      std::string g = serialize(*ex.spec_grammar);
      g.pop_back();
      const std::string echo = cfg.labels.rules + "\n" + g + "\n" + cfg.labels.program + "\n" + e.y_gold + "\n\n";
      SplitOutput s = split_output(echo, cfg);
      CHECK(s.grammar_text == g);
      CHECK(s.program_text == e.y_gold);
      CHECK(program_from_linearization(*ex.deriv_linearized) == e.y_gold);
    }
  }
}

TEST_CASE("distinct exemplar lists give distinct prompts") {
  Corpus c = testing::load("calendar");
  std::vector<ExemplarTriple> pool;
  for (const auto& e : c.examples) pool.push_back(exemplar_for(e.x, e.y_gold, c.grammar));
  std::mt19937 rng(1);
  for (PromptMode mode : {PromptMode::kStandard, PromptMode::kGrammar, PromptMode::kDerivationTree}) {
    PromptConfig cfg;
    cfg.mode = mode;
    std::map<std::string, std::vector<std::size_t>> seen;
    for (int i = 0; i < 200; ++i) {
      std::vector<std::size_t> idx;
      const int n = std::uniform_int_distribution<int>(1, 4)(rng);
      for (int k = 0; k < n; ++k) idx.push_back(std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng));
      std::vector<ExemplarTriple> ex;
      for (auto k : idx) ex.push_back(pool[k]);
      auto [it, fresh] = seen.emplace(build_prompt(cfg, ex, "t"), idx);
      if (!fresh) CHECK(it->second == idx);
    }
  }
}

TEST_CASE("prompt config JSON") {
  PromptConfig cfg = prompt_config_from_json(R"({"mode": "standard", "preset": "pddl", "labels": {"query": "Question:"}})");
  CHECK(cfg.mode == PromptMode::kStandard);
  CHECK(cfg.labels.query == "Question:");
  CHECK(cfg.labels.rules == "DSL:");
  CHECK(cfg.program_label() == "A:");
  PromptConfig back = prompt_config_from_json(prompt_config_to_json(cfg));
  CHECK(prompt_config_to_json(back) == prompt_config_to_json(cfg));
  CHECK_THROWS_AS(prompt_config_from_json("{\"mode\": \"poetry\"}"), ConfigError);
  CHECK_THROWS_AS(prompt_config_from_json("{"), ConfigError);
}

TEST_CASE("token estimate") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("query: a b\nprogram:\n  c") == 5);
}

TEST_CASE("token separators") {
  CHECK(join_tokens({"QueryEvent(", "(&", "(start_?", "Wednesday", ")", ")"}) == "QueryEvent((& (start_? Wednesday))");
  CHECK(join_tokens({"stateid('", "texas", "')"}) == "stateid('texas')");
  CHECK(token_separator("", "a") == "");
  CHECK(token_separator("a ", "b") == "");
  CHECK(token_separator("ab", "cd") == " ");
  CHECK(token_separator("NumberAM(1", "2") == "");
  CHECK(token_separator("Bob", "Carol") == " ");
}
