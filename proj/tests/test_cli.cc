#include <sstream>

#include "doctest.h"
#include "grammar_steer/cli.h"
#include "json.hpp"
#include "test_util.h"

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "grammar-steer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = grammar_steer::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string golden(const std::string& name) { return testing::read_file(std::string(GRAMMAR_STEER_TEST_DIR) + "/golden/" + name); }
std::string golden_path(const std::string& name) { return std::string(GRAMMAR_STEER_TEST_DIR) + "/golden/" + name; }
const std::string kGrammar = testing::corpus_path("calendar/grammar.bnf");

}  // namespace

TEST_CASE("specialize with checks matches the golden grammar") {
  Run r = run({"specialize", kGrammar, golden_path("calendar_exemplar.txt"), "--check"});
  CHECK(r.code == 0);
  CHECK(r.out == golden("specialize_calendar.out"));
  CHECK(r.err.empty());
}

TEST_CASE("check on a non-member") {
  Run r = run({"check", kGrammar, golden_path("calendar_bad.txt")});
  CHECK(r.code == 1);
  CHECK(r.out == golden("check_bad.out"));
  auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("prefix").get<std::string>().ends_with("(attendee_? "));
  CHECK(run({"check", kGrammar, golden_path("calendar_exemplar.txt")}).code == 0);
}

TEST_CASE("usage errors") {
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  Run r = run({"specialize"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({"specialize", kGrammar}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("domain errors") {
  Run r = run({"parse", "/nonexistent/grammar.bnf"});
  CHECK(r.code == 1);
  CHECK(r.out.empty());
  CHECK_FALSE(r.err.empty());
  CHECK(run({"parse", kGrammar, "--text", "QueryEvent("}).code == 1);
}

TEST_CASE("every subcommand prints JSON with --json") {
  const std::string ex = golden_path("exemplars.jsonl");
  const std::vector<std::vector<std::string>> commands = {
      {"parse", kGrammar},
      {"parse", kGrammar, "--text", "QueryEvent((attendee_? Bob))"},
      {"validate", kGrammar},
      {"specialize", kGrammar, "--text", "QueryEvent((attendee_? Bob))", "--check"},
      {"metagrammar", kGrammar},
      {"prefix", kGrammar, "--text", "QueryEvent((attendee_? Jean's"},
      {"check", kGrammar, "--text", "QueryEvent((attendee_? Bob))"},
      {"prompt", "--grammar", kGrammar, "--exemplars", ex, "--query", "find Jean"},
      {"decode", "--grammar", kGrammar, "--exemplars", ex, "--query", "find Jean", "--mock", "adversarial", "--seed", "4"},
      {"eval", "--corpus", testing::corpus_path("calendar"), "--mock", "gold", "--methods", "standard,grammar+oracle"},
  };
  for (auto cmd : commands) {
    cmd.push_back("--json");
    Run r = run(cmd);
    CHECK_MESSAGE(r.code == 0, cmd[0] << ": " << r.err);
    CHECK_NOTHROW(nlohmann::json::parse(r.out));
  }
}

TEST_CASE("metagrammar membership") {
  Run r = run({"metagrammar", kGrammar, "--check", golden_path("specialize_calendar.out"), "--json"});
  CHECK(r.code == 0);
  CHECK(nlohmann::json::parse(r.out).at("member") == true);
  Run bad = run({"metagrammar", kGrammar, "--check", golden_path("calendar_bad.txt")});
  CHECK(bad.code == 1);
}

TEST_CASE("seeded mock runs are byte-reproducible") {
  const std::vector<std::string> ev = {"eval", "--corpus", testing::corpus_path("geoquery"), "--mock", "adversarial",
                                       "--rate", "0.6", "--seed", "9", "--json"};
  Run a = run(ev), b = run(ev);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  const std::vector<std::string> dec = {"decode", "--grammar", kGrammar, "--exemplars", golden_path("exemplars.jsonl"),
                                        "--query", "find Jean", "--mock", "oracle", "--seed", "2"};
  CHECK(run(dec).out == run(dec).out);
}

TEST_CASE("decode with a transcript") {
  Run r = run({"decode", "--mode", "standard", "--grammar", kGrammar, "--exemplars", golden_path("exemplars.jsonl"),
               "--query", "Add meeting with Jean's manager on Wednesday at 3PM", "--mock", "transcript", "--transcript",
               golden_path("manager_transcript.json")});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("program") == testing::kCalendarTestProgram);
  CHECK(j.at("trace").at("complete_calls") == 2);
  CHECK(j.at("valid") == true);
}
