#include "grammar_steer/cli.h"

#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "grammar_steer/corpus.h"
#include "grammar_steer/decoder.h"
#include "grammar_steer/earley.h"
#include "grammar_steer/eval.h"
#include "grammar_steer/lm.h"
#include "grammar_steer/metagrammar.h"
#include "grammar_steer/prompting.h"
#include "grammar_steer/specialization.h"
#include "json.hpp"

namespace grammar_steer {

namespace {

using nlohmann::json;

struct Options {
  bool json = false;
  std::uint64_t seed = 0;
  std::string cache_dir;
  std::string log_level = "warn";

  std::string grammar_file;
  std::string program_file;
  std::string program_text;
  bool check = false;
  bool keep_extended = false;
  std::string member_file;
  int max_repetitions = 8;

  std::string mode;
  std::string config_file;
  std::string exemplars_file;
  std::string query;
  bool full_grammar = false;
  std::string mock;
  std::string transcript_file;
  std::string constraint;
  double rate = 0.5;
  bool replay = false;

  std::string corpus_dir;
  std::string methods = "all";
  int workers = 4;
  bool structural = false;
};

std::string chomp(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::string program_arg(const Options& o) {
  if (!o.program_text.empty()) return o.program_text;
  if (o.program_file.empty()) throw CLI::ValidationError("program", "give a program file or --text");
  return chomp(read_text_file(o.program_file));
}

json prefix_json(const PrefixAnalysis& pa) {
  json j = {{"prefix", pa.prefix}, {"continuations", pa.continuations}};
  j["failure_index"] = pa.failure_index ? json(*pa.failure_index) : json(nullptr);
  return j;
}

std::string text_of(const Grammar& g) { return chomp(serialize(g)); }

PromptConfig load_prompt_config(const Options& o) {
  return o.config_file.empty() ? PromptConfig{} : prompt_config_from_json(read_text_file(o.config_file));
}

DecodeConfig load_decode_config(const Options& o) {
  DecodeConfig cfg = o.config_file.empty() ? DecodeConfig{} : decode_config_from_json(read_text_file(o.config_file));
  if (!cfg.seed) cfg.seed = o.seed;
  return cfg;
}

// Completions and scores for the transcript mock:
// {"completions": [...], "scores": {"continuation": value}}.
std::shared_ptr<ScriptedLm> load_transcript(const std::string& path) {
  try {
    json j = json::parse(read_text_file(path));
    auto lm = std::make_shared<ScriptedLm>(j.at("completions").get<std::vector<std::string>>(),
                                           j.value("logprobs", true));
    if (j.contains("scores")) {
      for (const auto& [k, v] : j.at("scores").items()) lm->set_score(k, v.get<double>());
    }
    return lm;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::shared_ptr<LanguageModel> make_model(const Options& o, const Grammar* g, const Corpus* corpus,
                                          const PromptConfig& pc) {
  std::shared_ptr<LanguageModel> lm;
  if (o.replay) {
    if (o.cache_dir.empty()) throw ConfigError("--replay needs --cache-dir");
    return std::make_shared<CachingLm>(nullptr, o.cache_dir);
  }
  auto gold = [&]() -> std::shared_ptr<LanguageModel> {
    if (!corpus) throw ConfigError("the gold mock needs a corpus");
    return std::make_shared<GoldLm>(pc, gold_answers(*corpus));
  };
  if (o.mock.empty() || o.mock == "http") {
    lm = std::make_shared<HttpLm>(HttpLmConfig::from_env());
  } else if (o.mock == "transcript" || o.mock == "scripted") {
    if (o.transcript_file.empty()) throw ConfigError("the transcript mock needs --transcript");
    lm = load_transcript(o.transcript_file);
  } else if (o.mock == "oracle") {
    lm = std::make_shared<GrammarOracleLm>(*g, o.seed);
  } else if (o.mock == "gold") {
    lm = gold();
  } else if (o.mock == "adversarial") {
    std::shared_ptr<LanguageModel> inner = corpus ? gold() : std::make_shared<GrammarOracleLm>(*g, o.seed);
    lm = std::make_shared<AdversarialLm>(inner, o.rate, o.seed);
  } else {
    throw ConfigError("unknown model '" + o.mock + "'");
  }
  if (!o.cache_dir.empty()) lm = std::make_shared<CachingLm>(lm, o.cache_dir);
  return lm;
}

int cmd_parse(const Options& o, std::ostream& out) {
  Grammar g = parse_bnf(read_text_file(o.grammar_file));
  if (o.program_file.empty() && o.program_text.empty()) {
    if (o.json) out << json{{"grammar", text_of(g)}, {"start", g.start()}}.dump(2) << '\n';
    else out << serialize(g);
    return 0;
  }
  ParseResult r = parse(program_arg(o), g);
  const std::string lin = linearize_derivation(r.tree);
  if (o.json) out << json{{"derivation", lin}, {"ambiguous", r.ambiguous}}.dump(2) << '\n';
  else out << lin << '\n';
  return 0;
}

int cmd_validate(const Options& o, std::ostream& out) {
  Grammar g = parse_bnf(read_text_file(o.grammar_file));
  const auto diags = validate(g);
  if (o.json) {
    json list = json::array();
    for (const auto& d : diags) {
      list.push_back({{"kind", std::string(to_string(d.kind))}, {"nonterminal", d.nonterminal}, {"message", d.message}});
    }
    out << json{{"valid", diags.empty()}, {"diagnostics", list}}.dump(2) << '\n';
  } else if (diags.empty()) {
    out << "ok: " << g.rules().size() << " rules, start " << g.start() << '\n';
  } else {
    for (const auto& d : diags) out << to_string(d.kind) << ": " << d.message << '\n';
  }
  return diags.empty() ? 0 : 1;
}

int cmd_specialize(const Options& o, std::ostream& out, std::ostream& err) {
  Grammar full = parse_bnf(read_text_file(o.grammar_file));
  const std::string y = program_arg(o);
  SpecializeOptions so;
  so.keep_extended = o.keep_extended;
  SpecializationResult r = specialize(y, full, so);
  bool ok = true;
  json checks;
  if (o.check) {
    const bool p1 = check_property1(r, y);
    const bool p2 = check_property2(r, y);
    const bool sub = is_subset(r.grammar, full);
    checks = {{"derivable", p1}, {"minimal", p2}, {"subset", sub}};
    ok = p1 && p2 && sub;
    if (!p1) err << "check failed: the program is not derivable from the specialized grammar\n";
    if (!p2) err << "check failed: some alternative can be removed\n";
    if (!sub) err << "check failed: not a subset of the full grammar\n";
  }
  if (o.json) {
    json j = {{"grammar", text_of(r.grammar)}};
    if (o.check) j["checks"] = checks;
    out << j.dump(2) << '\n';
  } else {
    out << serialize(r.grammar);
  }
  return ok ? 0 : 1;
}

int cmd_metagrammar(const Options& o, std::ostream& out) {
  Grammar full = parse_bnf(read_text_file(o.grammar_file));
  MetaGrammarOptions mo;
  mo.max_repetitions = o.max_repetitions;
  MetaGrammar meta = build_metagrammar(full, mo);
  if (!o.member_file.empty()) {
    const std::string text = read_text_file(o.member_file);
    const bool member = meta_accepts(meta, text);
    json j = {{"member", member}};
    if (member) {
      j["grammar"] = text_of(extract_grammar(text, meta));
    } else {
      j["analysis"] = prefix_json(longest_valid_prefix(text, *meta.compiled));
    }
    if (o.json) out << j.dump(2) << '\n';
    else out << (member ? "member\n" : "not a member\n");
    return member ? 0 : 1;
  }
  if (o.json) out << json{{"metagrammar", text_of(meta.grammar)}, {"max_repetitions", meta.max_repetitions}}.dump(2) << '\n';
  else out << serialize(meta.grammar);
  return 0;
}

int cmd_prefix(const Options& o, std::ostream& out) {
  Grammar g = parse_bnf(read_text_file(o.grammar_file));
  PrefixAnalysis pa = longest_valid_prefix(program_arg(o), g);
  if (o.json) {
    out << prefix_json(pa).dump(2) << '\n';
  } else {
    out << "prefix: " << pa.prefix << '\n';
    if (pa.failure_index) out << "failure at: " << *pa.failure_index << '\n';
    out << "continuations:";
    for (const auto& w : pa.continuations) out << ' ' << w;
    out << '\n';
  }
  return 0;
}

int cmd_check(const Options& o, std::ostream& out) {
  Grammar g = parse_bnf(read_text_file(o.grammar_file));
  const std::string y = program_arg(o);
  const Recognition r = recognize(y, g);
  if (r == Recognition::kComplete) {
    if (o.json) out << json{{"recognition", "complete"}}.dump(2) << '\n';
    else out << "complete\n";
    return 0;
  }
  json j = prefix_json(longest_valid_prefix(y, g));
  j["recognition"] = std::string(to_string(r));
  out << j.dump(2) << '\n';
  return 1;
}

std::vector<ExemplarTriple> exemplars_for(const Options& o, const Grammar& full) {
  if (o.exemplars_file.empty()) throw ConfigError("--exemplars is required");
  auto ex = load_exemplars(o.exemplars_file);
  complete_exemplars(ex, full);
  return ex;
}

int cmd_prompt(const Options& o, std::ostream& out) {
  Grammar full = parse_bnf(read_text_file(o.grammar_file));
  PromptConfig cfg = load_prompt_config(o);
  if (!o.mode.empty()) cfg.mode = prompt_mode_from_string(o.mode);
  if (o.full_grammar) cfg.include_full_grammar = true;
  const std::string p = build_prompt(cfg, exemplars_for(o, full), o.query, &full);
  if (o.json) out << json{{"prompt", p}, {"estimated_tokens", estimate_tokens(p)}}.dump(2) << '\n';
  else out << p;
  return 0;
}

Method decode_method(const std::string& mode, const std::string& constraint) {
  const PromptMode pm = prompt_mode_from_string(mode.empty() ? "grammar" : mode);
  if (pm == PromptMode::kDerivationTree) return Method::kDerivationTree;
  if (pm == PromptMode::kStandard) {
    if (constraint.empty() || constraint == "full") return Method::kStandardFullConstraint;
    if (constraint == "none") return Method::kStandard;
  } else {
    if (constraint.empty() || constraint == "both") return Method::kGrammarBothConstraints;
    if (constraint == "subset") return Method::kGrammarSubsetConstraint;
    if (constraint == "none") return Method::kGrammar;
  }
  throw ConfigError("constraint '" + constraint + "' does not apply to mode '" + mode + "'");
}

int cmd_decode(const Options& o, std::ostream& out) {
  Grammar full = parse_bnf(read_text_file(o.grammar_file));
  const MetaGrammar meta = build_metagrammar(full);
  Task task;
  task.full = &full;
  task.meta = &meta;
  task.prompt = load_prompt_config(o);
  task.decode = load_decode_config(o);
  if (o.full_grammar) task.prompt.include_full_grammar = true;
  task.exemplars = exemplars_for(o, full);
  auto lm = make_model(o, &full, nullptr, task.prompt);
  const Method m = decode_method(o.mode, o.constraint);
  Prediction p = predict(m, task, o.query, *lm);
  json j = {{"method", std::string(to_string(m))},
            {"program", p.program},
            {"valid", recognize(p.program, full) == Recognition::kComplete},
            {"trace", json::parse(trace_to_json(p.trace))}};
  if (p.grammar_text) j["grammar"] = *p.grammar_text;
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  Corpus corpus = load_corpus(o.corpus_dir);
  EvalConfig cfg;
  cfg.prompt = load_prompt_config(o);
  cfg.decode = load_decode_config(o);
  cfg.workers = o.workers;
  cfg.structural_match = o.structural;
  std::vector<Method> methods;
  if (o.methods == "all") {
    methods = all_methods();
  } else {
    std::stringstream ss(o.methods);
    for (std::string name; std::getline(ss, name, ',');) methods.push_back(method_from_string(name));
  }
  auto lm = make_model(o, &corpus.grammar, &corpus, cfg.prompt);
  EvalReport report = run_eval(corpus, methods, *lm, cfg);
  out << (o.json ? report.to_json() + "\n" : report.to_table());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Grammar-constrained few-shot semantic parsing toolkit", "grammar-steer"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--json", o.json, "Print machine-readable JSON");
  app.add_option("--seed", o.seed, "Seed for mock models");
  app.add_option("--cache-dir", o.cache_dir, "Record and replay model transcripts in this directory");
  app.add_option("--log-level", o.log_level, "quiet, warn or info")->check(CLI::IsMember({"quiet", "warn", "info"}));

  auto* parse_cmd = app.add_subcommand("parse", "Parse a grammar, or a program under a grammar");
  parse_cmd->add_option("grammar", o.grammar_file, "BNF grammar file")->required();
  parse_cmd->add_option("program", o.program_file, "Program file");
  parse_cmd->add_option("--text", o.program_text, "Program text");

  auto* validate_cmd = app.add_subcommand("validate", "Report undefined, unreachable and unproductive symbols");
  validate_cmd->add_option("grammar", o.grammar_file)->required();

  auto* spec_cmd = app.add_subcommand("specialize", "Print the minimal grammar a program uses");
  spec_cmd->add_option("grammar", o.grammar_file)->required();
  spec_cmd->add_option("program", o.program_file);
  spec_cmd->add_option("--text", o.program_text, "Program text");
  spec_cmd->add_flag("--check", o.check, "Verify derivability, minimality and the subset relation");
  spec_cmd->add_flag("--keep-extended", o.keep_extended, "Keep repeated items instead of expanding them");

  auto* meta_cmd = app.add_subcommand("metagrammar", "Print the metagrammar, or test a grammar text against it");
  meta_cmd->add_option("grammar", o.grammar_file)->required();
  meta_cmd->add_option("--check", o.member_file, "Grammar text file to test");
  meta_cmd->add_option("--max-repetitions", o.max_repetitions, "Largest expansion of a repeated item")
      ->check(CLI::PositiveNumber);

  auto* prefix_cmd = app.add_subcommand("prefix", "Longest valid prefix and its continuations");
  prefix_cmd->add_option("grammar", o.grammar_file)->required();
  prefix_cmd->add_option("program", o.program_file);
  prefix_cmd->add_option("--text", o.program_text, "Program text");

  auto* check_cmd = app.add_subcommand("check", "Exit 0 iff the program is in the language");
  check_cmd->add_option("grammar", o.grammar_file)->required();
  check_cmd->add_option("program", o.program_file);
  check_cmd->add_option("--text", o.program_text, "Program text");

  auto* prompt_cmd = app.add_subcommand("prompt", "Build a few-shot prompt");
  prompt_cmd->add_option("--grammar", o.grammar_file)->required();
  prompt_cmd->add_option("--exemplars", o.exemplars_file, "JSON lines with x, y, grammar?, deriv?")->required();
  prompt_cmd->add_option("--query", o.query)->required();
  prompt_cmd->add_option("--mode", o.mode, "standard, grammar or derivation_tree");
  prompt_cmd->add_option("--config", o.config_file, "JSON prompt configuration");
  prompt_cmd->add_flag("--full-grammar", o.full_grammar, "Include the full grammar before the examples");

  auto* decode_cmd = app.add_subcommand("decode", "Predict a program for one query");
  decode_cmd->add_option("--grammar", o.grammar_file)->required();
  decode_cmd->add_option("--exemplars", o.exemplars_file)->required();
  decode_cmd->add_option("--query", o.query)->required();
  decode_cmd->add_option("--mode", o.mode, "standard, grammar or derivation_tree");
  decode_cmd->add_option("--constraint", o.constraint, "none, full, subset or both");
  decode_cmd->add_option("--config", o.config_file, "JSON with prompt and decode sections");
  decode_cmd->add_option("--mock", o.mock, "transcript, oracle or adversarial (default: HTTP provider)");
  decode_cmd->add_option("--transcript", o.transcript_file, "Completions for the transcript mock");
  decode_cmd->add_option("--rate", o.rate, "Corruption rate of the adversarial mock")->check(CLI::Range(0.0, 1.0));
  decode_cmd->add_flag("--replay", o.replay, "Answer only from the cache");
  decode_cmd->add_flag("--full-grammar", o.full_grammar, "Include the full grammar in the prompt");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate methods over a corpus");
  eval_cmd->add_option("--corpus", o.corpus_dir, "Directory with grammar.bnf and examples.jsonl")->required();
  eval_cmd->add_option("--methods", o.methods, "Comma-separated methods, or all");
  eval_cmd->add_option("--mock", o.mock, "gold, oracle or adversarial (default: HTTP provider)");
  eval_cmd->add_option("--rate", o.rate, "Corruption rate of the adversarial mock")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--config", o.config_file, "JSON with prompt and decode sections");
  eval_cmd->add_option("--workers", o.workers)->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--structural", o.structural, "Compare derivation trees when both programs parse");
  eval_cmd->add_flag("--replay", o.replay, "Answer only from the cache");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*parse_cmd) return cmd_parse(o, out);
    if (*validate_cmd) return cmd_validate(o, out);
    if (*spec_cmd) return cmd_specialize(o, out, err);
    if (*meta_cmd) return cmd_metagrammar(o, out);
    if (*prefix_cmd) return cmd_prefix(o, out);
    if (*check_cmd) return cmd_check(o, out);
    if (*prompt_cmd) return cmd_prompt(o, out);
    if (*decode_cmd) return cmd_decode(o, out);
    if (*eval_cmd) return cmd_eval(o, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace grammar_steer
