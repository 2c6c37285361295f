#include "grammar_steer/prompting.h"

#include <sstream>

#include "grammar_steer/corpus.h"
#include "grammar_steer/earley.h"
#include "grammar_steer/specialization.h"
#include "json.hpp"

namespace grammar_steer {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string grammar_text(const Grammar& g) {
  std::string s = serialize(g);
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

// Drops `label` when `s` starts with it (after whitespace).
std::string_view strip_label(std::string_view s, const std::string& label) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  s.remove_prefix(b);
  if (!label.empty() && s.substr(0, label.size()) == label) s.remove_prefix(label.size());
  return s;
}

// Text up to the start of a following example, if the model ran on.
std::string_view cut_run_on(std::string_view s, const PromptConfig& cfg) {
  std::size_t end = s.size();
  for (const std::string& stop : program_stops(cfg)) {
    auto lead = s.find_first_not_of(" \t\r\n");
    auto pos = s.find(stop, lead == std::string_view::npos ? 0 : lead);
    if (pos != std::string_view::npos) end = std::min(end, pos);
  }
  return s.substr(0, end);
}

}  // namespace

std::string_view to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::kStandard: return "standard";
    case PromptMode::kGrammar: return "grammar";
    case PromptMode::kDerivationTree: return "derivation_tree";
  }
  return "?";
}

PromptMode prompt_mode_from_string(std::string_view s) {
  if (s == "standard") return PromptMode::kStandard;
  if (s == "grammar") return PromptMode::kGrammar;
  if (s == "derivation_tree" || s == "derivation-tree") return PromptMode::kDerivationTree;
  throw ConfigError("unknown prompt mode '" + std::string(s) + "'");
}

SectionLabels SectionLabels::pddl() {
  SectionLabels l;
  l.query = "Q:";
  l.rules = "DSL:";
  l.program = "A:";
  l.plain_program = "A:";
  return l;
}

const std::string& PromptConfig::program_label() const {
  return mode == PromptMode::kGrammar ? labels.program : labels.plain_program;
}

std::string default_instruction(PromptMode mode) {
  switch (mode) {
    case PromptMode::kStandard:
      return "Translate each request into a program of the target language. Answer the last request the same way.";
    case PromptMode::kGrammar:
      return "Translate each request into a program of the target language. Every example first lists the BNF "
             "rules its program needs and then the program, which uses no other rules. For the last request, "
             "write the rules first and the program after them.";
    case PromptMode::kDerivationTree:
      return "Translate each request into the bracketed derivation tree of a program of the target language. "
             "Answer the last request the same way.";
  }
  return "";
}

std::string build_prompt(const PromptConfig& cfg, const std::vector<ExemplarTriple>& exemplars,
                         std::string_view x_test, const Grammar* full) {
  if (exemplars.empty()) throw Error("build_prompt needs at least one exemplar");
  const SectionLabels& l = cfg.labels;
  std::string out = cfg.instruction.empty() ? default_instruction(cfg.mode) : cfg.instruction;
  if (cfg.include_full_grammar) {
    if (!full) throw MissingGrammar("include_full_grammar is set but no grammar was given");
    out += cfg.separator + l.begin_rules + "\n" + grammar_text(*full) + "\n" + l.end_rules;
  }
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    const ExemplarTriple& ex = exemplars[i];
    out += cfg.separator + l.query + " " + ex.x + "\n";
    switch (cfg.mode) {
      case PromptMode::kStandard:
        out += l.plain_program + "\n" + ex.y;
        break;
      case PromptMode::kGrammar:
        if (!ex.spec_grammar) throw MissingGrammar("exemplar " + std::to_string(i) + " has no grammar");
        out += l.rules + "\n" + grammar_text(*ex.spec_grammar) + "\n" + l.program + "\n" + ex.y;
        break;
      case PromptMode::kDerivationTree:
        if (!ex.deriv_linearized) throw MissingLinearization("exemplar " + std::to_string(i) + " has no derivation");
        out += l.plain_program + "\n" + *ex.deriv_linearized;
        break;
    }
  }
  out += cfg.separator + l.query + " " + std::string(x_test) + "\n";
  out += (cfg.mode == PromptMode::kGrammar ? l.rules : l.plain_program) + "\n";
  return out;
}

std::string program_header(const PromptConfig& cfg, std::string_view grammar) {
  return trim(grammar) + "\n" + cfg.labels.program + "\n";
}

SplitOutput split_output(std::string_view text, const PromptConfig& cfg) {
  SplitOutput out;
  if (cfg.mode != PromptMode::kGrammar) {
    out.program_text = trim(cut_run_on(strip_label(text, cfg.labels.plain_program), cfg));
    return out;
  }
  std::string_view rest = strip_label(text, cfg.labels.rules);
  const auto pos = rest.find(cfg.labels.program);
  if (pos == std::string_view::npos) throw LabelNotFound("no '" + cfg.labels.program + "' label in the output");
  out.grammar_text = trim(rest.substr(0, pos));
  out.program_text = trim(cut_run_on(rest.substr(pos + cfg.labels.program.size()), cfg));
  return out;
}

std::vector<std::string> grammar_stops(const PromptConfig& cfg) {
  return {"\n" + cfg.labels.program, "\n" + cfg.labels.query};
}

std::vector<std::string> program_stops(const PromptConfig& cfg) {
  std::vector<std::string> stops{"\n" + cfg.labels.query};
  if (cfg.separator.find_first_not_of('\n') == std::string::npos && cfg.separator.size() > 1) {
    stops.push_back(cfg.separator);
  }
  return stops;
}

std::string program_from_linearization(std::string_view s) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '"') continue;
    std::string tok;
    for (++i; i < s.size() && s[i] != '"'; ++i) {
      if (s[i] == '\\' && i + 1 < s.size()) {
        ++i;
        tok += s[i] == 'n' ? '\n' : s[i] == 't' ? '\t' : s[i] == 'r' ? '\r' : s[i];
      } else {
        tok += s[i];
      }
    }
    if (!tok.empty()) tokens.push_back(std::move(tok));
  }
  return join_tokens(tokens);
}

std::size_t estimate_tokens(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

PromptConfig prompt_config_from_json(std::string_view json_text) {
  PromptConfig cfg;
  try {
    auto j = nlohmann::json::parse(json_text);
    if (j.contains("prompt")) j = j.at("prompt");
    if (j.contains("mode")) cfg.mode = prompt_mode_from_string(j.at("mode").get<std::string>());
    cfg.instruction = j.value("instruction", cfg.instruction);
    cfg.include_full_grammar = j.value("include_full_grammar", cfg.include_full_grammar);
    cfg.separator = j.value("separator", cfg.separator);
    if (j.value("preset", std::string()) == "pddl") cfg.labels = SectionLabels::pddl();
    if (j.contains("labels")) {
      const auto& l = j.at("labels");
      cfg.labels.query = l.value("query", cfg.labels.query);
      cfg.labels.rules = l.value("rules", cfg.labels.rules);
      cfg.labels.program = l.value("program", cfg.labels.program);
      cfg.labels.plain_program = l.value("plain_program", cfg.labels.plain_program);
      cfg.labels.begin_rules = l.value("begin_rules", cfg.labels.begin_rules);
      cfg.labels.end_rules = l.value("end_rules", cfg.labels.end_rules);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("prompt config: ") + e.what());
  }
  return cfg;
}

std::string prompt_config_to_json(const PromptConfig& cfg) {
  nlohmann::json j;
  j["mode"] = std::string(to_string(cfg.mode));
  j["instruction"] = cfg.instruction;
  j["include_full_grammar"] = cfg.include_full_grammar;
  j["separator"] = cfg.separator;
  j["labels"] = {{"query", cfg.labels.query},
                 {"rules", cfg.labels.rules},
                 {"program", cfg.labels.program},
                 {"plain_program", cfg.labels.plain_program},
                 {"begin_rules", cfg.labels.begin_rules},
                 {"end_rules", cfg.labels.end_rules}};
  return j.dump(2);
}

std::vector<ExemplarTriple> load_exemplars(const std::filesystem::path& path) {
  std::istringstream lines(read_text_file(path));
  std::vector<ExemplarTriple> out;
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ExemplarTriple ex;
      ex.x = j.at("x").get<std::string>();
      ex.y = j.at("y").get<std::string>();
      if (j.contains("grammar")) ex.spec_grammar = parse_bnf(j.at("grammar").get<std::string>());
      if (j.contains("deriv")) ex.deriv_linearized = j.at("deriv").get<std::string>();
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void complete_exemplars(std::vector<ExemplarTriple>& exemplars, const Grammar& full) {
  EarleyGrammar eg(full);
  for (auto& ex : exemplars) {
    if (ex.spec_grammar && ex.deriv_linearized) continue;
    ParseResult parsed = parse(ex.y, eg);
    if (!ex.spec_grammar) ex.spec_grammar = canonicalize(specialize(ex.y, full).grammar, full);
    if (!ex.deriv_linearized) ex.deriv_linearized = linearize_derivation(parsed.tree);
  }
}

}  // namespace grammar_steer
