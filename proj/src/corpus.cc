#include "grammar_steer/corpus.h"

#include <fstream>
#include <sstream>

#include "grammar_steer/earley.h"
#include "json.hpp"

namespace grammar_steer {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<EvalExample> Corpus::split(const std::string& tag) const {
  std::vector<EvalExample> out;
  for (const auto& e : examples) {
    if (e.split_tag == tag) out.push_back(e);
  }
  return out;
}

Corpus load_corpus(const std::filesystem::path& dir, bool verify) {
  Corpus c;
  c.name = dir.filename().string();
  if (c.name.empty()) c.name = dir.parent_path().filename().string();
  try {
    c.grammar = parse_bnf(read_text_file(dir / "grammar.bnf"));
  } catch (const Error& e) {
    throw CorpusInvalid(c.name + ": " + e.what());
  }
  if (auto diags = validate(c.grammar); !diags.empty()) {
    throw CorpusInvalid(c.name + ": " + diags.front().message);
  }
  std::istringstream lines;
  try {
    lines.str(read_text_file(dir / "examples.jsonl"));
  } catch (const Error& e) {
    throw CorpusInvalid(c.name + ": " + e.what());
  }
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      c.examples.push_back({j.at("x").get<std::string>(), j.at("y").get<std::string>(), j.value("split", "test")});
    } catch (const nlohmann::json::exception& e) {
      throw CorpusInvalid(c.name + ": examples.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (verify) {
    EarleyGrammar eg(c.grammar);
    for (const auto& e : c.examples) {
      if (recognize(e.y_gold, eg) != Recognition::kComplete) {
        throw CorpusInvalid(c.name + ": gold program not in the grammar: " + e.y_gold);
      }
    }
  }
  return c;
}

}  // namespace grammar_steer
