#ifndef GRAMMAR_STEER_CORPUS_H_
#define GRAMMAR_STEER_CORPUS_H_

#include <filesystem>
#include <string>
#include <vector>

#include "grammar_steer/grammar.h"

namespace grammar_steer {

class CorpusInvalid : public Error {
 public:
  using Error::Error;
};

struct EvalExample {
  std::string x;
  std::string y_gold;
  std::string split_tag;
};

/// A directory holding `grammar.bnf` and `examples.jsonl` (one {x, y, split} object per line).
struct Corpus {
  std::string name;
  Grammar grammar;
  std::vector<EvalExample> examples;

  std::vector<EvalExample> split(const std::string& tag) const;
};

/// Throws CorpusInvalid for unreadable files, malformed lines, or an invalid grammar.
/// With `verify`, every gold program must be a complete member of the grammar.
Corpus load_corpus(const std::filesystem::path& dir, bool verify = true);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_CORPUS_H_
