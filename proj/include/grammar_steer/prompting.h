#ifndef GRAMMAR_STEER_PROMPTING_H_
#define GRAMMAR_STEER_PROMPTING_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grammar_steer/grammar.h"

namespace grammar_steer {

class MissingGrammar : public Error {
 public:
  using Error::Error;
};

class MissingLinearization : public Error {
 public:
  using Error::Error;
};

class LabelNotFound : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ExemplarTriple {
  std::string x;
  std::optional<Grammar> spec_grammar;
  std::string y;
  std::optional<std::string> deriv_linearized;
};

enum class PromptMode { kStandard, kGrammar, kDerivationTree };

std::string_view to_string(PromptMode mode);
PromptMode prompt_mode_from_string(std::string_view s);

struct SectionLabels {
  std::string query = "query:";
  std::string rules = "BNF grammar rules:";
  std::string program = "program based on the BNF grammar rules:";
  std::string plain_program = "program:";  // standard and derivation-tree modes
  std::string begin_rules = "[BEGIN RULES]";
  std::string end_rules = "[END RULES]";

  static SectionLabels pddl();
};

struct PromptConfig {
  PromptMode mode = PromptMode::kGrammar;
  std::string instruction;  // empty: the default for the mode
  bool include_full_grammar = false;
  SectionLabels labels;
  std::string separator = "\n\n";  // between the instruction, the rules block and each example

  /// Label that introduces the program in this mode.
  const std::string& program_label() const;
};

std::string default_instruction(PromptMode mode);

/// Layout, per example: `query: x`, then (grammar mode) the rules label and the
/// serialized specialized grammar, then the program label and the program. The test
/// query is followed by the label the model should continue from.
std::string build_prompt(const PromptConfig& cfg, const std::vector<ExemplarTriple>& exemplars,
                         std::string_view x_test, const Grammar* full = nullptr);

struct SplitOutput {
  std::optional<std::string> grammar_text;
  std::string program_text;

  bool operator==(const SplitOutput&) const = default;
};

/// Throws LabelNotFound in grammar mode when the program label is missing.
SplitOutput split_output(std::string_view text, const PromptConfig& cfg);

/// Stop sequences for the grammar and the program continuations.
std::vector<std::string> grammar_stops(const PromptConfig& cfg);
std::vector<std::string> program_stops(const PromptConfig& cfg);

/// The text a prompt continues with once the grammar is known, ending at the program label.
std::string program_header(const PromptConfig& cfg, std::string_view grammar_text);

/// The program a bracketed derivation denotes: its quoted leaves, joined with token_separator.
std::string program_from_linearization(std::string_view linearized);

/// Whitespace-separated word count; a rough token estimate for cost accounting.
std::size_t estimate_tokens(std::string_view text);

PromptConfig prompt_config_from_json(std::string_view json_text);
std::string prompt_config_to_json(const PromptConfig& cfg);

/// JSON lines with {x, y, grammar?, deriv?}.
std::vector<ExemplarTriple> load_exemplars(const std::filesystem::path& path);
/// Fills missing grammars (canonicalized specialization) and linearizations from `full`.
void complete_exemplars(std::vector<ExemplarTriple>& exemplars, const Grammar& full);

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_PROMPTING_H_
