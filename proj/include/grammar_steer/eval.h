#ifndef GRAMMAR_STEER_EVAL_H_
#define GRAMMAR_STEER_EVAL_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grammar_steer/corpus.h"
#include "grammar_steer/decoder.h"
#include "grammar_steer/lm.h"
#include "grammar_steer/metagrammar.h"
#include "grammar_steer/prompting.h"

namespace grammar_steer {

enum class Method {
  kStandard,
  kStandardFullConstraint,
  kDerivationTree,
  kGrammar,
  kGrammarSubsetConstraint,
  kGrammarBothConstraints,
  kGrammarOracle,  // the rules of the gold program stand in for the predicted ones
};

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);
const std::vector<Method>& all_methods();
/// Short description of the constraints a method applies.
std::string_view constraint_setting(Method m);
PromptMode prompt_mode(Method m);

/// True iff the programs are equal after whitespace normalization: runs collapse, and
/// spaces next to anything but two word characters are dropped. With `structural` and
/// both programs parsing under `g`, derivation trees are compared instead.
bool exact_match(std::string_view y_pred, std::string_view y_gold, const Grammar* g = nullptr,
                 bool structural = false);
std::string normalize_program(std::string_view y);

struct Prediction {
  std::optional<std::string> grammar_text;
  std::string program;
  DecodeTrace trace;
};

/// Everything a method needs besides the model.
struct Task {
  const Grammar* full = nullptr;
  const MetaGrammar* meta = nullptr;
  std::vector<ExemplarTriple> exemplars;  // complete (grammar and linearization filled in)
  PromptConfig prompt;                    // mode is overridden per method
  DecodeConfig decode;
};

/// Runs one method on one query. `y_gold` is needed by kGrammarOracle only.
Prediction predict(Method m, const Task& task, const std::string& x, LanguageModel& lm,
                   const std::optional<std::string>& y_gold = std::nullopt);

struct EvalConfig {
  PromptConfig prompt;
  DecodeConfig decode;
  std::string exemplar_split = "train";
  std::string eval_split = "test";
  std::size_t max_exemplars = 8;
  int workers = 4;
  bool structural_match = false;
};

struct MethodRow {
  std::string method;
  std::string constraint_setting;
  std::size_t examples = 0;
  double program_accuracy = 0;
  double validity = 0;  // fraction of programs in L(G)
  double mean_complete_calls = 0;
  double mean_score_calls = 0;
};

struct ExampleOutcome {
  std::string method;
  std::string x;
  std::string y_gold;
  std::string y_pred;
  std::optional<std::string> grammar_text;
  bool correct = false;
  bool valid = false;
  std::uint64_t complete_calls = 0;
  std::uint64_t score_calls = 0;
  std::string error;
};

struct EvalReport {
  std::string corpus;
  std::string model;
  std::vector<MethodRow> rows;
  std::vector<ExampleOutcome> outcomes;

  const MethodRow* row(Method m) const;
  std::string to_json() const;
  std::string to_table() const;
};

/// Throws CorpusInvalid when a gold program is not in L(G). Model failures other than
/// ProviderError are recorded per example as wrong answers.
EvalReport run_eval(const Corpus& corpus, const std::vector<Method>& methods, LanguageModel& lm,
                    const EvalConfig& cfg);

/// Gold answers for every example of `corpus`, keyed by query, for GoldLm.
std::map<std::string, GoldAnswer> gold_answers(const Corpus& corpus);

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_EVAL_H_
