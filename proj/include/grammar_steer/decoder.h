#ifndef GRAMMAR_STEER_DECODER_H_
#define GRAMMAR_STEER_DECODER_H_

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "grammar_steer/earley.h"
#include "grammar_steer/lm.h"
#include "grammar_steer/metagrammar.h"

namespace grammar_steer {

/// Correction rounds ran out and the fallback is kFail.
class DecodeFailed : public Error {
 public:
  using Error::Error;
};

enum class Constraint { kNone, kFullGrammar, kPredictedGrammar };
enum class Fallback { kFail, kShortestCompletion };

struct DecodeConfig {
  int max_correction_rounds = 20;
  int prefilter_k = 16;
  Constraint constraint = Constraint::kFullGrammar;
  Fallback fallback = Fallback::kShortestCompletion;
  int max_new_text = 512;
  Sampling sampling;
  std::optional<std::uint64_t> seed;

  /// Throws ConfigError when a bound is below 1.
  void check() const;
};

DecodeConfig decode_config_from_json(std::string_view json_text);
std::string decode_config_to_json(const DecodeConfig& cfg);

enum class StepKind { kSpeculate, kCorrect, kScore, kFallback };
std::string_view to_string(StepKind kind);

struct DecodeStep {
  StepKind kind = StepKind::kSpeculate;
  std::size_t prefix_len = 0;       // committed text length when the step ran
  std::size_t candidate_count = 0;  // continuations (correct) or scored candidates (score)
  std::string chosen;
  std::vector<std::string> candidates;  // correct steps only
};

struct DecodeTrace {
  std::vector<DecodeStep> steps;
  std::uint64_t complete_calls = 0;
  std::uint64_t score_calls = 0;

  /// Correct steps that appended a terminal.
  std::size_t corrections() const;
  bool fell_back() const;
  /// Adds the counts and steps of `other`.
  void append(const DecodeTrace& other);
};

std::string trace_to_json(const DecodeTrace& trace);

/// How speculations are requested and cut.
struct SpeculationOptions {
  std::vector<std::string> stop;    // sent with every completion request
  std::vector<std::string> cut;     // applied locally; the text from the first cut on is kept as the tail
  std::optional<std::string> first; // first speculation to check instead of calling the model
};

struct DecodeResult {
  std::string text;
  DecodeTrace trace;
  /// What the accepted speculation held after a cut, when the text came from it unchanged.
  std::string tail;
};

/// Speculate, check, correct: returns a member of L(g) or throws DecodeFailed.
DecodeResult constrained_decode(const std::string& prompt, const EarleyGrammar& g, LanguageModel& lm,
                                const DecodeConfig& cfg, const SpeculationOptions& opts = {});
DecodeResult constrained_decode(const std::string& prompt, const Grammar& g, LanguageModel& lm,
                                const DecodeConfig& cfg, const SpeculationOptions& opts = {});

/// One completion, trimmed, without any check.
DecodeResult standard_decode(const std::string& prompt, LanguageModel& lm, const DecodeConfig& cfg = {},
                             const SpeculationOptions& opts = {});

struct GrammarDecodeResult {
  Grammar grammar;
  std::string text;
  DecodeTrace trace;
  std::string tail;
};

/// Decodes a grammar constrained to the metagrammar of `meta.source`.
GrammarDecodeResult decode_grammar(const std::string& prompt, const MetaGrammar& meta, LanguageModel& lm,
                                   const DecodeConfig& cfg, const SpeculationOptions& opts = {});
GrammarDecodeResult decode_grammar(const std::string& prompt, const Grammar& g_full, LanguageModel& lm,
                                   const DecodeConfig& cfg, const SpeculationOptions& opts = {});

/// Picks the next terminal: top prefilter_k candidates by embedding similarity of
/// prefix·w to the rejected prediction, then the best model score (ties: smallest
/// string). Without scores, the embedding ranking decides.
std::string select_candidate(const std::string& prompt, const std::string& prefix,
                             const std::set<std::string>& candidates, const std::string& bad_prediction,
                             LanguageModel& lm, const DecodeConfig& cfg, DecodeTrace* trace = nullptr,
                             WhitespacePolicy policy = WhitespacePolicy::kFlexible);

/// `prefix` followed by `w` as the policy would render it.
std::string append_terminal(const std::string& prefix, const std::string& w, WhitespacePolicy policy);

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_DECODER_H_
