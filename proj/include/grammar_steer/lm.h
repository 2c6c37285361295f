#ifndef GRAMMAR_STEER_LM_H_
#define GRAMMAR_STEER_LM_H_

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "grammar_steer/earley.h"
#include "grammar_steer/grammar.h"
#include "grammar_steer/prompting.h"

namespace grammar_steer {

/// Network, authentication or protocol failure of a remote provider.
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// The provider cannot do what was asked (for example, return log-probabilities).
class CapabilityUnavailable : public Error {
 public:
  using Error::Error;
};

struct Sampling {
  double temperature = 0.0;
  double presence_penalty = 0.0;
  double frequency_penalty = 0.0;
};

struct LmRequest {
  std::string prompt;
  std::vector<std::string> stop;
  int max_new_text = 512;  // provider tokens, or characters for the mocks
  Sampling sampling;
  std::optional<std::uint64_t> seed;
};

struct LmResponse {
  std::string text;
  std::optional<std::vector<std::pair<std::string, double>>> token_logprobs;
  std::uint64_t call_id = 0;
};

struct ScoreRequest {
  std::string prompt;
  std::string continuation;
};

struct Capabilities {
  bool logprobs = false;
};

/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string truncate_at_stop(std::string text, const std::vector<std::string>& stop);

/// Whitespace/punctuation split used by the mocks to count tokens.
std::vector<std::string> mock_tokens(std::string_view text);

inline constexpr std::size_t kEmbeddingDim = 512;

/// Character-trigram hashing vector (FNV-1a into kEmbeddingDim buckets), L2-normalized.
std::vector<double> trigram_embedding(std::string_view text);
double dot(const std::vector<double>& a, const std::vector<double>& b);

/// A language model session. Thread-safe for concurrent requests; counters are atomic.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  /// Throws BudgetExceeded past the call limit and ProviderError from remote providers.
  LmResponse complete(const LmRequest& req);
  /// Mean per-token log-probability of the continuation. Throws CapabilityUnavailable.
  double score(const ScoreRequest& req);
  std::vector<double> embed(std::string_view text) { return do_embed(text); }

  virtual Capabilities capabilities() const { return {}; }
  virtual std::string name() const = 0;

  std::uint64_t complete_calls() const { return complete_calls_.load(); }
  std::uint64_t score_calls() const { return score_calls_.load(); }
  void set_max_complete_calls(std::optional<std::uint64_t> limit) { max_calls_ = limit; }

 protected:
  /// Raw continuation; the base class applies stop sequences.
  virtual std::string do_complete(const LmRequest& req) = 0;
  virtual double do_score(const ScoreRequest& req);
  virtual std::vector<double> do_embed(std::string_view text) { return trigram_embedding(text); }

 private:
  std::atomic<std::uint64_t> complete_calls_{0};
  std::atomic<std::uint64_t> score_calls_{0};
  std::optional<std::uint64_t> max_calls_;
};

/// Replays completions in order (the last one repeats once the script runs out) and
/// answers scores from a table: (prompt, continuation), then continuation alone, then
/// a uniform -1.0 per token.
class ScriptedLm : public LanguageModel {
 public:
  explicit ScriptedLm(std::vector<std::string> completions = {}, bool logprobs = true);

  void push(std::string completion);
  void set_score(std::string continuation, double score);
  void set_score(std::string prompt, std::string continuation, double score);

  Capabilities capabilities() const override { return {logprobs_}; }
  std::string name() const override { return "scripted"; }
  const std::vector<LmRequest>& requests() const { return requests_; }
  const std::vector<ScoreRequest>& score_requests() const { return score_requests_; }

 protected:
  std::string do_complete(const LmRequest& req) override;
  double do_score(const ScoreRequest& req) override;

 private:
  std::mutex mu_;
  std::deque<std::string> script_;
  std::string last_;
  bool logprobs_;
  std::map<std::pair<std::string, std::string>, double> pair_scores_;
  std::map<std::string, double> scores_;
  std::vector<LmRequest> requests_;
  std::vector<ScoreRequest> score_requests_;
};

/// Emits random members of L(g): a random derivation whose rendered length stays within
/// the cap, seeded per request from (seed, prompt). Ignores the prompt otherwise.
class GrammarOracleLm : public LanguageModel {
 public:
  GrammarOracleLm(const Grammar& g, std::uint64_t seed, std::size_t length_cap = 120);

  std::string sample(std::mt19937_64& rng) const;
  std::string name() const override { return "oracle"; }

 protected:
  std::string do_complete(const LmRequest& req) override;
  double do_score(const ScoreRequest& req) override;

 private:
  std::string expand(int nt, std::size_t budget, std::mt19937_64& rng, std::vector<std::string>& out, int depth) const;

  EarleyGrammar g_;
  std::uint64_t seed_;
  std::size_t cap_;
};

/// What a perfect model would write for one query in each prompt mode.
struct GoldAnswer {
  std::string grammar_text;  // serialized specialized grammar
  std::string program;
  std::string derivation;    // linearized
};

/// Continues prompts built by build_prompt with the gold answer for their final query,
/// resuming after whatever partial answer the prompt already ends with.
class GoldLm : public LanguageModel {
 public:
  GoldLm(PromptConfig cfg, std::map<std::string, GoldAnswer> answers);

  Capabilities capabilities() const override { return {true}; }
  std::string name() const override { return "gold"; }

 protected:
  std::string do_complete(const LmRequest& req) override;
  double do_score(const ScoreRequest& req) override;

 private:
  std::string full_answer(const std::string& prompt, std::string* tail) const;

  PromptConfig cfg_;
  std::map<std::string, GoldAnswer> answers_;
};

/// Wraps another model and corrupts each token of its completions with probability
/// `rate`, deterministically per (seed, prompt): the token is replaced by junk, gets
/// junk inserted before it, is dropped or is doubled.
class AdversarialLm : public LanguageModel {
 public:
  AdversarialLm(std::shared_ptr<LanguageModel> inner, double rate, std::uint64_t seed);

  Capabilities capabilities() const override { return inner_->capabilities(); }
  std::string name() const override { return "adversarial"; }
  std::uint64_t corruptions() const { return corruptions_.load(); }

 protected:
  std::string do_complete(const LmRequest& req) override;
  double do_score(const ScoreRequest& req) override;

 private:
  std::shared_ptr<LanguageModel> inner_;
  double rate_;
  std::uint64_t seed_;
  std::atomic<std::uint64_t> corruptions_{0};
};

/// Settings for an OpenAI-compatible completions endpoint.
struct HttpLmConfig {
  std::string base_url = "https://api.openai.com";  // scheme://host[:port]
  std::string path_prefix = "/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model;
  bool logprobs = false;  // whether the provider can echo prompt log-probabilities
  int timeout_seconds = 60;

  /// GRAMMAR_STEER_API_BASE, GRAMMAR_STEER_API_PREFIX, GRAMMAR_STEER_API_KEY_ENV,
  /// GRAMMAR_STEER_MODEL, GRAMMAR_STEER_LOGPROBS.
  static HttpLmConfig from_env();
};

class HttpLm : public LanguageModel {
 public:
  explicit HttpLm(HttpLmConfig cfg);

  Capabilities capabilities() const override { return {cfg_.logprobs}; }
  std::string name() const override { return "http"; }

 protected:
  std::string do_complete(const LmRequest& req) override;
  double do_score(const ScoreRequest& req) override;

 private:
  std::string post(const std::string& body) const;

  HttpLmConfig cfg_;
};

/// Hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Records every request/response pair of the wrapped model as JSON lines in
/// `<dir>/transcripts.jsonl` and answers repeats from the file. Without an inner
/// model it replays only, and a miss is a ProviderError.
class CachingLm : public LanguageModel {
 public:
  CachingLm(std::shared_ptr<LanguageModel> inner, const std::filesystem::path& dir);

  Capabilities capabilities() const override;
  std::string name() const override;
  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }

  static std::string request_key(const LmRequest& req);
  static std::string request_key(const ScoreRequest& req);

 protected:
  std::string do_complete(const LmRequest& req) override;
  double do_score(const ScoreRequest& req) override;

 private:
  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& request_json, const std::string& response_json);

  std::shared_ptr<LanguageModel> inner_;
  std::filesystem::path file_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::string> entries_;  // key -> response JSON
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_LM_H_
