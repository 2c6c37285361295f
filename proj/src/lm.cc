#include "grammar_steer/lm.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace grammar_steer {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mix(std::uint64_t seed, std::string_view text) {
  std::string s(reinterpret_cast<const char*>(&seed), sizeof seed);
  return fnv1a(text, fnv1a(s));
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

std::string strip_spaces(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

// Position in `full` just after its first n non-space characters.
std::size_t skip_nonspace(const std::string& full, std::size_t n) {
  std::size_t i = 0;
  while (i < full.size() && n > 0) {
    if (!std::isspace(static_cast<unsigned char>(full[i]))) --n;
    ++i;
  }
  return i;
}

}  // namespace

std::string truncate_at_stop(std::string text, const std::vector<std::string>& stop) {
  std::size_t end = text.size();
  for (const auto& s : stop) {
    if (s.empty()) continue;
    auto pos = text.find(s);
    if (pos != std::string::npos) end = std::min(end, pos);
  }
  text.resize(end);
  return text;
}

std::vector<std::string> mock_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    } else if (is_word_char(text[i])) {
      std::size_t j = i;
      while (j < text.size() && is_word_char(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
    } else {
      out.emplace_back(text.substr(i, 1));
      ++i;
    }
  }
  return out;
}

std::vector<double> trigram_embedding(std::string_view text) {
  std::vector<double> v(kEmbeddingDim, 0.0);
  if (text.empty()) return v;
  const std::string padded = "\x02\x02" + std::string(text) + "\x03\x03";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    v[fnv1a(std::string_view(padded).substr(i, 3)) % kEmbeddingDim] += 1.0;
  }
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) s += a[i] * b[i];
  return s;
}

// ---------------------------------------------------------------------------
// LanguageModel

LmResponse LanguageModel::complete(const LmRequest& req) {
  if (req.prompt.empty()) throw Error("completion request with an empty prompt");
  std::uint64_t id = complete_calls_.load();
  do {
    if (max_calls_ && id >= *max_calls_) throw BudgetExceeded("completion call limit reached");
  } while (!complete_calls_.compare_exchange_weak(id, id + 1));
  LmResponse r;
  r.call_id = id + 1;
  r.text = truncate_at_stop(do_complete(req), req.stop);
  return r;
}

double LanguageModel::score(const ScoreRequest& req) {
  if (req.continuation.empty()) throw Error("score request with an empty continuation");
  if (!capabilities().logprobs) throw CapabilityUnavailable(name() + " cannot score continuations");
  ++score_calls_;
  return do_score(req);
}

double LanguageModel::do_score(const ScoreRequest&) {
  throw CapabilityUnavailable(name() + " cannot score continuations");
}

// ---------------------------------------------------------------------------
// ScriptedLm

ScriptedLm::ScriptedLm(std::vector<std::string> completions, bool logprobs) : logprobs_(logprobs) {
  for (auto& c : completions) script_.push_back(std::move(c));
}

void ScriptedLm::push(std::string completion) {
  std::lock_guard lock(mu_);
  script_.push_back(std::move(completion));
}

void ScriptedLm::set_score(std::string continuation, double score) {
  std::lock_guard lock(mu_);
  scores_[std::move(continuation)] = score;
}

void ScriptedLm::set_score(std::string prompt, std::string continuation, double score) {
  std::lock_guard lock(mu_);
  pair_scores_[{std::move(prompt), std::move(continuation)}] = score;
}

std::string ScriptedLm::do_complete(const LmRequest& req) {
  std::lock_guard lock(mu_);
  requests_.push_back(req);
  if (!script_.empty()) {
    last_ = std::move(script_.front());
    script_.pop_front();
  }
  return last_;
}

double ScriptedLm::do_score(const ScoreRequest& req) {
  std::lock_guard lock(mu_);
  score_requests_.push_back(req);
  if (auto it = pair_scores_.find({req.prompt, req.continuation}); it != pair_scores_.end()) return it->second;
  if (auto it = scores_.find(req.continuation); it != scores_.end()) return it->second;
  return -1.0;
}

// ---------------------------------------------------------------------------
// GrammarOracleLm

GrammarOracleLm::GrammarOracleLm(const Grammar& g, std::uint64_t seed, std::size_t length_cap)
    : g_(g), seed_(seed), cap_(length_cap) {
  if (g_.empty_language()) throw EmptyLanguage("oracle model over an empty language");
}

std::string GrammarOracleLm::expand(int nt, std::size_t budget, std::mt19937_64& rng, std::vector<std::string>& out,
                                    int depth) const {
  const auto& prods = g_.productions();
  auto min_of = [&](int sym) { return sym < 0 ? g_.terminal_text(sym).size() : g_.min_yield(sym).length; };
  constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max() / 4;
  auto cost = [&](int p) {
    std::size_t c = 0;
    for (int sym : prods[static_cast<std::size_t>(p)].rhs) {
      if (sym >= 0 && !g_.min_yield(sym).finite) return kNever;
      c += min_of(sym);
    }
    return c;
  };
  const auto& options = g_.productions_of()[static_cast<std::size_t>(nt)];
  std::vector<int> fitting;
  int cheapest = -1;
  for (int p : options) {
    if (cheapest < 0 || cost(p) < cost(cheapest)) cheapest = p;
    if (cost(p) <= budget && cost(p) != kNever && depth < 60) fitting.push_back(p);
  }
  const int p = fitting.empty() ? cheapest
                                : fitting[std::uniform_int_distribution<std::size_t>(0, fitting.size() - 1)(rng)];
  const auto& rhs = prods[static_cast<std::size_t>(p)].rhs;
  std::size_t rest = cost(p);
  std::size_t left = budget > rest ? budget - rest : 0;
  for (int sym : rhs) {
    const std::size_t m = min_of(sym);
    if (sym < 0) {
      out.push_back(g_.terminal_text(sym));
      continue;
    }
    if (fitting.empty()) {
      // Cheapest completion only.
      for (int t : g_.min_yield(sym).terms) out.push_back(g_.terminal_text(t));
      continue;
    }
    const std::size_t extra = left == 0 ? 0 : std::uniform_int_distribution<std::size_t>(0, left)(rng);
    const std::size_t before = out.size();
    std::size_t used = 0;
    expand(sym, m + extra, rng, out, depth + 1);
    for (std::size_t k = before; k < out.size(); ++k) used += out[k].size();
    left = used > m + left ? 0 : m + left - used;
  }
  return {};
}

std::string GrammarOracleLm::sample(std::mt19937_64& rng) const {
  std::vector<std::string> tokens;
  expand(0, cap_, rng, tokens, 0);
  return join_tokens(tokens);
}

std::string GrammarOracleLm::do_complete(const LmRequest& req) {
  std::mt19937_64 rng(mix(seed_, req.prompt));
  return sample(rng);
}

double GrammarOracleLm::do_score(const ScoreRequest& req) {
  return -(1.0 + 0.05 * static_cast<double>(mock_tokens(req.continuation).size()));
}

// ---------------------------------------------------------------------------
// GoldLm

GoldLm::GoldLm(PromptConfig cfg, std::map<std::string, GoldAnswer> answers)
    : cfg_(std::move(cfg)), answers_(std::move(answers)) {}

std::string GoldLm::full_answer(const std::string& prompt, std::string* tail) const {
  const std::string marker = cfg_.labels.query + " ";
  std::size_t q = prompt.rfind("\n" + marker);
  q = q == std::string::npos ? (prompt.rfind(marker, 0) == 0 ? 0 : std::string::npos) : q + 1;
  if (q == std::string::npos) return {};
  const std::size_t line_end = prompt.find('\n', q);
  if (line_end == std::string::npos) return {};
  const std::string x = prompt.substr(q + marker.size(), line_end - q - marker.size());
  auto it = answers_.find(x);
  if (it == answers_.end()) return {};
  std::string rest = prompt.substr(line_end + 1);
  // The mode shows in the label the prompt ends with and in how the exemplars answer.
  PromptMode mode = PromptMode::kGrammar;
  std::string label = cfg_.labels.rules;
  if (rest.rfind(label + "\n", 0) != 0) {
    label = cfg_.labels.plain_program;
    if (rest.rfind(label + "\n", 0) != 0) return {};
    const bool trees = prompt.find("\n" + label + "\n[") != std::string::npos;
    mode = trees ? PromptMode::kDerivationTree : PromptMode::kStandard;
  }
  *tail = rest.substr(label.size() + 1);
  switch (mode) {
    case PromptMode::kGrammar:
      return it->second.grammar_text + "\n" + cfg_.labels.program + "\n" + it->second.program;
    case PromptMode::kStandard: return it->second.program;
    case PromptMode::kDerivationTree: return it->second.derivation;
  }
  return {};
}

std::string GoldLm::do_complete(const LmRequest& req) {
  std::string tail;
  const std::string full = full_answer(req.prompt, &tail);
  if (full.empty()) return {};
  const std::string a = strip_spaces(full);
  const std::string b = strip_spaces(tail);
  if (a.compare(0, b.size(), b) == 0) return full.substr(skip_nonspace(full, b.size()));
  // The partial answer left the gold path; resume inside the program if it is there.
  const std::string label = "\n" + cfg_.labels.program + "\n";
  auto at = tail.rfind(label);
  if (at != std::string::npos && full.rfind(label) != std::string::npos) {
    const std::string program = full.substr(full.rfind(label) + label.size());
    const std::string done = strip_spaces(tail.substr(at + label.size()));
    if (strip_spaces(program).compare(0, done.size(), done) == 0) return program.substr(skip_nonspace(program, done.size()));
  }
  return {};
}

double GoldLm::do_score(const ScoreRequest& req) {
  std::string tail;
  const std::string full = full_answer(req.prompt, &tail);
  const std::string want = strip_spaces(full);
  std::string got = strip_spaces(tail + req.continuation);
  if (!want.empty() && want.compare(0, got.size(), got) == 0) return -0.05;
  const std::string label = strip_spaces(cfg_.labels.program);
  auto at = got.rfind(label);
  auto wat = want.rfind(label);
  if (at != std::string::npos && wat != std::string::npos) {
    const std::string prog = want.substr(wat + label.size());
    const std::string done = got.substr(at + label.size());
    if (prog.compare(0, done.size(), done) == 0) return -0.05;
  }
  return -4.0 - 0.01 * static_cast<double>(req.continuation.size());
}

// ---------------------------------------------------------------------------
// AdversarialLm

AdversarialLm::AdversarialLm(std::shared_ptr<LanguageModel> inner, double rate, std::uint64_t seed)
    : inner_(std::move(inner)), rate_(rate), seed_(seed) {}

std::string AdversarialLm::do_complete(const LmRequest& req) {
  const std::string text = inner_->complete(req).text;
  std::mt19937_64 rng(mix(seed_, req.prompt));
  static const char* kJunk[] = {"ManagerOf(", "Friday", "Jean's", "xyzzy", "))", "(", "\"", " ::= ", " | ", "@", "42"};
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::string out;
  bool touched = false;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i + 1;
    if (std::isspace(static_cast<unsigned char>(text[i]))) {
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      out.append(text, i, j - i);
      i = j;
      continue;
    }
    if (is_word_char(text[i])) {
      while (j < text.size() && is_word_char(text[j])) ++j;
    }
    const std::string tok = text.substr(i, j - i);
    i = j;
    if (coin(rng) >= rate_) {
      out += tok;
      continue;
    }
    touched = true;
    const std::string junk = kJunk[std::uniform_int_distribution<std::size_t>(0, std::size(kJunk) - 1)(rng)];
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
      case 0: out += junk; break;
      case 1: out += junk + tok; break;
      case 2: break;
      default: out += tok + tok; break;
    }
  }
  if (touched) ++corruptions_;
  return out;
}

double AdversarialLm::do_score(const ScoreRequest& req) { return inner_->score(req); }

}  // namespace grammar_steer
