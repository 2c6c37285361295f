#include "grammar_steer/decoder.h"

#include <algorithm>

#include "grammar_steer/prompting.h"
#include "json.hpp"

namespace grammar_steer {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string trim_right(std::string_view s) {
  const auto e = s.find_last_not_of(" \t\r\n");
  return e == std::string_view::npos ? "" : std::string(s.substr(0, e + 1));
}

std::pair<std::string, std::string> cut_at(const std::string& text, const std::vector<std::string>& cut) {
  std::size_t end = text.size();
  for (const auto& c : cut) {
    if (c.empty()) continue;
    auto pos = text.find(c);
    if (pos != std::string::npos) end = std::min(end, pos);
  }
  return {text.substr(0, end), text.substr(end)};
}

const char* kConstraintNames[] = {"none", "full_grammar", "predicted_grammar"};
const char* kFallbackNames[] = {"fail", "shortest_completion"};

// Viable prefix of `chart`'s input, backed off to a terminal boundary.
void back_off(Chart& chart) {
  std::size_t pos = chart.size();
  while (pos > 0 && !chart.at_boundary(pos)) --pos;
  chart.truncate(pos);
}

bool viable(const EarleyGrammar& g, std::string_view text) {
  Chart chart(g);
  return chart.feed(text);
}

}  // namespace

void DecodeConfig::check() const {
  if (max_correction_rounds < 1) throw ConfigError("max_correction_rounds must be at least 1");
  if (prefilter_k < 1) throw ConfigError("prefilter_k must be at least 1");
}

DecodeConfig decode_config_from_json(std::string_view json_text) {
  DecodeConfig cfg;
  try {
    auto j = nlohmann::json::parse(json_text);
    if (j.contains("decode")) j = j.at("decode");
    cfg.max_correction_rounds = j.value("max_correction_rounds", cfg.max_correction_rounds);
    cfg.prefilter_k = j.value("prefilter_k", cfg.prefilter_k);
    cfg.max_new_text = j.value("max_new_text", cfg.max_new_text);
    if (j.contains("constraint")) {
      const std::string c = j.at("constraint");
      auto it = std::find(std::begin(kConstraintNames), std::end(kConstraintNames), c);
      if (it == std::end(kConstraintNames)) throw ConfigError("unknown constraint '" + c + "'");
      cfg.constraint = static_cast<Constraint>(it - std::begin(kConstraintNames));
    }
    if (j.contains("fallback")) {
      const std::string f = j.at("fallback");
      auto it = std::find(std::begin(kFallbackNames), std::end(kFallbackNames), f);
      if (it == std::end(kFallbackNames)) throw ConfigError("unknown fallback '" + f + "'");
      cfg.fallback = static_cast<Fallback>(it - std::begin(kFallbackNames));
    }
    cfg.sampling.temperature = j.value("temperature", cfg.sampling.temperature);
    cfg.sampling.presence_penalty = j.value("presence_penalty", cfg.sampling.presence_penalty);
    cfg.sampling.frequency_penalty = j.value("frequency_penalty", cfg.sampling.frequency_penalty);
    if (j.contains("seed") && !j.at("seed").is_null()) cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("decode config: ") + e.what());
  }
  cfg.check();
  return cfg;
}

std::string decode_config_to_json(const DecodeConfig& cfg) {
  nlohmann::json j = {{"max_correction_rounds", cfg.max_correction_rounds},
                      {"prefilter_k", cfg.prefilter_k},
                      {"constraint", kConstraintNames[static_cast<int>(cfg.constraint)]},
                      {"fallback", kFallbackNames[static_cast<int>(cfg.fallback)]},
                      {"max_new_text", cfg.max_new_text},
                      {"temperature", cfg.sampling.temperature},
                      {"presence_penalty", cfg.sampling.presence_penalty},
                      {"frequency_penalty", cfg.sampling.frequency_penalty}};
  j["seed"] = cfg.seed ? nlohmann::json(*cfg.seed) : nlohmann::json(nullptr);
  return j.dump(2);
}

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::kSpeculate: return "speculate";
    case StepKind::kCorrect: return "correct";
    case StepKind::kScore: return "score";
    case StepKind::kFallback: return "fallback";
  }
  return "?";
}

std::size_t DecodeTrace::corrections() const {
  return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const DecodeStep& s) {
    return s.kind == StepKind::kCorrect && !s.chosen.empty();
  }));
}

bool DecodeTrace::fell_back() const {
  return std::any_of(steps.begin(), steps.end(), [](const DecodeStep& s) { return s.kind == StepKind::kFallback; });
}

void DecodeTrace::append(const DecodeTrace& other) {
  steps.insert(steps.end(), other.steps.begin(), other.steps.end());
  complete_calls += other.complete_calls;
  score_calls += other.score_calls;
}

std::string trace_to_json(const DecodeTrace& trace) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : trace.steps) {
    nlohmann::json j = {{"kind", std::string(to_string(s.kind))},
                        {"prefix_len", s.prefix_len},
                        {"candidate_count", s.candidate_count},
                        {"chosen", s.chosen}};
    if (!s.candidates.empty()) j["candidates"] = s.candidates;
    steps.push_back(std::move(j));
  }
  return nlohmann::json{{"steps", steps}, {"complete_calls", trace.complete_calls}, {"score_calls", trace.score_calls}}
      .dump();
}

std::string append_terminal(const std::string& prefix, const std::string& w, WhitespacePolicy policy) {
  if (policy != WhitespacePolicy::kFlexible) return prefix + w;
  return prefix + std::string(token_separator(prefix, w)) + w;
}

std::string select_candidate(const std::string& prompt, const std::string& prefix,
                             const std::set<std::string>& candidates, const std::string& bad_prediction,
                             LanguageModel& lm, const DecodeConfig& cfg, DecodeTrace* trace,
                             WhitespacePolicy policy) {
  if (candidates.empty()) throw Error("select_candidate needs at least one candidate");
  if (candidates.size() == 1) return *candidates.begin();

  const auto bad = lm.embed(bad_prediction);
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& w : candidates) ranked.emplace_back(dot(lm.embed(append_terminal(prefix, w, policy)), bad), w);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  if (ranked.size() > static_cast<std::size_t>(cfg.prefilter_k)) ranked.resize(static_cast<std::size_t>(cfg.prefilter_k));

  std::vector<std::string> pool;
  for (const auto& [sim, w] : ranked) pool.push_back(w);
  std::sort(pool.begin(), pool.end());

  std::string chosen = ranked.front().second;
  std::size_t scored = 0;
  if (lm.capabilities().logprobs) {
    try {
      double best = 0;
      for (const auto& w : pool) {
        const std::string joined = append_terminal(prefix, w, policy);
        const std::string sep = joined.substr(prefix.size(), joined.size() - prefix.size() - w.size());
        const double s = lm.score({prompt + prefix + sep, w});
        if (trace) ++trace->score_calls;
        if (scored++ == 0 || s > best) {
          best = s;
          chosen = w;
        }
      }
    } catch (const CapabilityUnavailable&) {
      chosen = ranked.front().second;
    }
  }
  if (trace) trace->steps.push_back({StepKind::kScore, prefix.size(), scored, chosen, {}});
  return chosen;
}

DecodeResult constrained_decode(const std::string& prompt, const EarleyGrammar& g, LanguageModel& lm,
                                const DecodeConfig& cfg, const SpeculationOptions& opts) {
  cfg.check();
  if (g.empty_language()) throw EmptyLanguage("grammar generates no strings");
  const WhitespacePolicy policy = g.policy();
  DecodeResult out;
  DecodeTrace& trace = out.trace;

  // Returns the speculated continuation of `committed`, before any cut.
  auto speculate = [&](const std::string& committed, bool use_first) {
    std::string raw;
    if (use_first) {
      raw = *opts.first;
    } else {
      LmRequest req;
      req.prompt = prompt + committed;
      req.stop = opts.stop;
      req.max_new_text = cfg.max_new_text;
      req.sampling = cfg.sampling;
      req.seed = cfg.seed;
      raw = lm.complete(req).text;
      ++trace.complete_calls;
    }
    trace.steps.push_back({StepKind::kSpeculate, committed.size(), 0, {}, {}});
    return cut_at(raw, opts.cut);
  };

  auto [head, tail] = speculate("", opts.first.has_value());
  std::string candidate = trim(head);
  bool empty_speculation = candidate.empty();
  std::string committed;
  std::set<std::string> seen;
  int corrections = 0;

  while (true) {
    Chart chart(g);
    std::string prefix;
    if (seen.count(candidate)) {
      // The model repeated a rejected string: advance from what is already committed.
      chart.feed(committed);
      if (!chart.at_boundary()) back_off(chart);
    } else {
      const bool fed = chart.feed(candidate);
      if (fed && chart.complete()) {
        out.text = candidate;
        out.tail = tail;
        return out;
      }
      if (!fed || !chart.at_boundary()) back_off(chart);
    }
    prefix = chart.text();
    std::set<std::string> cands;
    // Only terminals that end on a boundary, so each correction commits whole terminals.
    for (const auto& w : chart.continuations()) {
      const std::string joined = append_terminal(prefix, w, policy);
      if (chart.feed(std::string_view(joined).substr(prefix.size())) && chart.at_boundary()) cands.insert(w);
      chart.truncate(prefix.size());
    }
    if (cands.empty()) {
      // Complete, and nothing may follow: the rest of the speculation was junk.
      trace.steps.push_back({StepKind::kCorrect, prefix.size(), 0, {}, {}});
      out.text = trim(prefix);
      return out;
    }

    if (empty_speculation || corrections >= cfg.max_correction_rounds) {
      if (cfg.fallback == Fallback::kFail) {
        throw DecodeFailed("no valid output after " + std::to_string(corrections) + " corrections");
      }
      std::string text = prefix;
      const auto pieces = shortest_completion_terminals(prefix, g);
      for (const auto& p : pieces) text = append_terminal(text, p, policy);
      if (recognize(text, g) != Recognition::kComplete) {
        text = prefix;
        for (const auto& p : pieces) text += p;
      }
      trace.steps.push_back({StepKind::kFallback, prefix.size(), pieces.size(), text.substr(std::min(prefix.size(), text.size())), {}});
      out.text = trim(text);
      return out;
    }

    const std::string w = select_candidate(prompt, prefix, cands, candidate, lm, cfg, &trace, policy);
    committed = append_terminal(prefix, w, policy);
    if (committed.size() != prefix.size() + w.size() && !viable(g, committed)) committed = prefix + w;
    trace.steps.push_back({StepKind::kCorrect, prefix.size(), cands.size(), w, {cands.begin(), cands.end()}});
    ++corrections;
    seen.insert(candidate);

    auto [next, next_tail] = speculate(committed, false);
    tail = next_tail;
    empty_speculation = trim(next).empty();
    candidate = trim_right(committed + next);
  }
}

DecodeResult constrained_decode(const std::string& prompt, const Grammar& g, LanguageModel& lm,
                                const DecodeConfig& cfg, const SpeculationOptions& opts) {
  return constrained_decode(prompt, EarleyGrammar(g), lm, cfg, opts);
}

DecodeResult standard_decode(const std::string& prompt, LanguageModel& lm, const DecodeConfig& cfg,
                             const SpeculationOptions& opts) {
  DecodeResult out;
  std::string raw;
  if (opts.first) {
    raw = *opts.first;
  } else {
    LmRequest req;
    req.prompt = prompt;
    req.stop = opts.stop;
    req.max_new_text = cfg.max_new_text;
    req.sampling = cfg.sampling;
    req.seed = cfg.seed;
    raw = lm.complete(req).text;
    out.trace.complete_calls = 1;
  }
  out.trace.steps.push_back({StepKind::kSpeculate, 0, 0, {}, {}});
  auto [head, tail] = cut_at(raw, opts.cut);
  out.text = trim(head);
  out.tail = tail;
  return out;
}

GrammarDecodeResult decode_grammar(const std::string& prompt, const MetaGrammar& meta, LanguageModel& lm,
                                   const DecodeConfig& cfg, const SpeculationOptions& opts) {
  DecodeResult r = constrained_decode(prompt, *meta.compiled, lm, cfg, opts);
  return {extract_grammar(r.text, meta), r.text, std::move(r.trace), std::move(r.tail)};
}

GrammarDecodeResult decode_grammar(const std::string& prompt, const Grammar& g_full, LanguageModel& lm,
                                   const DecodeConfig& cfg, const SpeculationOptions& opts) {
  return decode_grammar(prompt, build_metagrammar(g_full), lm, cfg, opts);
}

}  // namespace grammar_steer
