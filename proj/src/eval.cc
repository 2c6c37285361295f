#include "grammar_steer/eval.h"

#include <atomic>
#include <cctype>
#include <iomanip>
#include <sstream>
#include <thread>

#include "grammar_steer/earley.h"
#include "grammar_steer/specialization.h"
#include "json.hpp"

namespace grammar_steer {

namespace {

struct MethodEntry {
  Method method;
  const char* name;
  const char* constraint;
  PromptMode mode;
};

const MethodEntry kMethods[] = {
    {Method::kStandard, "standard", "none", PromptMode::kStandard},
    {Method::kStandardFullConstraint, "standard+full-constraint", "y in L(G)", PromptMode::kStandard},
    {Method::kDerivationTree, "derivation-tree", "none", PromptMode::kDerivationTree},
    {Method::kGrammar, "grammar", "none", PromptMode::kGrammar},
    {Method::kGrammarSubsetConstraint, "grammar+subset-constraint", "G' subset of G", PromptMode::kGrammar},
    {Method::kGrammarBothConstraints, "grammar+both-constraints", "G' subset of G, y in L(G')", PromptMode::kGrammar},
    {Method::kGrammarOracle, "grammar+oracle", "G' = G[y_gold], y in L(G')", PromptMode::kGrammar},
};

const MethodEntry& entry(Method m) { return kMethods[static_cast<int>(m)]; }

bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

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

// The program a speculation tail carries after the program label, if any.
std::optional<std::string> program_in_tail(const std::string& tail, const PromptConfig& cfg) {
  const std::string label = "\n" + cfg.labels.program;
  if (tail.rfind(label, 0) != 0) return std::nullopt;
  return trim(tail.substr(label.size()));
}

}  // namespace

std::string_view to_string(Method m) { return entry(m).name; }

Method method_from_string(std::string_view s) {
  for (const auto& e : kMethods) {
    if (s == e.name) return e.method;
  }
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> v;
    for (const auto& e : kMethods) v.push_back(e.method);
    return v;
  }();
  return methods;
}

std::string_view constraint_setting(Method m) { return entry(m).constraint; }
PromptMode prompt_mode(Method m) { return entry(m).mode; }

std::string normalize_program(std::string_view y) {
  std::string out;
  bool pending = false;
  for (char c : y) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending = true;
      continue;
    }
    if (pending && !out.empty() && is_word(out.back()) && is_word(c)) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

bool exact_match(std::string_view y_pred, std::string_view y_gold, const Grammar* g, bool structural) {
  if (structural && g) {
    try {
      EarleyGrammar eg(*g);
      return parse(y_pred, eg).tree == parse(y_gold, eg).tree;
    } catch (const NoParse&) {
    }
  }
  return normalize_program(y_pred) == normalize_program(y_gold);
}

Prediction predict(Method m, const Task& task, const std::string& x, LanguageModel& lm,
                   const std::optional<std::string>& y_gold) {
  if (!task.full || !task.meta) throw Error("task needs a grammar and its metagrammar");
  PromptConfig cfg = task.prompt;
  cfg.mode = prompt_mode(m);
  const std::string prompt = build_prompt(cfg, task.exemplars, x, task.full);
  SpeculationOptions program_opts;
  program_opts.stop = program_stops(cfg);
  Prediction out;

  // Program phase of the grammar methods, once the rules are fixed.
  auto program_under = [&](const Grammar& rules, const std::string& rules_text, std::optional<std::string> first,
                           bool constrain) {
    const std::string p = prompt + program_header(cfg, rules_text);
    SpeculationOptions opts = program_opts;
    opts.first = std::move(first);
    if (!constrain) return standard_decode(p, lm, task.decode, opts);
    EarleyGrammar eg(rules);
    // A subset may keep the start rule but lose every way to finish it.
    if (eg.empty_language()) return constrained_decode(p, EarleyGrammar(*task.full), lm, task.decode, opts);
    return constrained_decode(p, eg, lm, task.decode, opts);
  };

  switch (m) {
    case Method::kStandard:
    case Method::kDerivationTree: {
      DecodeResult r = standard_decode(prompt, lm, task.decode, program_opts);
      out.trace = r.trace;
      out.program = split_output(r.text, cfg).program_text;
      if (m == Method::kDerivationTree && out.program.rfind('[', 0) == 0) {
        out.program = program_from_linearization(out.program);
      }
      break;
    }
    case Method::kStandardFullConstraint: {
      DecodeResult r = constrained_decode(prompt, EarleyGrammar(*task.full), lm, task.decode, program_opts);
      out.trace = r.trace;
      out.program = r.text;
      break;
    }
    case Method::kGrammar: {
      DecodeResult r = standard_decode(prompt, lm, task.decode, program_opts);
      out.trace = r.trace;
      try {
        SplitOutput s = split_output(r.text, cfg);
        out.grammar_text = s.grammar_text;
        out.program = s.program_text;
      } catch (const LabelNotFound&) {
        out.grammar_text = trim(r.text);
      }
      break;
    }
    case Method::kGrammarSubsetConstraint:
    case Method::kGrammarBothConstraints: {
      SpeculationOptions opts = program_opts;
      opts.cut = grammar_stops(cfg);
      GrammarDecodeResult gr = decode_grammar(prompt, *task.meta, lm, task.decode, opts);
      out.trace = gr.trace;
      out.grammar_text = gr.text;
      auto first = program_in_tail(gr.tail, cfg);
      DecodeResult r = program_under(gr.grammar, gr.text, first, m == Method::kGrammarBothConstraints);
      out.trace.append(r.trace);
      out.program = r.text;
      break;
    }
    case Method::kGrammarOracle: {
      if (!y_gold) throw Error("the oracle method needs the gold program");
      Grammar rules = canonicalize(specialize(*y_gold, *task.full).grammar, *task.full);
      out.grammar_text = grammar_text(rules);
      DecodeResult r = program_under(rules, *out.grammar_text, std::nullopt, true);
      out.trace = r.trace;
      out.program = r.text;
      break;
    }
  }
  return out;
}

std::map<std::string, GoldAnswer> gold_answers(const Corpus& corpus) {
  std::map<std::string, GoldAnswer> out;
  EarleyGrammar eg(corpus.grammar);
  for (const auto& e : corpus.examples) {
    GoldAnswer a;
    a.grammar_text = grammar_text(canonicalize(specialize(e.y_gold, corpus.grammar).grammar, corpus.grammar));
    a.program = e.y_gold;
    a.derivation = linearize_derivation(parse(e.y_gold, eg).tree);
    out.emplace(e.x, std::move(a));
  }
  return out;
}

const MethodRow* EvalReport::row(Method m) const {
  for (const auto& r : rows) {
    if (r.method == to_string(m)) return &r;
  }
  return nullptr;
}

EvalReport run_eval(const Corpus& corpus, const std::vector<Method>& methods, LanguageModel& lm,
                    const EvalConfig& cfg) {
  EarleyGrammar eg(corpus.grammar);
  for (const auto& e : corpus.examples) {
    if (recognize(e.y_gold, eg) != Recognition::kComplete) {
      throw CorpusInvalid(corpus.name + ": gold program is not in the grammar: " + e.y_gold);
    }
  }
  const MetaGrammar meta = build_metagrammar(corpus.grammar);
  Task task;
  task.full = &corpus.grammar;
  task.meta = &meta;
  task.prompt = cfg.prompt;
  task.decode = cfg.decode;
  for (const auto& e : corpus.split(cfg.exemplar_split)) {
    if (task.exemplars.size() >= cfg.max_exemplars) break;
    task.exemplars.push_back({e.x, std::nullopt, e.y_gold, std::nullopt});
  }
  if (task.exemplars.empty()) throw CorpusInvalid(corpus.name + ": no '" + cfg.exemplar_split + "' examples");
  complete_exemplars(task.exemplars, corpus.grammar);
  const std::vector<EvalExample> tests = corpus.split(cfg.eval_split);

  EvalReport report;
  report.corpus = corpus.name;
  report.model = lm.name();
  report.outcomes.resize(methods.size() * tests.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t job; (job = next++) < report.outcomes.size();) {
      const Method m = methods[job / tests.size()];
      const EvalExample& e = tests[job % tests.size()];
      ExampleOutcome& o = report.outcomes[job];
      o.method = to_string(m);
      o.x = e.x;
      o.y_gold = e.y_gold;
      try {
        Prediction p = predict(m, task, e.x, lm, e.y_gold);
        o.y_pred = p.program;
        o.grammar_text = p.grammar_text;
        o.complete_calls = p.trace.complete_calls;
        o.score_calls = p.trace.score_calls;
      } catch (const ProviderError&) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = report.outcomes.size();
        return;
      } catch (const Error& err) {
        o.error = err.what();
      }
      o.valid = recognize(o.y_pred, eg) == Recognition::kComplete;
      o.correct = exact_match(o.y_pred, e.y_gold, &corpus.grammar, cfg.structural_match);
    }
  };
  const int n = std::max(1, std::min<int>(cfg.workers, static_cast<int>(report.outcomes.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < methods.size(); ++i) {
    MethodRow row;
    row.method = to_string(methods[i]);
    row.constraint_setting = constraint_setting(methods[i]);
    row.examples = tests.size();
    for (std::size_t k = 0; k < tests.size(); ++k) {
      const ExampleOutcome& o = report.outcomes[i * tests.size() + k];
      row.program_accuracy += o.correct;
      row.validity += o.valid;
      row.mean_complete_calls += static_cast<double>(o.complete_calls);
      row.mean_score_calls += static_cast<double>(o.score_calls);
    }
    if (!tests.empty()) {
      const double n_tests = static_cast<double>(tests.size());
      row.program_accuracy /= n_tests;
      row.validity /= n_tests;
      row.mean_complete_calls /= n_tests;
      row.mean_score_calls /= n_tests;
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::json rows_j = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_j.push_back({{"method", r.method},
                      {"constraint_setting", r.constraint_setting},
                      {"examples", r.examples},
                      {"program_accuracy", r.program_accuracy},
                      {"validity", r.validity},
                      {"mean_complete_calls", r.mean_complete_calls},
                      {"mean_score_calls", r.mean_score_calls}});
  }
  nlohmann::json outcomes_j = nlohmann::json::array();
  for (const auto& o : outcomes) {
    nlohmann::json j = {{"method", o.method},     {"x", o.x},
                        {"y_gold", o.y_gold},     {"y_pred", o.y_pred},
                        {"correct", o.correct},   {"valid", o.valid},
                        {"complete_calls", o.complete_calls}, {"score_calls", o.score_calls}};
    if (o.grammar_text) j["grammar"] = *o.grammar_text;
    if (!o.error.empty()) j["error"] = o.error;
    outcomes_j.push_back(std::move(j));
  }
  return nlohmann::json{{"corpus", corpus},
                        {"model", model},
                        {"metric", "program accuracy (exact match); execution accuracy is not computed"},
                        {"rows", rows_j},
                        {"outcomes", outcomes_j}}
      .dump(2);
}

std::string EvalReport::to_table() const {
  const std::vector<std::string> head{"method", "constraints", "n", "accuracy", "validity", "calls", "scores"};
  std::vector<std::vector<std::string>> cells{head};
  auto fmt = [](double v, int prec) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v;
    return s.str();
  };
  for (const auto& r : rows) {
    cells.push_back({r.method, r.constraint_setting, std::to_string(r.examples), fmt(r.program_accuracy, 3),
                     fmt(r.validity, 3), fmt(r.mean_complete_calls, 2), fmt(r.mean_score_calls, 2)});
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream out;
  out << corpus << " (" << model << ")\n";
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const bool numeric = i >= 2;
      if (i) out << "  ";
      if (numeric) out << std::setw(static_cast<int>(width[i])) << std::right << row[i];
      else out << std::setw(static_cast<int>(width[i])) << std::left << row[i];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace grammar_steer
