#ifndef GRAMMAR_STEER_METAGRAMMAR_H_
#define GRAMMAR_STEER_METAGRAMMAR_H_

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "grammar_steer/earley.h"
#include "grammar_steer/grammar.h"

namespace grammar_steer {

/// The full grammar has `x?`, `x*` or `x+` items and no repetition bound was given.
class RepetitionBoundRequired : public Error {
 public:
  using Error::Error;
};

struct MetaGrammarOptions {
  /// Largest number of copies a `*` or `+` item may be expanded to.
  std::optional<int> max_repetitions = 8;
};

/// A grammar whose members are the serialized subsets of a source grammar.
///
/// A member lists rule blocks in the source's definition order, one line per block,
/// each lhs at most once and the start rule always present. Within a block the
/// alternatives follow the source order; a plain alternative appears at most once,
/// an extended one as any number of its concretizations (or verbatim).
struct MetaGrammar {
  Grammar grammar;
  Grammar source;
  int max_repetitions = 0;
  std::shared_ptr<const EarleyGrammar> compiled;  // under WhitespacePolicy::kNormalized

  static constexpr WhitespacePolicy kPolicy = WhitespacePolicy::kNormalized;
};

MetaGrammar build_metagrammar(const Grammar& full, const MetaGrammarOptions& options = {});

/// The grammar denoted by a derivation under `meta` (rooted at its start symbol).
Grammar extract_grammar(const DerivationTree& meta_parse, const MetaGrammar& meta);
/// Parses `text` under `meta` first. Throws NoParse when it is not a member.
Grammar extract_grammar(std::string_view text, const MetaGrammar& meta);

bool meta_accepts(const MetaGrammar& meta, std::string_view text);

}  // namespace grammar_steer

#endif  // GRAMMAR_STEER_METAGRAMMAR_H_
