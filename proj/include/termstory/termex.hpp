#pragma once

// Term extraction: noun terms and verb-frame terms from tokenised sentences,
// and the story -> (terms, story) corpus transform used to train the story
// generator without image-story pairs.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "termstory/lexicon.hpp"
#include "termstory/term.hpp"

namespace termstory {

inline constexpr int kStorySentences = 5;
inline constexpr std::size_t kDefaultMaxTermsPerImage = 8;
inline constexpr std::size_t kDefaultMaxSentenceTokens = 24;

// --- part-of-speech gate -----------------------------------------------------

enum class Pos { kNoun, kVerb, kOther };

struct PosTag {
  Pos pos = Pos::kOther;
  std::string lemma;

  bool operator==(const PosTag&) const = default;
};

/// Decides which tokens are nouns or verbs and supplies their lemmas.
class PosOracle {
 public:
  virtual ~PosOracle() = default;
  virtual std::vector<PosTag> tag(std::span<const std::string> tokens) const = 0;
};

/// Fixed token -> tag table; unlisted tokens are kOther with lemma = token.
class TablePosOracle final : public PosOracle {
 public:
  TablePosOracle() = default;
  explicit TablePosOracle(std::map<std::string, PosTag> table) : table_(std::move(table)) {}
  void set(std::string token, Pos pos, std::string lemma) { table_[std::move(token)] = {pos, std::move(lemma)}; }
  std::vector<PosTag> tag(std::span<const std::string> tokens) const override;

 private:
  std::map<std::string, PosTag> table_;
};

/// Rule-based tagger: closed-class word lists, lexicon membership, one token
/// of left context and inflection suffixes. Holds a reference to the lexicon.
class RulePosTagger final : public PosOracle {
 public:
  explicit RulePosTagger(const Lexicon& lex) : lex_(lex) {}
  std::vector<PosTag> tag(std::span<const std::string> tokens) const override;

 private:
  const Lexicon& lex_;
};

bool is_closed_class(std::string_view token);

/// Lemma candidates for an inflected verb, most likely first: irregular
/// table entry, the token itself, then "-s/-es/-ies", "-ed/-ied", "-ing"
/// strippings (with silent-e restoration and consonant undoubling).
std::vector<std::string> verb_lemma_candidates(std::string_view token);
/// First candidate that is a lexical unit in `lex`.
std::optional<std::string> verb_lemma(const Lexicon& lex, std::string_view token);
/// `token` if it is a lexicon noun, else its first singular form that is.
std::optional<std::string> noun_lemma(const Lexicon& lex, std::string_view token);

/// Among frames sharing a lexical unit: fewest lexical units, then smallest name.
std::string choose_frame(const Lexicon& lex, const std::set<std::string>& candidates);

/// Noun terms for tagged nouns in the lexicon and frame terms for tagged
/// verbs whose lemma is a lexical unit. Duplicates collapse to their first
/// occurrence; at most `max_terms` are kept, in sentence order.
std::vector<Term> extract_terms(const Lexicon& lex, std::span<const std::string> sentence, const PosOracle& pos,
                                std::size_t max_terms = kDefaultMaxTermsPerImage);

// --- corpus types --------------------------------------------------------------

/// Order-free term collection for one image slot (1..5). `terms` keeps
/// insertion order only for display.
struct TermSet {
  int image_index = 1;
  std::vector<Term> terms;

  bool contains(const Term& t) const;
  /// Set equality, ignoring order.
  bool same_terms(const TermSet& other) const;
  bool operator==(const TermSet&) const = default;
};

using TermSets = std::array<TermSet, kStorySentences>;

TermSets empty_term_sets();
/// Checks slot indices 1..5, no duplicates and the per-image bound.
void validate_term_sets(const TermSets& sets, std::size_t max_terms = kDefaultMaxTermsPerImage);

struct StorySequence {
  std::vector<std::vector<std::string>> sentences;

  /// Throws Error(kInvalidArgument) unless there are exactly five sentences of
  /// 1..max_tokens tokens each.
  void validate(std::size_t max_tokens = kDefaultMaxSentenceTokens) const;
  std::size_t token_count() const;
  std::string text() const;
  bool operator==(const StorySequence&) const = default;
};

struct TermStoryPair {
  TermSets term_sets;
  StorySequence story;

  bool operator==(const TermStoryPair&) const = default;
};

struct RecordError {
  std::size_t index;  ///< 0-based position in the input
  std::string message;
};

struct CorpusBuildResult {
  std::vector<TermStoryPair> pairs;
  std::size_t dropped = 0;  ///< valid stories that produced no terms at all
  std::vector<RecordError> errors;
};

struct CorpusOptions {
  std::size_t max_terms_per_image = kDefaultMaxTermsPerImage;
  std::size_t max_sentence_tokens = kDefaultMaxSentenceTokens;
};

/// One pair per valid story, in input order. Invalid stories are reported
/// in `errors`; stories whose five term sets are all empty are dropped.
CorpusBuildResult build_corpus(const Lexicon& lex, std::span<const StorySequence> stories, const PosOracle& pos,
                               const CorpusOptions& opts = {});

// --- JSON Lines formats --------------------------------------------------------

/// {"terms":[[...],...5],"sentences":[[...],...5]}, compact, "terms" first.
std::string pair_to_json_line(const TermStoryPair& pair);
TermStoryPair pair_from_json(const nlohmann::json& j);

/// Parses a story line {"sentences":[...]} where each sentence is either a
/// string (tokenised here) or an array of tokens. Sentence count is not checked.
StorySequence story_from_json(const nlohmann::json& j);

/// Terms as 5 arrays of term strings ("f:" prefix for frames); accepts either
/// the bare array or {"terms": [...]}.
TermSets term_sets_from_json(const nlohmann::json& j);
nlohmann::json term_sets_to_json(const TermSets& sets);

std::vector<StorySequence> read_stories(const std::filesystem::path& path);
std::vector<TermStoryPair> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const TermStoryPair> pairs);

}  // namespace termstory
