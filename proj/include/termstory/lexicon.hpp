#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "termstory/term.hpp"

namespace termstory {

struct Frame {
  std::string name;
  std::string description;
  std::set<std::string> lexical_units;

  bool operator==(const Frame&) const = default;
};

struct NounEntry {
  std::string lemma;
  std::vector<std::string> description_image_refs;

  bool operator==(const NounEntry&) const = default;
};

/// Noun vocabulary plus verb frames, with the lexical-unit -> frame inversion.
/// Immutable once built.
class Lexicon {
 public:
  Lexicon() = default;
  /// Validates invariants (unique names, nonempty lexical units, lowercase
  /// single-token nouns) and builds the lexical-unit index.
  Lexicon(std::vector<Frame> frames, std::vector<NounEntry> nouns);

  const std::map<std::string, Frame>& frames() const { return frames_; }
  const std::map<std::string, NounEntry>& nouns() const { return nouns_; }
  const std::map<std::string, std::set<std::string>>& lu_index() const { return lu_index_; }

  const Frame* find_frame(std::string_view name) const;
  const NounEntry* find_noun(std::string_view lemma) const;
  bool has_noun(std::string_view lemma) const { return find_noun(lemma) != nullptr; }
  bool is_lexical_unit(std::string_view lemma) const;
  /// Frames evoked by `lemma`; empty when it is not a lexical unit.
  const std::set<std::string>& frames_for(std::string_view lemma) const;

  /// True when `term` names a noun or frame present here.
  bool contains(const Term& term) const;

 private:
  std::map<std::string, Frame> frames_;
  std::map<std::string, NounEntry> nouns_;
  std::map<std::string, std::set<std::string>> lu_index_;
};

/// Reads the tab-separated lexicon format:
///   F<TAB>name<TAB>description<TAB>lu1,lu2,...
///   N<TAB>lemma[<TAB>imgref1,imgref2,...]
/// Blank lines and lines starting with '#' are skipped. Errors carry the
/// 1-based line number.
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(std::istream& in, const std::string& source_name = "<lexicon>");

/// Nouns whose lemma contains `query` (case-insensitive), ordered by lemma
/// length then lexicographically. Throws on an empty/blank query.
std::vector<NounEntry> search_nouns(const Lexicon& lex, std::string_view query);

/// Frames with at least one lexical unit containing `query`
/// (case-insensitive), ordered by name length then lexicographically.
std::vector<Frame> search_frames(const Lexicon& lex, std::string_view query);

struct TermDescription {
  TermKind kind;
  /// Frame description text; empty for nouns.
  std::string text;
  /// Illustrative image references; empty for frames.
  std::vector<std::string> image_refs;
};

TermDescription describe_term(const Lexicon& lex, const Term& term);

}  // namespace termstory
