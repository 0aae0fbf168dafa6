#include "termstory/termex.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "termstory/error.hpp"
#include "termstory/text.hpp"

namespace termstory {

using nlohmann::json;

namespace {

const std::unordered_set<std::string_view> kDeterminers = {
    "the", "a", "an", "this", "that", "these", "those", "his", "her", "my", "your", "our", "their",
    "its", "some", "any", "every", "each", "no", "another", "all", "both", "many", "few", "several"};

const std::unordered_set<std::string_view> kSubjects = {"he", "she", "it", "they", "we", "i", "you", "who"};

const std::unordered_set<std::string_view> kVerbCues = {"to",    "will",  "would", "can",   "could", "should",
                                                        "may",   "might", "must",  "did",   "do",    "does",
                                                        "not",   "never", "then",  "didn't", "don't", "won't"};

const std::unordered_set<std::string_view> kOtherClosed = {
    "him",    "them",  "us",     "me",      "what",   "which",  "there",  "on",    "in",    "at",     "to",
    "of",     "for",   "with",   "from",    "by",     "into",   "onto",   "over",  "under", "up",     "down",
    "out",    "off",   "about",  "after",   "before", "through", "across", "around", "near", "behind", "and",
    "or",     "but",   "so",     "because", "then",   "when",   "while",  "as",    "if",    "than",   "is",
    "are",    "was",   "were",   "be",      "been",   "being",  "am",     "has",   "have",  "had",    "do",
    "does",   "did",   "will",   "would",   "can",    "could",  "should", "may",   "might", "must",   "not",
    "very",   "too",   "also",   "just",    "back",   "away",   "again",  "never", "all",   "both",   "himself",
    "herself", "themselves", "didn't", "don't", "won't", "wasn't"};

const std::unordered_map<std::string_view, std::string_view> kIrregularVerbs = {
    {"sat", "sit"},     {"went", "go"},       {"gone", "go"},      {"ran", "run"},       {"saw", "see"},
    {"seen", "see"},    {"took", "take"},     {"taken", "take"},   {"made", "make"},     {"got", "get"},
    {"came", "come"},   {"threw", "throw"},   {"thrown", "throw"}, {"ate", "eat"},       {"eaten", "eat"},
    {"drank", "drink"}, {"slept", "sleep"},   {"bought", "buy"},   {"found", "find"},    {"left", "leave"},
    {"rode", "ride"},   {"ridden", "ride"},   {"stood", "stand"},  {"sold", "sell"},     {"gave", "give"},
    {"given", "give"},  {"brought", "bring"}, {"caught", "catch"}, {"fell", "fall"},     {"fallen", "fall"},
    {"felt", "feel"},   {"kept", "keep"},     {"lay", "lie"},      {"sang", "sing"},     {"swam", "swim"},
    {"wrote", "write"}, {"drove", "drive"},   {"began", "begin"},  {"built", "build"},   {"told", "tell"},
    {"thought", "think"}, {"met", "meet"},    {"won", "win"},      {"lost", "lose"},     {"flew", "fly"},
    {"hid", "hide"},    {"held", "hold"},     {"heard", "hear"},   {"knew", "know"},     {"paid", "pay"},
    {"read", "read"},   {"said", "say"},      {"sent", "send"},    {"spent", "spend"},   {"taught", "teach"},
    {"woke", "wake"},   {"wore", "wear"},     {"climbed", "climb"}, {"dug", "dig"},      {"fed", "feed"}};

bool is_consonant(char c) { return std::string_view("aeiou").find(c) == std::string_view::npos && c >= 'a' && c <= 'z'; }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

void push_unique(std::vector<std::string>& v, std::string s) {
  if (!s.empty() && std::find(v.begin(), v.end(), s) == v.end()) v.push_back(std::move(s));
}

bool is_alpha_token(std::string_view t) {
  return !t.empty() && ((t[0] >= 'a' && t[0] <= 'z') || static_cast<unsigned char>(t[0]) >= 0x80);
}

}  // namespace

bool is_closed_class(std::string_view token) {
  return kDeterminers.count(token) || kSubjects.count(token) || kOtherClosed.count(token);
}

std::vector<std::string> verb_lemma_candidates(std::string_view token) {
  std::vector<std::string> out;
  const std::string w(token);
  if (auto it = kIrregularVerbs.find(w); it != kIrregularVerbs.end()) push_unique(out, std::string(it->second));
  push_unique(out, w);
  const auto stem = [&](std::size_t n) { return w.substr(0, w.size() - n); };
  if (ends_with(w, "ies")) push_unique(out, stem(3) + "y");
  if (ends_with(w, "es")) push_unique(out, stem(2));
  if (ends_with(w, "s") && !ends_with(w, "ss")) push_unique(out, stem(1));
  if (ends_with(w, "ied")) push_unique(out, stem(3) + "y");
  if (ends_with(w, "ed")) {
    const std::string s = stem(2);
    push_unique(out, s);
    push_unique(out, stem(1));
    if (s.size() >= 2 && s[s.size() - 1] == s[s.size() - 2] && is_consonant(s.back())) {
      push_unique(out, s.substr(0, s.size() - 1));
    }
  }
  if (ends_with(w, "ing")) {
    const std::string s = stem(3);
    push_unique(out, s);
    push_unique(out, s + "e");
    if (s.size() >= 2 && s[s.size() - 1] == s[s.size() - 2] && is_consonant(s.back())) {
      push_unique(out, s.substr(0, s.size() - 1));
    }
  }
  return out;
}

std::optional<std::string> verb_lemma(const Lexicon& lex, std::string_view token) {
  for (auto& c : verb_lemma_candidates(token))
    if (lex.is_lexical_unit(c)) return c;
  return std::nullopt;
}

std::optional<std::string> noun_lemma(const Lexicon& lex, std::string_view token) {
  const std::string w(token);
  if (lex.has_noun(w)) return w;
  std::vector<std::string> cands;
  if (ends_with(w, "ies")) cands.push_back(w.substr(0, w.size() - 3) + "y");
  if (ends_with(w, "es")) cands.push_back(w.substr(0, w.size() - 2));
  if (ends_with(w, "s") && !ends_with(w, "ss")) cands.push_back(w.substr(0, w.size() - 1));
  for (auto& c : cands)
    if (lex.has_noun(c)) return c;
  return std::nullopt;
}

std::string choose_frame(const Lexicon& lex, const std::set<std::string>& candidates) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "choose_frame: no candidates");
  const Frame* best = nullptr;
  for (const auto& name : candidates) {  // std::set iterates names in ascending order
    const Frame* f = lex.find_frame(name);
    if (!f) throw Error(ErrorCode::kNotFound, "frame '" + name + "' missing from lexicon");
    if (!best || f->lexical_units.size() < best->lexical_units.size()) best = f;
  }
  return best->name;
}

std::vector<PosTag> TablePosOracle::tag(std::span<const std::string> tokens) const {
  std::vector<PosTag> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = table_.find(t);
    out.push_back(it != table_.end() ? it->second : PosTag{Pos::kOther, t});
  }
  return out;
}

std::vector<PosTag> RulePosTagger::tag(std::span<const std::string> tokens) const {
  std::vector<PosTag> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    if (!is_alpha_token(tok) || is_closed_class(tok)) {
      out.push_back({Pos::kOther, tok});
      continue;
    }
    const auto verb = verb_lemma(lex_, tok);
    const auto noun = noun_lemma(lex_, tok);
    if (verb && !noun) {
      out.push_back({Pos::kVerb, *verb});
    } else if (noun && !verb) {
      out.push_back({Pos::kNoun, *noun});
    } else if (noun && verb) {
      const std::string_view prev = i > 0 ? std::string_view(tokens[i - 1]) : std::string_view();
      bool as_noun;
      if (kDeterminers.count(prev)) {
        as_noun = true;
      } else if (kSubjects.count(prev) || kVerbCues.count(prev)) {
        as_noun = false;
      } else {
        as_noun = *noun == tok;
      }
      out.push_back(as_noun ? PosTag{Pos::kNoun, *noun} : PosTag{Pos::kVerb, *verb});
    } else if (ends_with(tok, "ing") || ends_with(tok, "ed")) {
      out.push_back({Pos::kVerb, tok});
    } else {
      out.push_back({Pos::kOther, tok});
    }
  }
  return out;
}

std::vector<Term> extract_terms(const Lexicon& lex, std::span<const std::string> sentence, const PosOracle& pos,
                                std::size_t max_terms) {
  const auto tags = pos.tag(sentence);
  if (tags.size() != sentence.size()) {
    throw Error(ErrorCode::kInvalidArgument, "POS oracle returned " + std::to_string(tags.size()) + " tags for " +
                                                 std::to_string(sentence.size()) + " tokens");
  }
  std::vector<Term> out;
  auto emit = [&](Term t) {
    if (out.size() < max_terms && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
  };
  for (const auto& tag : tags) {
    if (tag.pos == Pos::kNoun) {
      if (lex.has_noun(tag.lemma)) emit(Term::noun(tag.lemma));
    } else if (tag.pos == Pos::kVerb) {
      auto lemma = lex.is_lexical_unit(tag.lemma) ? std::optional<std::string>(tag.lemma) : verb_lemma(lex, tag.lemma);
      if (lemma) emit(Term::frame(choose_frame(lex, lex.frames_for(*lemma))));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

bool TermSet::contains(const Term& t) const { return std::find(terms.begin(), terms.end(), t) != terms.end(); }

bool TermSet::same_terms(const TermSet& other) const {
  if (image_index != other.image_index) return false;
  return std::set<Term>(terms.begin(), terms.end()) == std::set<Term>(other.terms.begin(), other.terms.end());
}

TermSets empty_term_sets() {
  TermSets sets;
  for (int s = 0; s < kStorySentences; ++s) sets[s].image_index = s + 1;
  return sets;
}

void validate_term_sets(const TermSets& sets, std::size_t max_terms) {
  for (int s = 0; s < kStorySentences; ++s) {
    const auto& ts = sets[s];
    if (ts.image_index != s + 1) {
      throw Error(ErrorCode::kInvalidArgument, "term set " + std::to_string(s) + " has image index " +
                                                   std::to_string(ts.image_index));
    }
    if (ts.terms.size() > max_terms) {
      throw Error(ErrorCode::kOverflow, "image " + std::to_string(s + 1) + " has " + std::to_string(ts.terms.size()) +
                                            " terms (max " + std::to_string(max_terms) + ")");
    }
    if (std::set<Term>(ts.terms.begin(), ts.terms.end()).size() != ts.terms.size()) {
      throw Error(ErrorCode::kDuplicate, "image " + std::to_string(s + 1) + " has duplicate terms");
    }
  }
}

void StorySequence::validate(std::size_t max_tokens) const {
  if (sentences.size() != kStorySentences) {
    throw Error(ErrorCode::kInvalidArgument,
                "story has " + std::to_string(sentences.size()) + " sentences, expected 5");
  }
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto n = sentences[s].size();
    if (n == 0 || n > max_tokens) {
      throw Error(ErrorCode::kInvalidArgument, "sentence " + std::to_string(s + 1) + " has " + std::to_string(n) +
                                                   " tokens (allowed 1.." + std::to_string(max_tokens) + ")");
    }
  }
}

std::size_t StorySequence::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

std::string StorySequence::text() const {
  std::string out;
  for (const auto& s : sentences) {
    if (!out.empty()) out += ' ';
    out += detokenize(s);
  }
  return out;
}

CorpusBuildResult build_corpus(const Lexicon& lex, std::span<const StorySequence> stories, const PosOracle& pos,
                               const CorpusOptions& opts) {
  CorpusBuildResult result;
  for (std::size_t i = 0; i < stories.size(); ++i) {
    const auto& story = stories[i];
    try {
      story.validate(opts.max_sentence_tokens);
    } catch (const Error& e) {
      result.errors.push_back({i, e.what()});
      continue;
    }
    TermStoryPair pair{empty_term_sets(), story};
    bool any = false;
    for (int s = 0; s < kStorySentences; ++s) {
      pair.term_sets[s].terms = extract_terms(lex, story.sentences[s], pos, opts.max_terms_per_image);
      any = any || !pair.term_sets[s].terms.empty();
      for (const auto& t : pair.term_sets[s].terms) {
        if (!lex.contains(t)) throw Error(ErrorCode::kCorrupt, "extracted term '" + t.str() + "' not in lexicon");
      }
    }
    if (!any) {
      ++result.dropped;
      continue;
    }
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

// ---------------------------------------------------------------------------

json term_sets_to_json(const TermSets& sets) {
  json arr = json::array();
  for (const auto& ts : sets) {
    json row = json::array();
    for (const auto& t : ts.terms) row.push_back(t.str());
    arr.push_back(std::move(row));
  }
  return arr;
}

TermSets term_sets_from_json(const json& j) {
  const json& arr = j.is_object() ? j.at("terms") : j;
  if (!arr.is_array() || arr.size() != kStorySentences) {
    throw Error(ErrorCode::kParse, "terms must be an array of 5 arrays of term strings");
  }
  TermSets sets = empty_term_sets();
  for (int s = 0; s < kStorySentences; ++s) {
    if (!arr[s].is_array()) throw Error(ErrorCode::kParse, "terms[" + std::to_string(s) + "] must be an array");
    for (const auto& t : arr[s]) {
      if (!t.is_string()) throw Error(ErrorCode::kParse, "term must be a string");
      Term term = Term::parse(t.get<std::string>());
      if (!sets[s].contains(term)) sets[s].terms.push_back(std::move(term));
    }
  }
  return sets;
}

std::string pair_to_json_line(const TermStoryPair& pair) {
  nlohmann::ordered_json j;
  j["terms"] = term_sets_to_json(pair.term_sets);
  j["sentences"] = pair.story.sentences;
  return j.dump();
}

TermStoryPair pair_from_json(const json& j) {
  TermStoryPair pair;
  try {
    pair.term_sets = term_sets_from_json(j.at("terms"));
    pair.story.sentences = j.at("sentences").get<std::vector<std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("corpus record: ") + e.what());
  }
  return pair;
}

StorySequence story_from_json(const json& j) {
  StorySequence story;
  try {
    for (const auto& s : j.at("sentences")) {
      if (s.is_string()) {
        story.sentences.push_back(tokenize(s.get<std::string>()));
      } else {
        std::vector<std::string> toks;
        for (const auto& t : s) toks.push_back(to_lower(t.get<std::string>()));
        story.sentences.push_back(std::move(toks));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("story record: ") + e.what());
  }
  return story;
}

namespace {

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      f(j);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<StorySequence> read_stories(const std::filesystem::path& path) {
  std::vector<StorySequence> out;
  for_each_json_line(path, [&](const json& j) { out.push_back(story_from_json(j)); });
  return out;
}

std::vector<TermStoryPair> read_corpus(const std::filesystem::path& path) {
  std::vector<TermStoryPair> out;
  for_each_json_line(path, [&](const json& j) { out.push_back(pair_from_json(j)); });
  return out;
}

void write_corpus(const std::filesystem::path& path, std::span<const TermStoryPair> pairs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& p : pairs) out << pair_to_json_line(p) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace termstory
