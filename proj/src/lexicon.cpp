#include "termstory/lexicon.hpp"

#include <algorithm>
#include <fstream>

#include "termstory/error.hpp"
#include "termstory/text.hpp"

namespace termstory {

std::string Term::str() const { return is_frame() ? std::string(kFramePrefix) + value : value; }

Term Term::parse(std::string_view text) {
  const std::string t = trim(text);
  if (t.rfind(kFramePrefix, 0) == 0) {
    std::string name = t.substr(kFramePrefix.size());
    if (name.empty()) throw Error(ErrorCode::kInvalidArgument, "empty frame term");
    return Term::frame(std::move(name));
  }
  if (t.empty()) throw Error(ErrorCode::kInvalidArgument, "empty term");
  return Term::noun(to_lower(t));
}

namespace {

const std::set<std::string> kNoFrames;

struct ShortFirst {
  bool operator()(const std::string& a, const std::string& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

}  // namespace

Lexicon::Lexicon(std::vector<Frame> frames, std::vector<NounEntry> nouns) {
  for (auto& f : frames) {
    if (f.name.empty()) throw Error(ErrorCode::kInvalidArgument, "frame with empty name");
    if (f.lexical_units.empty()) throw Error(ErrorCode::kInvalidArgument, "frame '" + f.name + "' has no lexical units");
    std::set<std::string> lus;
    for (const auto& lu : f.lexical_units) {
      const std::string l = to_lower(trim(lu));
      if (l.empty()) throw Error(ErrorCode::kInvalidArgument, "frame '" + f.name + "' has an empty lexical unit");
      lus.insert(l);
    }
    f.lexical_units = std::move(lus);
    const std::string name = f.name;
    if (!frames_.emplace(name, std::move(f)).second) {
      throw Error(ErrorCode::kDuplicate, "duplicate frame name '" + name + "'");
    }
  }
  for (auto& n : nouns) {
    if (n.lemma.empty()) throw Error(ErrorCode::kInvalidArgument, "noun with empty lemma");
    if (n.lemma != to_lower(n.lemma) || std::any_of(n.lemma.begin(), n.lemma.end(), is_space)) {
      throw Error(ErrorCode::kInvalidArgument, "noun lemma '" + n.lemma + "' must be lowercase without whitespace");
    }
    const std::string lemma = n.lemma;
    if (!nouns_.emplace(lemma, std::move(n)).second) {
      throw Error(ErrorCode::kDuplicate, "duplicate noun '" + lemma + "'");
    }
  }
  for (const auto& [name, f] : frames_)
    for (const auto& lu : f.lexical_units) lu_index_[lu].insert(name);
}

const Frame* Lexicon::find_frame(std::string_view name) const {
  auto it = frames_.find(std::string(name));
  return it == frames_.end() ? nullptr : &it->second;
}

const NounEntry* Lexicon::find_noun(std::string_view lemma) const {
  auto it = nouns_.find(std::string(lemma));
  return it == nouns_.end() ? nullptr : &it->second;
}

bool Lexicon::is_lexical_unit(std::string_view lemma) const { return lu_index_.count(std::string(lemma)) != 0; }

const std::set<std::string>& Lexicon::frames_for(std::string_view lemma) const {
  auto it = lu_index_.find(std::string(lemma));
  return it == lu_index_.end() ? kNoFrames : it->second;
}

bool Lexicon::contains(const Term& term) const {
  return term.is_frame() ? find_frame(term.value) != nullptr : find_noun(term.value) != nullptr;
}

Lexicon parse_lexicon(std::istream& in, const std::string& source_name) {
  std::vector<Frame> frames;
  std::vector<NounEntry> nouns;
  std::set<std::string> frame_names;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](ErrorCode code, const std::string& why) -> Error {
    return Error(code, source_name + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    const auto fields = split(line, '\t');
    if (fields[0] == "F") {
      if (fields.size() != 4) throw fail(ErrorCode::kParse, "frame record needs 4 tab-separated fields");
      Frame f;
      f.name = trim(fields[1]);
      f.description = fields[2];
      if (f.name.empty()) throw fail(ErrorCode::kParse, "empty frame name");
      for (const auto& lu : split(fields[3], ',')) {
        const std::string l = to_lower(trim(lu));
        if (!l.empty()) f.lexical_units.insert(l);
      }
      if (f.lexical_units.empty()) throw fail(ErrorCode::kParse, "frame '" + f.name + "' has no lexical units");
      if (!frame_names.insert(f.name).second) throw fail(ErrorCode::kDuplicate, "duplicate frame name '" + f.name + "'");
      frames.push_back(std::move(f));
    } else if (fields[0] == "N") {
      if (fields.size() < 2 || fields.size() > 3) throw fail(ErrorCode::kParse, "noun record needs 2 or 3 fields");
      NounEntry n;
      n.lemma = trim(fields[1]);
      if (n.lemma.empty() || n.lemma != to_lower(n.lemma) ||
          std::any_of(n.lemma.begin(), n.lemma.end(), is_space)) {
        throw fail(ErrorCode::kParse, "noun lemma '" + n.lemma + "' must be nonempty, lowercase, one word");
      }
      if (fields.size() == 3) {
        for (const auto& ref : split(fields[2], ',')) {
          const std::string r = trim(ref);
          if (!r.empty()) n.description_image_refs.push_back(r);
        }
      }
      nouns.push_back(std::move(n));
    } else {
      throw fail(ErrorCode::kParse, "unknown record type '" + fields[0] + "'");
    }
  }
  try {
    return Lexicon(std::move(frames), std::move(nouns));
  } catch (const Error& e) {
    throw Error(e.code(), source_name + ": " + e.what());
  }
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open lexicon " + path.string());
  return parse_lexicon(in, path.string());
}

namespace {

std::string checked_query(std::string_view query) {
  std::string q = to_lower(trim(query));
  if (q.empty()) throw Error(ErrorCode::kInvalidArgument, "empty search query");
  return q;
}

}  // namespace

std::vector<NounEntry> search_nouns(const Lexicon& lex, std::string_view query) {
  const std::string q = checked_query(query);
  std::vector<const NounEntry*> hits;
  for (const auto& [lemma, entry] : lex.nouns())
    if (lemma.find(q) != std::string::npos) hits.push_back(&entry);
  std::sort(hits.begin(), hits.end(),
            [](const NounEntry* a, const NounEntry* b) { return ShortFirst{}(a->lemma, b->lemma); });
  std::vector<NounEntry> out;
  out.reserve(hits.size());
  for (const auto* h : hits) out.push_back(*h);
  return out;
}

std::vector<Frame> search_frames(const Lexicon& lex, std::string_view query) {
  const std::string q = checked_query(query);
  std::set<std::string, ShortFirst> names;
  for (const auto& [lu, frames] : lex.lu_index())
    if (lu.find(q) != std::string::npos) names.insert(frames.begin(), frames.end());
  std::vector<Frame> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(*lex.find_frame(n));
  return out;
}

TermDescription describe_term(const Lexicon& lex, const Term& term) {
  if (term.is_frame()) {
    const Frame* f = lex.find_frame(term.value);
    if (!f) throw Error(ErrorCode::kNotFound, "unknown frame '" + term.value + "'");
    return {TermKind::kFrame, f->description, {}};
  }
  const NounEntry* n = lex.find_noun(term.value);
  if (!n) throw Error(ErrorCode::kNotFound, "unknown noun '" + term.value + "'");
  return {TermKind::kNoun, {}, n->description_image_refs};
}

}  // namespace termstory
