#include "termstory/session.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "termstory/error.hpp"
#include "termstory/lexicon.hpp"
#include "termstory/text.hpp"

namespace termstory {

using nlohmann::json;

namespace {

constexpr std::string_view kIndexFile = "index.jsonl";
constexpr std::string_view kLogSuffix = ".jsonl";

constexpr std::array<std::pair<EventKind, std::string_view>, 10> kKindNames = {{
    {EventKind::kSessionCreated, "SessionCreated"},
    {EventKind::kImagesSelected, "ImagesSelected"},
    {EventKind::kTermsPredicted, "TermsPredicted"},
    {EventKind::kTermAdded, "TermAdded"},
    {EventKind::kTermRemoved, "TermRemoved"},
    {EventKind::kTermStored, "TermStored"},
    {EventKind::kTermRestored, "TermRestored"},
    {EventKind::kStoryGenerated, "StoryGenerated"},
    {EventKind::kStoryRated, "StoryRated"},
    {EventKind::kStoryEdited, "StoryEdited"},
}};

Error corrupt(const std::string& what) { return Error(ErrorCode::kCorrupt, what); }

bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string random_session_id() {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  std::ostringstream out;
  out << std::hex;
  for (int i = 0; i < 2; ++i) {
    out.width(16);
    out.fill('0');
    out << gen();
  }
  return out.str();
}

int slot_of(const json& payload) {
  const int slot = payload.at("slot").get<int>();
  if (slot < 1 || slot > kStorySentences) {
    throw Error(ErrorCode::kInvalidArgument, "slot " + std::to_string(slot) + " outside 1..5");
  }
  return slot;
}

Term term_of(const json& payload) { return Term::parse(payload.at("term").get<std::string>()); }

StoryRecord& story_at(Session& s, const json& payload) {
  const auto idx = payload.at("story_index").get<std::int64_t>();
  if (idx < 0 || static_cast<std::size_t>(idx) >= s.stories.size()) {
    throw Error(ErrorCode::kNotFound, "no story with index " + std::to_string(idx));
  }
  return s.stories[static_cast<std::size_t>(idx)];
}

void add_to_slot(TermSet& ts, const Term& t) {
  if (ts.contains(t)) {
    throw Error(ErrorCode::kDuplicate, "term '" + t.str() + "' already in slot " + std::to_string(ts.image_index));
  }
  if (ts.terms.size() >= kDefaultMaxTermsPerImage) {
    throw Error(ErrorCode::kOverflow, "slot " + std::to_string(ts.image_index) + " already holds " +
                                          std::to_string(ts.terms.size()) + " terms");
  }
  ts.terms.push_back(t);
}

void remove_from_slot(TermSet& ts, const Term& t) {
  auto it = std::find(ts.terms.begin(), ts.terms.end(), t);
  if (it == ts.terms.end()) {
    throw Error(ErrorCode::kNotFound, "term '" + t.str() + "' not in slot " + std::to_string(ts.image_index));
  }
  ts.terms.erase(it);
}

/// Sentences of an edited story text; throws on empty or more than five sentences.
std::vector<std::vector<std::string>> edited_sentences(const std::string& text) {
  auto sentences = split_sentences(tokenize(text));
  if (sentences.empty()) throw Error(ErrorCode::kInvalidArgument, "edited story is empty");
  if (sentences.size() > kStorySentences) {
    throw Error(ErrorCode::kOverflow, "edited story has " + std::to_string(sentences.size()) + " sentences (max 5)");
  }
  return sentences;
}

void apply_unchecked(Session& s, const Event& e) {
  const json& p = e.payload;
  switch (e.kind) {
    case EventKind::kSessionCreated:
      s.id = e.session_id;
      s.created_at = e.ts;
      break;
    case EventKind::kImagesSelected: {
      const auto ids = p.at("image_ids").get<std::vector<std::string>>();
      if (ids.size() != kStorySentences) {
        throw Error(ErrorCode::kInvalidArgument, "expected 5 image ids, got " + std::to_string(ids.size()));
      }
      for (std::size_t i = 0; i < ids.size(); ++i) s.slots[i] = ids[i];
      s.image_source = image_source_from_string(p.at("source").get<std::string>());
      break;
    }
    case EventKind::kTermsPredicted: {
      TermSets sets = term_sets_from_json(p.at("terms"));
      validate_term_sets(sets);
      s.current_terms = std::move(sets);
      break;
    }
    case EventKind::kTermAdded:
      add_to_slot(s.current_terms[slot_of(p) - 1], term_of(p));
      break;
    case EventKind::kTermRemoved:
      remove_from_slot(s.current_terms[slot_of(p) - 1], term_of(p));
      break;
    case EventKind::kTermStored: {
      const Term t = term_of(p);
      remove_from_slot(s.current_terms[slot_of(p) - 1], t);
      s.stored_terms.insert(t);
      break;
    }
    case EventKind::kTermRestored: {
      const Term t = term_of(p);
      if (!s.stored_terms.count(t)) throw Error(ErrorCode::kNotFound, "term '" + t.str() + "' not in storage");
      add_to_slot(s.current_terms[slot_of(p) - 1], t);
      s.stored_terms.erase(t);
      break;
    }
    case EventKind::kStoryGenerated: {
      if (p.at("story_index").get<std::size_t>() != s.stories.size()) {
        throw corrupt("story_index " + p.at("story_index").dump() + " does not follow " +
                      std::to_string(s.stories.size()) + " stories");
      }
      StoryRecord r;
      r.story.sentences = p.at("sentences").get<std::vector<std::vector<std::string>>>();
      if (r.story.sentences.empty() || r.story.sentences.size() > kStorySentences) {
        throw corrupt("generated story must have 1..5 sentences");
      }
      r.terms = term_sets_from_json(p.at("terms"));
      r.decode = p.at("decode");
      r.truncated = p.at("truncated").get<bool>();
      s.stories.push_back(std::move(r));
      break;
    }
    case EventKind::kStoryRated: {
      const int stars = p.at("stars").get<int>();
      if (stars < kMinStars || stars > kMaxStars) {
        throw Error(ErrorCode::kInvalidArgument, "stars must be in 1..5, got " + std::to_string(stars));
      }
      story_at(s, p).rating = stars;
      break;
    }
    case EventKind::kStoryEdited: {
      StoryRecord& r = story_at(s, p);
      const auto text = p.at("text").get<std::string>();
      StorySequence edited;
      edited.sentences = edited_sentences(text);
      r.edited_text = text;
      r.edited = std::move(edited);
      break;
    }
  }
}

/// write(2) loop; throws on failure.
void write_all(int fd, std::string_view data, const std::string& what) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, "write to " + what + " failed: " + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// --- events ----------------------------------------------------------------------

std::string_view to_string(EventKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kKindNames)
    if (name == s) return kind;
  return std::nullopt;
}

std::string_view to_string(ImageSource s) { return s == ImageSource::kPool ? "pool" : "upload"; }

ImageSource image_source_from_string(std::string_view s) {
  if (s == "pool") return ImageSource::kPool;
  if (s == "upload") return ImageSource::kUpload;
  throw Error(ErrorCode::kInvalidArgument, "image source must be 'pool' or 'upload'");
}

TermOp::Kind term_op_from_string(std::string_view s) {
  if (s == "add") return TermOp::Kind::kAdd;
  if (s == "remove") return TermOp::Kind::kRemove;
  if (s == "store") return TermOp::Kind::kStore;
  if (s == "restore") return TermOp::Kind::kRestore;
  throw Error(ErrorCode::kInvalidArgument, "term op must be add, remove, store or restore");
}

json Event::to_json() const {
  return {{"v", kEventVersion}, {"session_id", session_id}, {"seq", seq},
          {"ts", ts},           {"kind", to_string(kind)},  {"payload", payload}};
}

Event Event::from_json(const json& j) {
  try {
    if (!j.is_object()) throw corrupt("event is not an object");
    if (j.at("v").get<int>() != kEventVersion) throw corrupt("unsupported event version " + j.at("v").dump());
    Event e;
    e.session_id = j.at("session_id").get<std::string>();
    e.seq = j.at("seq").get<std::uint64_t>();
    e.ts = j.at("ts").get<std::int64_t>();
    const auto kind = j.at("kind").get<std::string>();
    const auto k = event_kind_from_string(kind);
    if (!k) throw corrupt("unknown event kind '" + kind + "'");
    e.kind = *k;
    e.payload = j.at("payload");
    if (!e.payload.is_object()) throw corrupt("event payload is not an object");
    return e;
  } catch (const json::exception& ex) {
    throw corrupt(std::string("malformed event: ") + ex.what());
  }
}

std::string Event::to_line() const { return to_json().dump(); }

void apply(Session& s, const Event& e) {
  if (e.kind == EventKind::kSessionCreated) {
    if (s.last_seq != 0) throw corrupt("SessionCreated after other events");
    if (e.seq != 1) throw corrupt("SessionCreated must have seq 1");
    if (e.session_id.empty()) throw corrupt("empty session id");
  } else {
    if (s.last_seq == 0) throw corrupt("log does not start with SessionCreated");
    if (e.session_id != s.id) throw corrupt("event for session '" + e.session_id + "' in log of '" + s.id + "'");
    if (e.seq != s.last_seq + 1) {
      throw corrupt("sequence gap: expected " + std::to_string(s.last_seq + 1) + ", got " + std::to_string(e.seq));
    }
  }
  Session next = s;
  try {
    apply_unchecked(next, e);
  } catch (const json::exception& ex) {
    throw corrupt(std::string(to_string(e.kind)) + " payload: " + ex.what());
  }
  next.last_seq = e.seq;
  next.updated_at = e.ts;
  s = std::move(next);
}

Session replay(std::span<const Event> events) {
  if (events.empty()) throw corrupt("empty log: no SessionCreated event");
  Session s;
  for (const auto& e : events) apply(s, e);
  return s;
}

ParsedLog parse_log(std::string_view bytes) {
  ParsedLog out;
  std::size_t pos = 0, line_no = 0;
  while (true) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) break;
    ++line_no;
    const std::string_view line = bytes.substr(pos, nl - pos);
    if (!trim(line).empty()) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& ex) {
        throw corrupt("log line " + std::to_string(line_no) + ": " + ex.what());
      }
      out.events.push_back(Event::from_json(j));
    }
    pos = nl + 1;
    out.valid_bytes = pos;
  }
  return out;
}

json Session::to_json() const {
  json slots_json = json::array();
  for (const auto& slot : slots) slots_json.push_back(slot ? json(*slot) : json(nullptr));
  json stored = json::array();
  for (const auto& t : stored_terms) stored.push_back(t.str());
  json stories_json = json::array();
  for (std::size_t i = 0; i < stories.size(); ++i) {
    const auto& r = stories[i];
    stories_json.push_back({{"index", i},
                            {"sentences", r.story.sentences},
                            {"text", r.story.text()},
                            {"terms", term_sets_to_json(r.terms)},
                            {"decode", r.decode},
                            {"truncated", r.truncated},
                            {"rating", r.rating ? json(*r.rating) : json(nullptr)},
                            {"edited_text", r.edited_text ? json(*r.edited_text) : json(nullptr)}});
  }
  return {{"session_id", id},
          {"created_at", created_at},
          {"updated_at", updated_at},
          {"seq", last_seq},
          {"slots", slots_json},
          {"image_source", image_source ? json(to_string(*image_source)) : json(nullptr)},
          {"terms", term_sets_to_json(current_terms)},
          {"stored", stored},
          {"stories", stories_json}};
}

// --- pool ------------------------------------------------------------------------

ImagePool ImagePool::load(const std::filesystem::path& dir) {
  const auto path = dir / "pool.jsonl";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  ImagePool pool;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    PoolEntry e;
    try {
      const json j = json::parse(line);
      e.image_id = j.at("image_id").get<std::string>();
      e.thumbnail = j.value("thumbnail", std::string());
      e.vector = j.at("vector").get<std::vector<double>>();
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
    if (!pool.entries_.empty() && e.vector.size() != pool.entries_.front().vector.size()) {
      throw Error(ErrorCode::kShape, path.string() + ": image '" + e.image_id + "' has a different feature width");
    }
    if (!pool.index_.emplace(e.image_id, pool.entries_.size()).second) {
      throw Error(ErrorCode::kDuplicate, path.string() + ": duplicate image_id '" + e.image_id + "'");
    }
    pool.entries_.push_back(std::move(e));
  }
  return pool;
}

const PoolEntry* ImagePool::find(std::string_view image_id) const {
  auto it = index_.find(image_id);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

// --- service ---------------------------------------------------------------------

struct SessionService::Entry {
  mutable std::mutex mu;
  Session state;
  std::vector<Event> log;
  int fd = -1;
  std::filesystem::path path;

  ~Entry() {
    if (fd >= 0) ::close(fd);
  }
};

SessionService::SessionService(std::shared_ptr<const Lexicon> lexicon, std::shared_ptr<const StoryModel> story_model,
                               std::shared_ptr<const TermDecoder> term_model, std::shared_ptr<const ImagePool> pool,
                               ServiceOptions options)
    : lexicon_(std::move(lexicon)),
      story_model_(std::move(story_model)),
      term_model_(std::move(term_model)),
      pool_(std::move(pool)),
      opts_(std::move(options)) {
  if (!lexicon_) throw Error(ErrorCode::kInvalidArgument, "session service needs a lexicon");
  if (!opts_.clock) opts_.clock = system_clock_ms;
  if (!opts_.id_generator) opts_.id_generator = random_session_id;
  if (!opts_.sessions_dir.empty()) {
    std::filesystem::create_directories(opts_.sessions_dir);
    load_existing();
  }
}

SessionService::~SessionService() = default;

void SessionService::load_existing() {
  std::vector<std::filesystem::path> logs;
  for (const auto& de : std::filesystem::directory_iterator(opts_.sessions_dir)) {
    const auto name = de.path().filename().string();
    if (de.is_regular_file() && name != kIndexFile && name.ends_with(kLogSuffix)) logs.push_back(de.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    const std::string bytes = read_file(path);
    ParsedLog parsed;
    try {
      parsed = parse_log(bytes);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": " + e.what());
    }
    if (parsed.valid_bytes < bytes.size()) std::filesystem::resize_file(path, parsed.valid_bytes);
    if (parsed.events.empty()) {
      std::filesystem::remove(path);
      continue;
    }
    auto entry = std::make_shared<Entry>();
    entry->state = replay(parsed.events);
    entry->log = std::move(parsed.events);
    entry->path = path;
    entry->fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
    if (entry->fd < 0) throw Error(ErrorCode::kIo, "cannot open " + path.string() + ": " + std::strerror(errno));
    if (path.stem().string() != entry->state.id) {
      throw corrupt(path.string() + ": log holds session '" + entry->state.id + "'");
    }
    sessions_.emplace(entry->state.id, std::move(entry));
  }
  // The index is derived data: rewrite it from the recovered logs.
  std::string index;
  for (const auto& [id, e] : sessions_) {
    index += json{{"session_id", id}, {"created_at", e->state.created_at}}.dump();
    index += '\n';
  }
  const auto tmp = opts_.sessions_dir / (std::string(kIndexFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << index;
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, opts_.sessions_dir / kIndexFile);
}

std::shared_ptr<SessionService::Entry> SessionService::entry(const std::string& sid) const {
  std::lock_guard lock(map_mutex_);
  auto it = sessions_.find(sid);
  if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, "unknown session '" + sid + "'");
  return it->second;
}

void SessionService::append(Entry& entry, EventKind kind, json payload) {
  Event e;
  e.session_id = entry.state.id;
  e.seq = entry.state.last_seq + 1;
  e.ts = opts_.clock();
  e.kind = kind;
  e.payload = std::move(payload);
  Session next = entry.state;
  apply(next, e);
  if (entry.fd >= 0) {
    write_all(entry.fd, e.to_line() + "\n", entry.path.string());
    if (opts_.durable && ::fsync(entry.fd) != 0) {
      throw Error(ErrorCode::kIo, "fsync " + entry.path.string() + " failed: " + std::strerror(errno));
    }
  }
  entry.log.push_back(std::move(e));
  entry.state = std::move(next);
}

std::string SessionService::create_session() {
  auto entry = std::make_shared<Entry>();
  std::unique_lock lock(entry->mu);
  std::string sid;
  {
    std::lock_guard map_lock(map_mutex_);
    for (int attempt = 0;; ++attempt) {
      sid = opts_.id_generator();
      if (!valid_session_id(sid)) throw Error(ErrorCode::kInvalidArgument, "generated session id is not valid");
      if (!sessions_.count(sid)) break;
      if (attempt > 100) throw Error(ErrorCode::kDuplicate, "cannot generate a fresh session id");
    }
    sessions_.emplace(sid, entry);
  }
  try {
    Event e{sid, 1, opts_.clock(), EventKind::kSessionCreated, json::object()};
    Session s;
    apply(s, e);
    if (!opts_.sessions_dir.empty()) {
      entry->path = opts_.sessions_dir / (sid + std::string(kLogSuffix));
      entry->fd = ::open(entry->path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
      if (entry->fd < 0) throw Error(ErrorCode::kIo, "cannot open " + entry->path.string() + ": " + std::strerror(errno));
      write_all(entry->fd, e.to_line() + "\n", entry->path.string());
      if (opts_.durable) ::fsync(entry->fd);
      std::lock_guard index_lock(index_mutex_);
      const auto index_path = opts_.sessions_dir / kIndexFile;
      const int fd = ::open(index_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
      if (fd < 0) throw Error(ErrorCode::kIo, "cannot open " + index_path.string());
      const std::string line = json{{"session_id", sid}, {"created_at", e.ts}}.dump() + "\n";
      try {
        write_all(fd, line, index_path.string());
      } catch (...) {
        ::close(fd);
        throw;
      }
      ::close(fd);
    }
    entry->state = std::move(s);
    entry->log.push_back(std::move(e));
  } catch (...) {
    std::lock_guard lock2(map_mutex_);
    sessions_.erase(sid);
    throw;
  }
  return sid;
}

TermSets SessionService::select_features(const std::string& sid, ImageSource source,
                                         const std::vector<ImageFeature>& features) {
  if (features.size() != kStorySentences) {
    throw Error(ErrorCode::kInvalidArgument, "expected 5 images, got " + std::to_string(features.size()));
  }
  if (!term_model_ || !term_model_->trained()) throw Error(ErrorCode::kUnavailable, "no term model loaded");
  auto e = entry(sid);
  const std::size_t max_terms = std::min(term_model_->config().max_terms, kDefaultMaxTermsPerImage);
  TermSets predicted = empty_term_sets();
  json ids = json::array();
  for (std::size_t i = 0; i < features.size(); ++i) {
    predicted[i].terms = term_model_->predict(features[i], max_terms);
    ids.push_back(features[i].image_id);
  }
  std::lock_guard lock(e->mu);
  append(*e, EventKind::kImagesSelected, {{"source", to_string(source)}, {"image_ids", ids}});
  append(*e, EventKind::kTermsPredicted, {{"terms", term_sets_to_json(predicted)}});
  return e->state.current_terms;
}

TermSets SessionService::select_images(const std::string& sid, const std::vector<std::string>& image_ids) {
  if (image_ids.size() != kStorySentences) {
    throw Error(ErrorCode::kInvalidArgument, "expected 5 images, got " + std::to_string(image_ids.size()));
  }
  if (!pool_) throw Error(ErrorCode::kUnavailable, "no image pool configured");
  std::vector<ImageFeature> feats;
  for (const auto& id : image_ids) {
    const PoolEntry* p = pool_->find(id);
    if (!p) throw Error(ErrorCode::kNotFound, "unknown pool image '" + id + "'");
    feats.push_back({p->image_id, p->vector});
  }
  return select_features(sid, ImageSource::kPool, feats);
}

TermSets SessionService::select_uploaded_images(const std::string& sid, const std::vector<ImageFeature>& features) {
  return select_features(sid, ImageSource::kUpload, features);
}

TermSets SessionService::modify_terms(const std::string& sid, const TermOp& op) {
  if (op.slot < 1 || op.slot > kStorySentences) {
    throw Error(ErrorCode::kInvalidArgument, "slot " + std::to_string(op.slot) + " outside 1..5");
  }
  if ((op.kind == TermOp::Kind::kAdd || op.kind == TermOp::Kind::kRestore) && !lexicon_->contains(op.term)) {
    throw Error(ErrorCode::kNotFound, "unknown term '" + op.term.str() + "'");
  }
  static constexpr EventKind kinds[] = {EventKind::kTermAdded, EventKind::kTermRemoved, EventKind::kTermStored,
                                        EventKind::kTermRestored};
  auto e = entry(sid);
  std::lock_guard lock(e->mu);
  append(*e, kinds[static_cast<int>(op.kind)], {{"slot", op.slot}, {"term", op.term.str()}});
  return e->state.current_terms;
}

GeneratedStory SessionService::generate_story(const std::string& sid, const DecodeConfig& decode) {
  if (!story_model_ || !story_model_->trained()) throw Error(ErrorCode::kUnavailable, "no story model loaded");
  auto e = entry(sid);
  std::lock_guard lock(e->mu);
  const TermSets terms = e->state.current_terms;
  GenerateInfo info;
  GeneratedStory out;
  out.story = story_model_->generate(terms, decode, &info);
  out.truncated = info.truncated;
  out.index = e->state.stories.size();
  append(*e, EventKind::kStoryGenerated,
         {{"story_index", out.index},
          {"sentences", out.story.sentences},
          {"terms", term_sets_to_json(terms)},
          {"decode", decode.to_json()},
          {"truncated", out.truncated}});
  return out;
}

void SessionService::rate_story(const std::string& sid, std::size_t story_index, int stars) {
  auto e = entry(sid);
  std::lock_guard lock(e->mu);
  append(*e, EventKind::kStoryRated, {{"story_index", story_index}, {"stars", stars}});
}

std::size_t SessionService::edit_cap() const { return story_model_ ? story_model_->config().n_max : opts_.n_max; }

void SessionService::edit_story(const std::string& sid, std::size_t story_index, const std::string& text) {
  const auto sentences = edited_sentences(text);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].size() > edit_cap()) {
      throw Error(ErrorCode::kOverflow, "edited sentence " + std::to_string(i + 1) + " has " +
                                            std::to_string(sentences[i].size()) + " tokens (max " +
                                            std::to_string(edit_cap()) + ")");
    }
  }
  auto e = entry(sid);
  std::lock_guard lock(e->mu);
  append(*e, EventKind::kStoryEdited, {{"story_index", story_index}, {"text", text}});
}

Session SessionService::get_session(const std::string& sid) const {
  auto e = entry(sid);
  std::lock_guard lock(e->mu);
  return e->state;
}

std::vector<Event> SessionService::events(const std::string& sid) const {
  auto e = entry(sid);
  std::lock_guard lock(e->mu);
  return e->log;
}

std::vector<std::string> SessionService::session_ids() const {
  std::lock_guard lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, e] : sessions_) out.push_back(id);
  return out;
}

}  // namespace termstory
