#pragma once

// Event-sourced interactive sessions. Session state is a pure fold over the
// session's append-only event log; the service validates each request,
// builds the event, folds it into a copy, persists it, then commits.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "termstory/image_term_model.hpp"
#include "termstory/story_model.hpp"
#include "termstory/termex.hpp"

namespace termstory {

class Lexicon;

inline constexpr int kEventVersion = 1;
inline constexpr int kMinStars = 1;
inline constexpr int kMaxStars = 5;

enum class EventKind {
  kSessionCreated,
  kImagesSelected,
  kTermsPredicted,
  kTermAdded,
  kTermRemoved,
  kTermStored,
  kTermRestored,
  kStoryGenerated,
  kStoryRated,
  kStoryEdited,
};

std::string_view to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(std::string_view s);

struct Event {
  std::string session_id;
  std::uint64_t seq = 0;
  std::int64_t ts = 0;  ///< milliseconds since the Unix epoch
  EventKind kind = EventKind::kSessionCreated;
  nlohmann::json payload = nlohmann::json::object();

  nlohmann::json to_json() const;
  /// Throws Error(kCorrupt) on an unknown version or kind and on a malformed record.
  static Event from_json(const nlohmann::json& j);
  /// Compact JSON without the trailing newline.
  std::string to_line() const;
  bool operator==(const Event&) const = default;
};

enum class ImageSource { kUpload, kPool };
std::string_view to_string(ImageSource s);
ImageSource image_source_from_string(std::string_view s);

struct StoryRecord {
  StorySequence story;
  TermSets terms;  ///< snapshot at generation time
  nlohmann::json decode = nlohmann::json::object();
  bool truncated = false;
  std::optional<int> rating;
  std::optional<std::string> edited_text;
  std::optional<StorySequence> edited;

  bool operator==(const StoryRecord&) const = default;
};

struct Session {
  std::string id;
  std::int64_t created_at = 0;
  std::int64_t updated_at = 0;
  std::uint64_t last_seq = 0;
  std::array<std::optional<std::string>, kStorySentences> slots;
  std::optional<ImageSource> image_source;
  TermSets current_terms = empty_term_sets();
  std::set<Term> stored_terms;
  std::vector<StoryRecord> stories;

  nlohmann::json to_json() const;
  bool operator==(const Session&) const = default;
};

/// Folds one event into `s`. Enforces sequencing (seq == last_seq + 1, same
/// session id) and every state rule; throws Error without modifying `s`
/// when the event does not apply.
void apply(Session& s, const Event& e);
/// Fold over a whole log. The first event must be SessionCreated with seq 1.
Session replay(std::span<const Event> events);

/// Parses the complete (newline-terminated) lines of a log. Returns the
/// events and the byte length they cover; any unterminated tail is ignored.
struct ParsedLog {
  std::vector<Event> events;
  std::size_t valid_bytes = 0;
};
ParsedLog parse_log(std::string_view bytes);

struct PoolEntry {
  std::string image_id;
  std::string thumbnail;
  std::vector<double> vector;
};

/// Directory holding pool.jsonl with {"image_id", "thumbnail", "vector"} lines.
class ImagePool {
 public:
  ImagePool() = default;
  static ImagePool load(const std::filesystem::path& dir);

  const PoolEntry* find(std::string_view image_id) const;
  const std::vector<PoolEntry>& entries() const { return entries_; }

 private:
  std::vector<PoolEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct TermOp {
  enum class Kind { kAdd, kRemove, kStore, kRestore };
  Kind kind = Kind::kAdd;
  int slot = 1;
  Term term;
};
TermOp::Kind term_op_from_string(std::string_view s);

struct GeneratedStory {
  std::size_t index = 0;
  StorySequence story;
  bool truncated = false;
};

struct ServiceOptions {
  /// Event logs and the index live here; empty keeps everything in memory.
  std::filesystem::path sessions_dir;
  /// fsync after every append.
  bool durable = true;
  std::function<std::int64_t()> clock;
  std::function<std::string()> id_generator;
  /// Word cap for edited sentences when no story model is loaded.
  std::size_t n_max = kDefaultMaxSentenceTokens;
};

class SessionService {
 public:
  SessionService(std::shared_ptr<const Lexicon> lexicon, std::shared_ptr<const StoryModel> story_model,
                 std::shared_ptr<const TermDecoder> term_model, std::shared_ptr<const ImagePool> pool,
                 ServiceOptions options = {});
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  std::string create_session();
  /// Pool images by id.
  TermSets select_images(const std::string& sid, const std::vector<std::string>& image_ids);
  /// Uploaded feature vectors (the upload path of the UI).
  TermSets select_uploaded_images(const std::string& sid, const std::vector<ImageFeature>& features);
  TermSets modify_terms(const std::string& sid, const TermOp& op);
  GeneratedStory generate_story(const std::string& sid, const DecodeConfig& decode);
  void rate_story(const std::string& sid, std::size_t story_index, int stars);
  void edit_story(const std::string& sid, std::size_t story_index, const std::string& text);

  Session get_session(const std::string& sid) const;
  std::vector<Event> events(const std::string& sid) const;
  std::vector<std::string> session_ids() const;

  const Lexicon& lexicon() const { return *lexicon_; }
  const ImagePool* pool() const { return pool_.get(); }

 private:
  struct Entry;
  std::shared_ptr<Entry> entry(const std::string& sid) const;
  void append(Entry& entry, EventKind kind, nlohmann::json payload);
  TermSets select_features(const std::string& sid, ImageSource source, const std::vector<ImageFeature>& features);
  void load_existing();
  std::size_t edit_cap() const;

  std::shared_ptr<const Lexicon> lexicon_;
  std::shared_ptr<const StoryModel> story_model_;
  std::shared_ptr<const TermDecoder> term_model_;
  std::shared_ptr<const ImagePool> pool_;
  ServiceOptions opts_;

  mutable std::mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mutex index_mutex_;
};

}  // namespace termstory
