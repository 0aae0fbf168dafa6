#pragma once

// Sentence-aware Transformer story generator.
//
// One attention stack over [term prefix | story]. Term tokens form a
// bidirectional, position-free block tagged only by their image slot; story
// tokens attend to the whole prefix and causally to earlier story tokens.
// Input rows:
//   prefix: token_embedding + inter_pe[image]
//   story : token_embedding + inter_pe[sentence] + intra_pe(position)
// where inter_pe is a learned 5 x d_model table and intra_pe is the fixed
// sinusoidal encoding of the position inside the current sentence.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "termstory/autodiff.hpp"
#include "termstory/optim.hpp"
#include "termstory/termex.hpp"

namespace termstory {

class Rng;

struct StoryModelConfig {
  std::size_t d_model = 128;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 512;
  std::size_t vocab_size = 0;
  /// Maximum words per sentence.
  std::size_t n_max = kDefaultMaxSentenceTokens;
  std::size_t sentences = kStorySentences;
  std::size_t max_terms_per_image = kDefaultMaxTermsPerImage;
  double dropout_rate = 0.1;
  std::uint64_t seed = 20190601;

  /// Throws Error(kInvalidArgument) on an inconsistent configuration.
  void validate() const;
  /// Prefix of 5 * max_terms_per_image plus 5 sentences of (marker + n_max words).
  std::size_t max_sequence_length() const;

  nlohmann::json to_json() const;
  static StoryModelConfig from_json(const nlohmann::json& j);
  bool operator==(const StoryModelConfig&) const = default;
};

/// Token <-> id map shared by terms and story words. Ids 0..4 are reserved.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kSep = 3;
  static constexpr int kEos = 4;
  static constexpr std::size_t kSpecialCount = 5;

  Vocabulary();
  /// `tokens` must start with the five special tokens in id order.
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Specials, then every term string and story token in the corpus, sorted.
  /// Throws Error(kOverflow) past `max_size`.
  static Vocabulary build(std::span<const TermStoryPair> corpus, std::size_t max_size = 50000);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool is_term_token(int id) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Sinusoidal position code: [2i] = sin(pos / 10000^(2i/d)), [2i+1] = cos(same).
std::vector<double> intra_pe(std::size_t pos, std::size_t d_model);
/// Rows 0..positions-1 of intra_pe.
Tensor intra_pe_table(std::size_t positions, std::size_t d_model);

/// Token layout for one forward pass.
struct SequencePlan {
  std::vector<int> prefix_ids;
  std::vector<int> prefix_image;  ///< 1..5 per prefix token
  std::vector<int> story_ids;
  std::vector<int> story_sentence;  ///< 1..5 per story token
  std::vector<int> story_position;  ///< 0 for the sentence marker, then 1..

  std::size_t prefix_length() const { return prefix_ids.size(); }
  std::size_t story_length() const { return story_ids.size(); }
  std::size_t length() const { return prefix_ids.size() + story_ids.size(); }
};

/// Prefix from the term sets. When `story` is given, appends the
/// teacher-forcing input BOS w.. SEP w.. ... (each sentence opens with a
/// marker at position 0: BOS for the first, SEP afterwards); otherwise the
/// story part holds just BOS.
SequencePlan make_plan(const Vocabulary& vocab, const TermSets& terms, const StorySequence* story = nullptr);
/// Next-token targets matching make_plan's story input: words, SEP between
/// sentences, EOS at the end.
std::vector<int> story_targets(const Vocabulary& vocab, const StorySequence& story);

enum class DecodeMode { kGreedy, kTopK };

struct DecodeConfig {
  DecodeMode mode = DecodeMode::kGreedy;
  std::size_t k = 10;
  std::uint64_t seed = 7;
  /// Per-sentence word cap; 0 means the model's n_max.
  std::size_t max_sentence_tokens = 0;

  nlohmann::json to_json() const;
  static DecodeConfig from_json(const nlohmann::json& j);
};

struct GenerateInfo {
  bool truncated = false;  ///< some sentence hit the word cap and was closed
  std::size_t steps = 0;
};

class StoryModel {
 public:
  StoryModel(StoryModelConfig cfg, Vocabulary vocab);

  const StoryModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  /// Fixed position table, (n_max + 1) x d_model. Never trained.
  const Tensor& intra_table() const { return intra_table_; }

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  /// Binds a parameter name to a graph leaf.
  using Binder = std::function<ad::Var(const std::string&)>;
  /// Binder that records gradients into this model's parameters.
  Binder trainable_binder(ad::Graph& g);
  /// Binder over copies of the parameter values (no gradients).
  Binder frozen_binder(ad::Graph& g) const;

  /// Input rows for `plan`, L x d_model.
  ad::Var embed_sequence(ad::Graph& g, const Binder& bind, const SequencePlan& plan) const;
  /// Logits for the story positions, |story| x vocab. `rng` drives dropout
  /// and may be null when `training` is false.
  ad::Var forward(ad::Graph& g, const Binder& bind, const SequencePlan& plan, bool training, Rng* rng) const;
  /// Inference forward without a gradient tape.
  Tensor logits(const SequencePlan& plan) const;

  /// Mean next-token cross-entropy over the story tokens of `pair`.
  ad::Var loss(ad::Graph& g, const Binder& bind, const TermStoryPair& pair, bool training, Rng* rng) const;

  /// Decodes a story sentence by sentence. Always returns five nonempty
  /// sentences: SEP is only allowed after a word in sentences 1-4 and EOS only
  /// after a word in sentence 5. Throws Error(kUnavailable) if untrained.
  StorySequence generate(const TermSets& terms, const DecodeConfig& decode, GenerateInfo* info = nullptr) const;

  void save(const std::filesystem::path& path) const;
  static StoryModel load(const std::filesystem::path& path);

 private:
  void init_params();
  std::vector<std::uint8_t> attention_mask(const SequencePlan& plan) const;

  StoryModelConfig cfg_;
  Vocabulary vocab_;
  ParamStore params_;
  Tensor intra_table_;
  bool trained_ = false;
};

struct StoryTrainConfig {
  std::size_t steps = 2000;
  double lr = 1e-3;
  std::size_t batch_size = 1;
  double clip_norm = 1.0;
  std::uint64_t seed = 20190601;
  /// Called after every step with (step, loss before the update).
  std::function<void(std::size_t, double)> on_step;
};

struct TrainResult {
  /// Per-token training loss at each step, measured before that step's update.
  std::vector<double> loss_curve;
};

/// Teacher-forced next-token training with Adam. Deterministic given the
/// seeds. Marks the model trained.
TrainResult train_story_model(StoryModel& model, std::span<const TermStoryPair> corpus, const StoryTrainConfig& cfg);

/// Per-token cross-entropy over the corpus with dropout off.
double story_corpus_loss(const StoryModel& model, std::span<const TermStoryPair> corpus);

/// Fraction of aligned token positions (sentence by sentence) that match,
/// relative to the reference token count.
double token_match(const StorySequence& generated, const StorySequence& reference);

}  // namespace termstory
