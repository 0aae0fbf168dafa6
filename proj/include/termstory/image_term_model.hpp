#pragma once

// Stage one: an LSTM that decodes a term list from a precomputed image
// feature vector. The projected feature is the step-0 input (zero initial
// state); each later step reads the embedding of the previous term.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "termstory/autodiff.hpp"
#include "termstory/optim.hpp"
#include "termstory/term.hpp"

namespace termstory {

class Lexicon;
class PosOracle;

inline constexpr std::size_t kDefaultImageDim = 2048;
inline constexpr std::string_view kFeatureMagic = "TSFEAT01";

struct ImageFeature {
  std::string image_id;
  std::vector<double> vector;

  bool operator==(const ImageFeature&) const = default;
};

/// Reads JSON Lines ({"image_id", "vector"}) or the binary bulk format,
/// chosen by the leading magic bytes. All vectors must share one width
/// (`expected_dim` when given), be finite, and have unique ids.
std::vector<ImageFeature> load_features(const std::filesystem::path& path,
                                        std::optional<std::size_t> expected_dim = std::nullopt);
std::vector<ImageFeature> parse_features_jsonl(std::istream& in, const std::string& source,
                                               std::optional<std::size_t> expected_dim = std::nullopt);
/// Binary layout, little-endian: magic "TSFEAT01", u32 d_img, u32 count,
/// count x (u32 id length, id bytes), then count * d_img float64 row-major.
std::vector<ImageFeature> parse_features_binary(std::istream& in, const std::string& source,
                                                std::optional<std::size_t> expected_dim = std::nullopt);
void save_features_jsonl(const std::filesystem::path& path, std::span<const ImageFeature> features);
void save_features_binary(const std::filesystem::path& path, std::span<const ImageFeature> features);

/// Term vocabulary of the decoder: 0 = EOS, 1 = UNK, then sorted term strings.
class TermVocabulary {
 public:
  static constexpr int kEos = 0;
  static constexpr int kUnk = 1;

  TermVocabulary();
  explicit TermVocabulary(std::vector<std::string> tokens);
  static TermVocabulary build(std::span<const std::vector<Term>> term_lists, std::size_t max_size = 50000);

  int id(const Term& t) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Nouns in their given order, then frames in their given order, duplicates dropped.
std::vector<Term> canonical_term_order(std::span<const Term> terms);

/// Canonical training targets for a caption: terms of every sentence in the
/// caption, in canonical order.
std::vector<Term> caption_terms(const Lexicon& lex, const PosOracle& pos, const std::string& caption,
                                std::size_t max_terms);

struct TermDecoderConfig {
  std::size_t d_img = kDefaultImageDim;
  std::size_t d_hidden = 256;
  std::size_t term_vocab_size = 0;
  std::size_t max_terms = 8;
  std::uint64_t seed = 20190601;

  void validate() const;
  nlohmann::json to_json() const;
  static TermDecoderConfig from_json(const nlohmann::json& j);
};

/// One LSTM step with gates stacked [input | forget | output | candidate].
struct LstmStep {
  ad::Var h, c;
  ad::Var input_gate, forget_gate, output_gate, candidate;
};
LstmStep lstm_step(ad::Var x, ad::Var h, ad::Var c, ad::Var w_x, ad::Var w_h, ad::Var bias);

struct TermExample {
  ImageFeature feature;
  std::vector<Term> terms;
};

class TermDecoder {
 public:
  TermDecoder(TermDecoderConfig cfg, TermVocabulary vocab);

  const TermDecoderConfig& config() const { return cfg_; }
  const TermVocabulary& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  using Binder = std::function<ad::Var(const std::string&)>;
  Binder trainable_binder(ad::Graph& g);
  Binder frozen_binder(ad::Graph& g) const;

  /// Teacher-forced mean cross-entropy of `terms` followed by EOS.
  ad::Var loss(ad::Graph& g, const Binder& bind, const ImageFeature& feat, std::span<const Term> terms) const;

  /// Greedy decode until EOS or `max_terms` steps, duplicates removed.
  /// Throws Error(kUnavailable) if untrained.
  std::vector<Term> predict(const ImageFeature& feat, std::size_t max_terms) const;

  void save(const std::filesystem::path& path) const;
  static TermDecoder load(const std::filesystem::path& path);

 private:
  void init_params();
  void check_feature(const ImageFeature& feat) const;
  ad::Var project(ad::Graph& g, const Binder& bind, const ImageFeature& feat) const;

  TermDecoderConfig cfg_;
  TermVocabulary vocab_;
  ParamStore params_;
  bool trained_ = false;
};

struct TermTrainConfig {
  std::size_t steps = 300;
  double lr = 1e-3;
  std::size_t batch_size = 1;
  double clip_norm = 1.0;
  std::uint64_t seed = 20190601;
  std::function<void(std::size_t, double)> on_step;
};

/// Returns the per-step training loss (before each update). Marks the model trained.
std::vector<double> train_term_decoder(TermDecoder& model, std::span<const TermExample> examples,
                                       const TermTrainConfig& cfg);

}  // namespace termstory
