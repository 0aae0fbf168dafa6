#include "termstory/story_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "termstory/checkpoint.hpp"
#include "termstory/error.hpp"
#include "termstory/rng.hpp"

namespace termstory {

using nlohmann::json;

namespace {

constexpr double kLayerNormEps = 1e-6;
constexpr std::string_view kCheckpointKind = "story_model";
const std::vector<std::string> kSpecialTokens = {"<pad>", "<unk>", "<bos>", "<sep>", "<eos>"};

std::string layer_name(std::size_t l, std::string_view rest) { return "layer" + std::to_string(l) + "." + std::string(rest); }

}  // namespace

// --- config ------------------------------------------------------------------

void StoryModelConfig::validate() const {
  auto bad = [](const std::string& why) { return Error(ErrorCode::kInvalidArgument, "story model config: " + why); };
  if (d_model == 0 || d_model % 2 != 0) throw bad("d_model must be even and positive");
  if (n_heads == 0 || d_model % n_heads != 0) throw bad("d_model must be divisible by n_heads");
  if (n_layers == 0) throw bad("n_layers must be positive");
  if (d_ff == 0) throw bad("d_ff must be positive");
  if (sentences != kStorySentences) throw bad("sentences must be 5");
  if (n_max < 1) throw bad("n_max must be >= 1");
  if (vocab_size <= Vocabulary::kSpecialCount) throw bad("vocab_size must exceed the special tokens");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw bad("dropout_rate must be in [0, 1)");
}

std::size_t StoryModelConfig::max_sequence_length() const {
  return sentences * max_terms_per_image + sentences * (n_max + 1);
}

json StoryModelConfig::to_json() const {
  return {{"d_model", d_model},   {"n_layers", n_layers}, {"n_heads", n_heads},
          {"d_ff", d_ff},         {"vocab_size", vocab_size}, {"n_max", n_max},
          {"sentences", sentences}, {"max_terms_per_image", max_terms_per_image},
          {"dropout_rate", dropout_rate}, {"seed", seed}};
}

StoryModelConfig StoryModelConfig::from_json(const json& j) {
  StoryModelConfig c;
  try {
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.n_max = j.at("n_max").get<std::size_t>();
    c.sentences = j.at("sentences").get<std::size_t>();
    c.max_terms_per_image = j.at("max_terms_per_image").get<std::size_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("story model config: ") + e.what());
  }
  return c;
}

// --- vocabulary --------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(kSpecialTokens) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kSpecialCount || !std::equal(kSpecialTokens.begin(), kSpecialTokens.end(), tokens_.begin())) {
    throw Error(ErrorCode::kInvalidArgument, "vocabulary must start with the special tokens");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::kDuplicate, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::build(std::span<const TermStoryPair> corpus, std::size_t max_size) {
  std::set<std::string> seen;
  for (const auto& pair : corpus) {
    for (const auto& ts : pair.term_sets)
      for (const auto& t : ts.terms) seen.insert(t.str());
    for (const auto& s : pair.story.sentences) seen.insert(s.begin(), s.end());
  }
  for (const auto& sp : kSpecialTokens) seen.erase(sp);
  if (seen.size() + kSpecialCount > max_size) {
    throw Error(ErrorCode::kOverflow, "vocabulary of " + std::to_string(seen.size() + kSpecialCount) +
                                          " tokens exceeds limit " + std::to_string(max_size));
  }
  std::vector<std::string> tokens = kSpecialTokens;
  tokens.insert(tokens.end(), seen.begin(), seen.end());
  return Vocabulary(std::move(tokens));
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::is_term_token(int id) const {
  return token(id).rfind(kFramePrefix, 0) == 0;
}

// --- positions ---------------------------------------------------------------

std::vector<double> intra_pe(std::size_t pos, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "intra_pe: d_model must be even, got " + std::to_string(d_model));
  }
  std::vector<double> out(d_model);
  for (std::size_t i = 0; i < d_model / 2; ++i) {
    const double angle =
        static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
    out[2 * i] = std::sin(angle);
    out[2 * i + 1] = std::cos(angle);
  }
  return out;
}

Tensor intra_pe_table(std::size_t positions, std::size_t d_model) {
  Tensor t({positions, d_model});
  for (std::size_t p = 0; p < positions; ++p) {
    const auto row = intra_pe(p, d_model);
    std::copy(row.begin(), row.end(), t.data().begin() + static_cast<long>(p * d_model));
  }
  return t;
}

// --- plans -------------------------------------------------------------------

SequencePlan make_plan(const Vocabulary& vocab, const TermSets& terms, const StorySequence* story) {
  SequencePlan plan;
  for (std::size_t s = 0; s < terms.size(); ++s) {
    for (const auto& t : terms[s].terms) {
      plan.prefix_ids.push_back(vocab.id(t.str()));
      plan.prefix_image.push_back(static_cast<int>(s) + 1);
    }
  }
  auto push_story = [&](int id, int sentence, int position) {
    plan.story_ids.push_back(id);
    plan.story_sentence.push_back(sentence);
    plan.story_position.push_back(position);
  };
  push_story(Vocabulary::kBos, 1, 0);
  if (story) {
    for (std::size_t s = 0; s < story->sentences.size(); ++s) {
      const int sentence = static_cast<int>(s) + 1;
      if (s > 0) push_story(Vocabulary::kSep, sentence, 0);
      const auto& words = story->sentences[s];
      for (std::size_t w = 0; w < words.size(); ++w) push_story(vocab.id(words[w]), sentence, static_cast<int>(w) + 1);
    }
  }
  return plan;
}

std::vector<int> story_targets(const Vocabulary& vocab, const StorySequence& story) {
  std::vector<int> out;
  for (std::size_t s = 0; s < story.sentences.size(); ++s) {
    for (const auto& w : story.sentences[s]) out.push_back(vocab.id(w));
    out.push_back(s + 1 < story.sentences.size() ? Vocabulary::kSep : Vocabulary::kEos);
  }
  return out;
}

// --- decode config -----------------------------------------------------------

json DecodeConfig::to_json() const {
  return {{"mode", mode == DecodeMode::kGreedy ? "greedy" : "topk"},
          {"k", k},
          {"seed", seed},
          {"max_sentence_tokens", max_sentence_tokens}};
}

DecodeConfig DecodeConfig::from_json(const json& j) {
  DecodeConfig d;
  if (!j.is_object()) return d;
  const std::string mode = j.value("mode", std::string("greedy"));
  if (mode == "greedy") {
    d.mode = DecodeMode::kGreedy;
  } else if (mode == "topk") {
    d.mode = DecodeMode::kTopK;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "decode mode must be 'greedy' or 'topk'");
  }
  d.k = j.value("k", d.k);
  d.seed = j.value("seed", d.seed);
  d.max_sentence_tokens = j.value("max_sentence_tokens", d.max_sentence_tokens);
  if (d.mode == DecodeMode::kTopK && d.k == 0) throw Error(ErrorCode::kInvalidArgument, "top-k needs k >= 1");
  return d;
}

// --- model -------------------------------------------------------------------

StoryModel::StoryModel(StoryModelConfig cfg, Vocabulary vocab) : cfg_(cfg), vocab_(std::move(vocab)) {
  cfg_.vocab_size = vocab_.size();
  cfg_.validate();
  intra_table_ = intra_pe_table(cfg_.n_max + 1, cfg_.d_model);
  init_params();
}

void StoryModel::init_params() {
  Rng rng(cfg_.seed);
  const std::size_t d = cfg_.d_model, v = cfg_.vocab_size;
  auto linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    params_.add(name, Tensor::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in))));
  };
  auto ln = [&](const std::string& prefix) {
    params_.add(prefix + ".gamma", Tensor({d}, 1.0));
    params_.add(prefix + ".beta", Tensor({d}, 0.0));
  };
  params_.add("tok_emb", Tensor::randn({v, d}, rng, 0.02));
  params_.add("inter_pe", Tensor::randn({cfg_.sentences, d}, rng, 0.02));
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    ln(layer_name(l, "ln1"));
    linear(layer_name(l, "attn.wq"), d, d);
    linear(layer_name(l, "attn.wk"), d, d);
    linear(layer_name(l, "attn.wv"), d, d);
    linear(layer_name(l, "attn.wo"), d, d);
    params_.add(layer_name(l, "attn.bo"), Tensor({d}, 0.0));
    ln(layer_name(l, "ln2"));
    linear(layer_name(l, "ffn.w1"), d, cfg_.d_ff);
    params_.add(layer_name(l, "ffn.b1"), Tensor({cfg_.d_ff}, 0.0));
    linear(layer_name(l, "ffn.w2"), cfg_.d_ff, d);
    params_.add(layer_name(l, "ffn.b2"), Tensor({d}, 0.0));
  }
  ln("ln_f");
  params_.add("out.w", Tensor::randn({d, v}, rng, 0.02));
  params_.add("out.b", Tensor({v}, 0.0));
}

StoryModel::Binder StoryModel::trainable_binder(ad::Graph& g) {
  return [&g, this](const std::string& name) { return g.parameter(params_.at(name)); };
}

StoryModel::Binder StoryModel::frozen_binder(ad::Graph& g) const {
  return [&g, this](const std::string& name) { return g.constant(params_.at(name).value); };
}

std::vector<std::uint8_t> StoryModel::attention_mask(const SequencePlan& plan) const {
  const std::size_t p = plan.prefix_length(), n = plan.length();
  std::vector<std::uint8_t> allowed(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t limit = i < p ? p : i + 1;
    for (std::size_t j = 0; j < limit; ++j) allowed[i * n + j] = 1;
  }
  return allowed;
}

ad::Var StoryModel::embed_sequence(ad::Graph& /*g*/, const Binder& bind, const SequencePlan& plan) const {
  const std::size_t n = plan.length(), d = cfg_.d_model;
  if (plan.prefix_image.size() != plan.prefix_ids.size() || plan.story_sentence.size() != plan.story_ids.size() ||
      plan.story_position.size() != plan.story_ids.size()) {
    throw Error(ErrorCode::kInvalidArgument, "sequence plan: inconsistent field lengths");
  }
  if (plan.story_ids.empty()) throw Error(ErrorCode::kInvalidArgument, "sequence plan: no story tokens");
  if (n > cfg_.max_sequence_length()) {
    throw Error(ErrorCode::kOverflow, "sequence of " + std::to_string(n) + " tokens exceeds maximum " +
                                          std::to_string(cfg_.max_sequence_length()));
  }
  std::vector<int> ids, slots;
  ids.reserve(n);
  slots.reserve(n);
  Tensor positional({n, d});
  auto check_slot = [&](int s, const char* what) {
    if (s < 1 || static_cast<std::size_t>(s) > cfg_.sentences) {
      throw Error(ErrorCode::kInvalidArgument, std::string("sequence plan: ") + what + " index " + std::to_string(s) +
                                                   " outside 1..5");
    }
  };
  for (std::size_t i = 0; i < plan.prefix_length(); ++i) {
    check_slot(plan.prefix_image[i], "image");
    ids.push_back(plan.prefix_ids[i]);
    slots.push_back(plan.prefix_image[i] - 1);
  }
  for (std::size_t i = 0; i < plan.story_length(); ++i) {
    check_slot(plan.story_sentence[i], "sentence");
    const int pos = plan.story_position[i];
    if (pos < 0 || static_cast<std::size_t>(pos) > cfg_.n_max) {
      throw Error(ErrorCode::kInvalidArgument, "sequence plan: intra position " + std::to_string(pos) +
                                                   " outside 0.." + std::to_string(cfg_.n_max));
    }
    ids.push_back(plan.story_ids[i]);
    slots.push_back(plan.story_sentence[i] - 1);
    const std::size_t row = plan.prefix_length() + i;
    std::copy_n(intra_table_.data().begin() + static_cast<long>(static_cast<std::size_t>(pos) * d), d,
                positional.data().begin() + static_cast<long>(row * d));
  }
  ad::Var x = ad::add(ad::embed(bind("tok_emb"), ids), ad::embed(bind("inter_pe"), slots));
  return ad::add_constant(x, positional);
}

ad::Var StoryModel::forward(ad::Graph& g, const Binder& bind, const SequencePlan& plan, bool training,
                            Rng* rng) const {
  if (training && cfg_.dropout_rate > 0.0 && rng == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "forward: training with dropout needs an rng");
  }
  const double drop = training ? cfg_.dropout_rate : 0.0;
  auto maybe_dropout = [&](ad::Var v) { return drop > 0.0 ? ad::dropout(v, drop, *rng) : v; };
  const std::size_t d = cfg_.d_model, heads = cfg_.n_heads, dk = d / heads;
  const auto mask = attention_mask(plan);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  ad::Var x = embed_sequence(g, bind, plan);
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    ad::Var h = ad::layernorm(x, bind(layer_name(l, "ln1.gamma")), bind(layer_name(l, "ln1.beta")), kLayerNormEps);
    ad::Var q = ad::matmul(h, bind(layer_name(l, "attn.wq")));
    ad::Var k = ad::matmul(h, bind(layer_name(l, "attn.wk")));
    ad::Var v = ad::matmul(h, bind(layer_name(l, "attn.wv")));
    std::vector<ad::Var> head_out;
    head_out.reserve(heads);
    for (std::size_t hd = 0; hd < heads; ++hd) {
      ad::Var qh = ad::slice_cols(q, hd * dk, dk);
      ad::Var kh = ad::slice_cols(k, hd * dk, dk);
      ad::Var vh = ad::slice_cols(v, hd * dk, dk);
      ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_dk);
      head_out.push_back(ad::matmul(ad::masked_softmax(scores, mask), vh));
    }
    ad::Var attn = ad::add_bias(ad::matmul(ad::concat_cols(head_out), bind(layer_name(l, "attn.wo"))),
                                bind(layer_name(l, "attn.bo")));
    x = ad::add(x, maybe_dropout(attn));

    h = ad::layernorm(x, bind(layer_name(l, "ln2.gamma")), bind(layer_name(l, "ln2.beta")), kLayerNormEps);
    ad::Var f = ad::gelu(ad::add_bias(ad::matmul(h, bind(layer_name(l, "ffn.w1"))), bind(layer_name(l, "ffn.b1"))));
    f = ad::add_bias(ad::matmul(f, bind(layer_name(l, "ffn.w2"))), bind(layer_name(l, "ffn.b2")));
    x = ad::add(x, maybe_dropout(f));
  }
  x = ad::layernorm(x, bind("ln_f.gamma"), bind("ln_f.beta"), kLayerNormEps);
  ad::Var story = ad::slice_rows(x, plan.prefix_length(), plan.story_length());
  return ad::add_bias(ad::matmul(story, bind("out.w")), bind("out.b"));
}

Tensor StoryModel::logits(const SequencePlan& plan) const {
  ad::Graph g(false);
  return forward(g, frozen_binder(g), plan, false, nullptr).value();
}

ad::Var StoryModel::loss(ad::Graph& g, const Binder& bind, const TermStoryPair& pair, bool training,
                         Rng* rng) const {
  const SequencePlan plan = make_plan(vocab_, pair.term_sets, &pair.story);
  const auto targets = story_targets(vocab_, pair.story);
  return ad::cross_entropy(forward(g, bind, plan, training, rng), targets);
}

StorySequence StoryModel::generate(const TermSets& terms, const DecodeConfig& decode, GenerateInfo* info) const {
  if (!trained_) throw Error(ErrorCode::kUnavailable, "story model has no trained parameters");
  validate_term_sets(terms, cfg_.max_terms_per_image);
  const std::size_t cap =
      decode.max_sentence_tokens == 0 ? cfg_.n_max : std::min(decode.max_sentence_tokens, cfg_.n_max);
  Rng rng(decode.seed);
  GenerateInfo local;
  SequencePlan plan = make_plan(vocab_, terms, nullptr);
  StorySequence story;
  story.sentences.emplace_back();
  const int vocab_n = static_cast<int>(vocab_.size());

  std::vector<std::uint8_t> base_allowed(vocab_.size(), 1);
  base_allowed[Vocabulary::kPad] = 0;
  base_allowed[Vocabulary::kBos] = 0;
  for (int id = 0; id < vocab_n; ++id)
    if (vocab_.is_term_token(id)) base_allowed[static_cast<std::size_t>(id)] = 0;

  while (true) {
    const std::size_t sentence = story.sentences.size();
    const bool last = sentence == cfg_.sentences;
    auto& words = story.sentences.back();
    int next;
    if (words.size() >= cap) {
      next = last ? Vocabulary::kEos : Vocabulary::kSep;
      local.truncated = true;
    } else {
      auto allowed = base_allowed;
      allowed[Vocabulary::kSep] = !words.empty() && !last;
      allowed[Vocabulary::kEos] = !words.empty() && last;
      const Tensor lg = logits(plan);
      const std::size_t row = lg.rows() - 1;
      std::vector<std::pair<double, int>> cand;
      for (int id = 0; id < vocab_n; ++id)
        if (allowed[static_cast<std::size_t>(id)]) cand.emplace_back(lg.at(row, static_cast<std::size_t>(id)), id);
      std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      if (decode.mode == DecodeMode::kGreedy || decode.k <= 1) {
        next = cand.front().second;
      } else {
        const std::size_t k = std::min(decode.k, cand.size());
        double z = 0.0;
        std::vector<double> w(k);
        for (std::size_t i = 0; i < k; ++i) z += (w[i] = std::exp(cand[i].first - cand[0].first));
        double u = rng.uniform() * z;
        std::size_t pick = 0;
        while (pick + 1 < k && u >= w[pick]) u -= w[pick++];
        next = cand[pick].second;
      }
    }
    ++local.steps;
    if (next == Vocabulary::kEos) break;
    if (next == Vocabulary::kSep) {
      story.sentences.emplace_back();
      plan.story_ids.push_back(Vocabulary::kSep);
      plan.story_sentence.push_back(static_cast<int>(story.sentences.size()));
      plan.story_position.push_back(0);
      continue;
    }
    words.push_back(vocab_.token(next));
    plan.story_ids.push_back(next);
    plan.story_sentence.push_back(static_cast<int>(sentence));
    plan.story_position.push_back(static_cast<int>(words.size()));
  }
  if (info) *info = local;
  return story;
}

void StoryModel::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  ckpt.kind = kCheckpointKind;
  ckpt.config = cfg_.to_json();
  ckpt.config["trained"] = trained_;
  ckpt.vocab = vocab_.tokens();
  for (const auto& [name, p] : params_) ckpt.params.add(name, p.value, p.trainable);
  save_checkpoint(path, ckpt);
}

StoryModel StoryModel::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != kCheckpointKind) {
    throw Error(ErrorCode::kParse, path.string() + ": expected a story_model checkpoint, got '" + ckpt.kind + "'");
  }
  StoryModel model(StoryModelConfig::from_json(ckpt.config), Vocabulary(ckpt.vocab));
  assign_tensors(ckpt.params, model.params_);
  model.trained_ = ckpt.config.value("trained", false);
  return model;
}

// --- training ----------------------------------------------------------------

TrainResult train_story_model(StoryModel& model, std::span<const TermStoryPair> corpus, const StoryTrainConfig& cfg) {
  if (corpus.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot train on an empty corpus");
  if (cfg.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be positive");
  for (const auto& pair : corpus) {
    pair.story.validate(model.config().n_max);
    validate_term_sets(pair.term_sets, model.config().max_terms_per_image);
  }
  Adam adam({.lr = cfg.lr, .clip_norm = cfg.clip_norm});
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  auto next_index = [&] {
    if (cursor == order.size()) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      cursor = 0;
    }
    return order[cursor++];
  };

  TrainResult result;
  result.loss_curve.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    model.params().zero_grad();
    ad::Graph g;
    auto bind = model.trainable_binder(g);
    std::vector<std::size_t> batch;
    std::size_t total_tokens = 0;
    for (std::size_t b = 0; b < std::min(cfg.batch_size, corpus.size()); ++b) {
      batch.push_back(next_index());
      total_tokens += corpus[batch.back()].story.token_count() + kStorySentences;
    }
    ad::Var total;
    for (std::size_t idx : batch) {
      const auto& pair = corpus[idx];
      const double weight =
          static_cast<double>(pair.story.token_count() + kStorySentences) / static_cast<double>(total_tokens);
      ad::Var l = ad::scale(model.loss(g, bind, pair, true, &rng), weight);
      total = total.valid() ? ad::add(total, l) : l;
    }
    result.loss_curve.push_back(total.value()[0]);
    g.backward(total);
    adam.step(model.params());
    if (cfg.on_step) cfg.on_step(step, result.loss_curve.back());
  }
  model.mark_trained();
  return result;
}

double story_corpus_loss(const StoryModel& model, std::span<const TermStoryPair> corpus) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& pair : corpus) {
    ad::Graph g(false);
    const double l = model.loss(g, model.frozen_binder(g), pair, false, nullptr).value()[0];
    const std::size_t n = pair.story.token_count() + kStorySentences;
    total += l * static_cast<double>(n);
    tokens += n;
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

double token_match(const StorySequence& generated, const StorySequence& reference) {
  std::size_t matched = 0, denom = 0;
  const std::size_t n = std::max(generated.sentences.size(), reference.sentences.size());
  for (std::size_t s = 0; s < n; ++s) {
    static const std::vector<std::string> kEmpty;
    const auto& a = s < generated.sentences.size() ? generated.sentences[s] : kEmpty;
    const auto& b = s < reference.sentences.size() ? reference.sentences[s] : kEmpty;
    denom += std::max(a.size(), b.size());
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) matched += a[i] == b[i];
  }
  return denom ? static_cast<double>(matched) / static_cast<double>(denom) : 1.0;
}

}  // namespace termstory
