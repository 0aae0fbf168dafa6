#include "termstory/image_term_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "termstory/checkpoint.hpp"
#include "termstory/error.hpp"
#include "termstory/lexicon.hpp"
#include "termstory/rng.hpp"
#include "termstory/termex.hpp"
#include "termstory/text.hpp"

namespace termstory {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary feature IO assumes a little-endian host");

namespace {

constexpr std::string_view kCheckpointKind = "term_decoder";
const std::vector<std::string> kSpecialTerms = {"<eos>", "<unk>"};

void check_features(std::span<const ImageFeature> feats, std::optional<std::size_t> expected_dim,
                    const std::string& source) {
  std::unordered_set<std::string> ids;
  const std::size_t dim = expected_dim ? *expected_dim : (feats.empty() ? 0 : feats.front().vector.size());
  for (const auto& f : feats) {
    if (f.image_id.empty()) throw Error(ErrorCode::kParse, source + ": empty image_id");
    if (f.vector.size() != dim) {
      throw Error(ErrorCode::kShape, source + ": feature '" + f.image_id + "' has " + std::to_string(f.vector.size()) +
                                         " values, expected " + std::to_string(dim));
    }
    for (double x : f.vector) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kNonFinite, source + ": feature '" + f.image_id + "' is not finite");
    }
    if (!ids.insert(f.image_id).second) {
      throw Error(ErrorCode::kDuplicate, source + ": duplicate image_id '" + f.image_id + "'");
    }
  }
}

template <typename T>
T read_pod(std::istream& in, const std::string& source) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(ErrorCode::kParse, source + ": truncated binary feature file");
  return v;
}

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

// --- feature IO ----------------------------------------------------------------

std::vector<ImageFeature> parse_features_jsonl(std::istream& in, const std::string& source,
                                               std::optional<std::size_t> expected_dim) {
  std::vector<ImageFeature> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("image_id").get<std::string>(), j.at("vector").get<std::vector<double>>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  check_features(out, expected_dim, source);
  return out;
}

std::vector<ImageFeature> parse_features_binary(std::istream& in, const std::string& source,
                                                std::optional<std::size_t> expected_dim) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::string_view(magic, sizeof magic) != kFeatureMagic) {
    throw Error(ErrorCode::kParse, source + ": bad magic in binary feature file");
  }
  const auto dim = read_pod<std::uint32_t>(in, source);
  const auto count = read_pod<std::uint32_t>(in, source);
  if (expected_dim && dim != *expected_dim) {
    throw Error(ErrorCode::kShape, source + ": d_img " + std::to_string(dim) + ", expected " +
                                       std::to_string(*expected_dim));
  }
  std::vector<ImageFeature> out(count);
  for (auto& f : out) {
    const auto len = read_pod<std::uint32_t>(in, source);
    f.image_id.resize(len);
    if (!in.read(f.image_id.data(), len)) throw Error(ErrorCode::kParse, source + ": truncated image id");
  }
  for (auto& f : out) {
    f.vector.resize(dim);
    if (!in.read(reinterpret_cast<char*>(f.vector.data()), static_cast<std::streamsize>(dim * sizeof(double)))) {
      throw Error(ErrorCode::kParse, source + ": truncated feature data");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::kParse, source + ": trailing bytes");
  check_features(out, dim, source);
  return out;
}

std::vector<ImageFeature> load_features(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  char head[8] = {};
  in.read(head, sizeof head);
  const bool binary = in.gcount() == 8 && std::string_view(head, 8) == kFeatureMagic;
  in.clear();
  in.seekg(0);
  return binary ? parse_features_binary(in, path.string(), expected_dim)
                : parse_features_jsonl(in, path.string(), expected_dim);
}

void save_features_jsonl(const std::filesystem::path& path, std::span<const ImageFeature> features) {
  check_features(features, std::nullopt, path.string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& f : features) {
    nlohmann::ordered_json j;
    j["image_id"] = f.image_id;
    j["vector"] = f.vector;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

void save_features_binary(const std::filesystem::path& path, std::span<const ImageFeature> features) {
  check_features(features, std::nullopt, path.string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(kFeatureMagic.data(), static_cast<std::streamsize>(kFeatureMagic.size()));
  write_pod(out, static_cast<std::uint32_t>(features.empty() ? 0 : features.front().vector.size()));
  write_pod(out, static_cast<std::uint32_t>(features.size()));
  for (const auto& f : features) {
    write_pod(out, static_cast<std::uint32_t>(f.image_id.size()));
    out.write(f.image_id.data(), static_cast<std::streamsize>(f.image_id.size()));
  }
  for (const auto& f : features) {
    out.write(reinterpret_cast<const char*>(f.vector.data()),
              static_cast<std::streamsize>(f.vector.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

// --- vocabulary ------------------------------------------------------------------

TermVocabulary::TermVocabulary() : TermVocabulary(kSpecialTerms) {}

TermVocabulary::TermVocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kSpecialTerms.size() ||
      !std::equal(kSpecialTerms.begin(), kSpecialTerms.end(), tokens_.begin())) {
    throw Error(ErrorCode::kInvalidArgument, "term vocabulary must start with <eos>, <unk>");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::kDuplicate, "duplicate term vocabulary entry '" + tokens_[i] + "'");
    }
  }
}

TermVocabulary TermVocabulary::build(std::span<const std::vector<Term>> term_lists, std::size_t max_size) {
  std::set<std::string> seen;
  for (const auto& list : term_lists)
    for (const auto& t : list) seen.insert(t.str());
  if (seen.size() + kSpecialTerms.size() > max_size) {
    throw Error(ErrorCode::kOverflow, "term vocabulary exceeds limit " + std::to_string(max_size));
  }
  std::vector<std::string> tokens = kSpecialTerms;
  tokens.insert(tokens.end(), seen.begin(), seen.end());
  return TermVocabulary(std::move(tokens));
}

int TermVocabulary::id(const Term& t) const {
  auto it = index_.find(t.str());
  return it == index_.end() ? kUnk : it->second;
}

const std::string& TermVocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "term id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<Term> canonical_term_order(std::span<const Term> terms) {
  std::vector<Term> out;
  for (const bool frames : {false, true}) {
    for (const auto& t : terms) {
      if (t.is_frame() == frames && std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    }
  }
  return out;
}

std::vector<Term> caption_terms(const Lexicon& lex, const PosOracle& pos, const std::string& caption,
                                std::size_t max_terms) {
  std::vector<Term> all;
  for (const auto& sentence : split_sentences(tokenize(caption))) {
    auto terms = extract_terms(lex, sentence, pos, max_terms);
    all.insert(all.end(), terms.begin(), terms.end());
  }
  auto out = canonical_term_order(all);
  if (out.size() > max_terms) out.resize(max_terms);
  return out;
}

// --- config ----------------------------------------------------------------------

void TermDecoderConfig::validate() const {
  if (d_img == 0 || d_hidden == 0) throw Error(ErrorCode::kInvalidArgument, "term decoder: dimensions must be positive");
  if (term_vocab_size < kSpecialTerms.size()) {
    throw Error(ErrorCode::kInvalidArgument, "term decoder: vocabulary must include <eos> and <unk>");
  }
}

json TermDecoderConfig::to_json() const {
  return {{"d_img", d_img}, {"d_hidden", d_hidden}, {"term_vocab_size", term_vocab_size},
          {"max_terms", max_terms}, {"seed", seed}};
}

TermDecoderConfig TermDecoderConfig::from_json(const json& j) {
  TermDecoderConfig c;
  try {
    c.d_img = j.at("d_img").get<std::size_t>();
    c.d_hidden = j.at("d_hidden").get<std::size_t>();
    c.term_vocab_size = j.at("term_vocab_size").get<std::size_t>();
    c.max_terms = j.at("max_terms").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("term decoder config: ") + e.what());
  }
  return c;
}

// --- model -----------------------------------------------------------------------

LstmStep lstm_step(ad::Var x, ad::Var h, ad::Var c, ad::Var w_x, ad::Var w_h, ad::Var bias) {
  const std::size_t hidden = h.cols();
  if (w_x.cols() != 4 * hidden || w_h.cols() != 4 * hidden) {
    throw Error(ErrorCode::kShape, "lstm_step: gate weights must have 4 * hidden columns");
  }
  ad::Var z = ad::add_bias(ad::add(ad::matmul(x, w_x), ad::matmul(h, w_h)), bias);
  LstmStep s;
  s.input_gate = ad::sigmoid(ad::slice_cols(z, 0, hidden));
  s.forget_gate = ad::sigmoid(ad::slice_cols(z, hidden, hidden));
  s.output_gate = ad::sigmoid(ad::slice_cols(z, 2 * hidden, hidden));
  s.candidate = ad::tanh(ad::slice_cols(z, 3 * hidden, hidden));
  s.c = ad::add(ad::mul(s.forget_gate, c), ad::mul(s.input_gate, s.candidate));
  s.h = ad::mul(s.output_gate, ad::tanh(s.c));
  return s;
}

TermDecoder::TermDecoder(TermDecoderConfig cfg, TermVocabulary vocab) : cfg_(cfg), vocab_(std::move(vocab)) {
  cfg_.term_vocab_size = vocab_.size();
  cfg_.validate();
  init_params();
}

void TermDecoder::init_params() {
  Rng rng(cfg_.seed);
  const std::size_t h = cfg_.d_hidden, v = cfg_.term_vocab_size;
  auto linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    params_.add(name, Tensor::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in))));
  };
  linear("proj.w", cfg_.d_img, h);
  params_.add("proj.b", Tensor({h}, 0.0));
  params_.add("term_emb", Tensor::randn({v, h}, rng, 0.1));
  linear("lstm.wx", h, 4 * h);
  linear("lstm.wh", h, 4 * h);
  Tensor bias({4 * h}, 0.0);
  for (std::size_t i = h; i < 2 * h; ++i) bias[i] = 1.0;  // forget gate
  params_.add("lstm.b", std::move(bias));
  params_.add("out.w", Tensor::randn({h, v}, rng, 0.02));
  params_.add("out.b", Tensor({v}, 0.0));
}

TermDecoder::Binder TermDecoder::trainable_binder(ad::Graph& g) {
  return [&g, this](const std::string& name) { return g.parameter(params_.at(name)); };
}

TermDecoder::Binder TermDecoder::frozen_binder(ad::Graph& g) const {
  return [&g, this](const std::string& name) { return g.constant(params_.at(name).value); };
}

void TermDecoder::check_feature(const ImageFeature& feat) const {
  if (feat.vector.size() != cfg_.d_img) {
    throw Error(ErrorCode::kShape, "feature '" + feat.image_id + "' has " + std::to_string(feat.vector.size()) +
                                       " values, model expects " + std::to_string(cfg_.d_img));
  }
}

ad::Var TermDecoder::project(ad::Graph& g, const Binder& bind, const ImageFeature& feat) const {
  check_feature(feat);
  ad::Var x = g.constant(Tensor({1, cfg_.d_img}, feat.vector));
  return ad::add_bias(ad::matmul(x, bind("proj.w")), bind("proj.b"));
}

ad::Var TermDecoder::loss(ad::Graph& g, const Binder& bind, const ImageFeature& feat,
                          std::span<const Term> terms) const {
  std::vector<int> ids;
  for (const auto& t : terms) ids.push_back(vocab_.id(t));
  const ad::Var wx = bind("lstm.wx"), wh = bind("lstm.wh"), b = bind("lstm.b");
  const ad::Var table = bind("term_emb");
  ad::Var h = g.constant(Tensor({1, cfg_.d_hidden}));
  ad::Var c = g.constant(Tensor({1, cfg_.d_hidden}));
  ad::Var x = project(g, bind, feat);
  std::vector<ad::Var> outputs;
  for (std::size_t t = 0; t <= ids.size(); ++t) {
    const LstmStep s = lstm_step(x, h, c, wx, wh, b);
    h = s.h;
    c = s.c;
    outputs.push_back(h);
    if (t < ids.size()) x = ad::embed(table, std::span<const int>(&ids[t], 1));
  }
  ad::Var logits = ad::add_bias(ad::matmul(ad::concat_rows(outputs), bind("out.w")), bind("out.b"));
  std::vector<int> targets = ids;
  targets.push_back(TermVocabulary::kEos);
  return ad::cross_entropy(logits, targets);
}

std::vector<Term> TermDecoder::predict(const ImageFeature& feat, std::size_t max_terms) const {
  if (!trained_) throw Error(ErrorCode::kUnavailable, "term decoder has no trained parameters");
  check_feature(feat);
  std::vector<Term> out;
  if (max_terms == 0) return out;
  ad::Graph g(false);
  const Binder bind = frozen_binder(g);
  const ad::Var wx = bind("lstm.wx"), wh = bind("lstm.wh"), b = bind("lstm.b");
  const ad::Var table = bind("term_emb"), ow = bind("out.w"), ob = bind("out.b");
  ad::Var h = g.constant(Tensor({1, cfg_.d_hidden}));
  ad::Var c = g.constant(Tensor({1, cfg_.d_hidden}));
  ad::Var x = project(g, bind, feat);
  for (std::size_t step = 0; step < max_terms; ++step) {
    const LstmStep s = lstm_step(x, h, c, wx, wh, b);
    h = s.h;
    c = s.c;
    const Tensor logits = ad::add_bias(ad::matmul(h, ow), ob).value();
    int best = TermVocabulary::kEos;
    for (std::size_t id = 0; id < logits.cols(); ++id) {
      if (static_cast<int>(id) == TermVocabulary::kUnk) continue;
      if (logits.at(0, id) > logits.at(0, static_cast<std::size_t>(best))) best = static_cast<int>(id);
    }
    if (best == TermVocabulary::kEos) break;
    Term term = Term::parse(vocab_.token(best));
    if (std::find(out.begin(), out.end(), term) == out.end()) out.push_back(std::move(term));
    x = ad::embed(table, std::span<const int>(&best, 1));
  }
  return out;
}

void TermDecoder::save(const std::filesystem::path& path) const {
  Checkpoint ckpt;
  ckpt.kind = kCheckpointKind;
  ckpt.config = cfg_.to_json();
  ckpt.config["trained"] = trained_;
  ckpt.vocab = vocab_.tokens();
  for (const auto& [name, p] : params_) ckpt.params.add(name, p.value, p.trainable);
  save_checkpoint(path, ckpt);
}

TermDecoder TermDecoder::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != kCheckpointKind) {
    throw Error(ErrorCode::kParse, path.string() + ": expected a term_decoder checkpoint, got '" + ckpt.kind + "'");
  }
  TermDecoder model(TermDecoderConfig::from_json(ckpt.config), TermVocabulary(ckpt.vocab));
  assign_tensors(ckpt.params, model.params_);
  model.trained_ = ckpt.config.value("trained", false);
  return model;
}

std::vector<double> train_term_decoder(TermDecoder& model, std::span<const TermExample> examples,
                                       const TermTrainConfig& cfg) {
  if (examples.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot train on an empty example list");
  if (cfg.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be positive");
  for (const auto& ex : examples) {
    if (ex.feature.vector.size() != model.config().d_img) {
      throw Error(ErrorCode::kShape, "feature '" + ex.feature.image_id + "' does not match d_img " +
                                         std::to_string(model.config().d_img));
    }
  }
  Adam adam({.lr = cfg.lr, .clip_norm = cfg.clip_norm});
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<double> curve;
  curve.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    model.params().zero_grad();
    ad::Graph g;
    const auto bind = model.trainable_binder(g);
    const std::size_t n = std::min(cfg.batch_size, examples.size());
    ad::Var total;
    for (std::size_t b = 0; b < n; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        cursor = 0;
      }
      const auto& ex = examples[order[cursor++]];
      ad::Var l = ad::scale(model.loss(g, bind, ex.feature, ex.terms), 1.0 / static_cast<double>(n));
      total = total.valid() ? ad::add(total, l) : l;
    }
    curve.push_back(total.value()[0]);
    g.backward(total);
    adam.step(model.params());
    if (cfg.on_step) cfg.on_step(step, curve.back());
  }
  model.mark_trained();
  return curve;
}

}  // namespace termstory
