#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "termstory/error.hpp"
#include "termstory/image_term_model.hpp"
#include "termstory/lexicon.hpp"
#include "termstory/rng.hpp"
#include "termstory/termex.hpp"
#include "test_util.hpp"

using namespace termstory;
using termstory::testutil::fixture;

namespace {

ImageFeature random_feature(const std::string& id, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  ImageFeature f{id, {}};
  for (std::size_t i = 0; i < d; ++i) f.vector.push_back(rng.normal());
  return f;
}

std::vector<TermExample> examples(std::size_t d) {
  const std::vector<std::vector<Term>> lists = {
      {Term::noun("man"), Term::noun("bike"), Term::frame("Change_posture")},
      {Term::noun("rider"), Term::noun("motorcycle"), Term::frame("Operate_vehicle")},
      {Term::noun("sign"), Term::frame("Preventing_or_letting")},
      {Term::noun("boy"), Term::noun("seat")},
  };
  std::vector<TermExample> out;
  for (std::size_t i = 0; i < lists.size(); ++i) out.push_back({random_feature("img" + std::to_string(i), d, i), lists[i]});
  return out;
}

TermDecoder make_decoder(const std::vector<TermExample>& ex, std::size_t d_img, std::size_t hidden) {
  std::vector<std::vector<Term>> lists;
  for (const auto& e : ex) lists.push_back(e.terms);
  TermDecoderConfig cfg;
  cfg.d_img = d_img;
  cfg.d_hidden = hidden;
  cfg.seed = 5;
  return TermDecoder(cfg, TermVocabulary::build(lists));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Features, JsonlRoundTrip) {
  testutil::TempDir dir;
  const std::vector<ImageFeature> feats = {random_feature("a", 6, 1), random_feature("b", 6, 2)};
  save_features_jsonl(dir / "f.jsonl", feats);
  EXPECT_EQ(load_features(dir / "f.jsonl", 6), feats);
}

TEST(Features, BinaryRoundTrip) {
  testutil::TempDir dir;
  const std::vector<ImageFeature> feats = {random_feature("x", 2048, 3), random_feature("y-2", 2048, 4)};
  save_features_binary(dir / "f.bin", feats);
  std::ifstream in(dir / "f.bin", std::ios::binary);
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  EXPECT_EQ(magic, kFeatureMagic);
  EXPECT_EQ(load_features(dir / "f.bin"), feats);
}

TEST(Features, WrongDimensionNamesImage) {
  std::istringstream in(R"({"image_id":"ok","vector":[1,2,3]}
{"image_id":"short-one","vector":[1,2]}
)");
  try {
    parse_features_jsonl(in, "mem");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("short-one"), std::string::npos) << e.what();
  }
  std::istringstream in2(R"({"image_id":"a","vector":[1,2]})");
  EXPECT_THROW(parse_features_jsonl(in2, "mem", 3), Error);
}

TEST(Features, RejectsDuplicatesAndNonFinite) {
  std::istringstream dup(R"({"image_id":"a","vector":[1]}
{"image_id":"a","vector":[2]}
)");
  EXPECT_THROW(parse_features_jsonl(dup, "mem"), Error);
  std::istringstream bad(R"({"image_id":"a","vector":[1, "x"]})");
  EXPECT_THROW(parse_features_jsonl(bad, "mem"), Error);
  std::istringstream truncated(std::string(kFeatureMagic) + "\x04\x00\x00\x00");
  EXPECT_THROW(parse_features_binary(truncated, "mem"), Error);
}

TEST(Features, PoolFixtureLoads) {
  const auto feats = load_features(fixture("pool/pool.jsonl"));
  EXPECT_EQ(feats.size(), 10u);
  EXPECT_EQ(feats[0].image_id, "pool-01");
  EXPECT_EQ(feats[0].vector.size(), 32u);
}

TEST(TermVocab, Layout) {
  const std::vector<std::vector<Term>> lists = {{Term::noun("z"), Term::frame("A")}, {Term::noun("b")}};
  const TermVocabulary v = TermVocabulary::build(lists);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<eos>", "<unk>", "b", "f:A", "z"}));
  EXPECT_EQ(v.id(Term::noun("missing")), TermVocabulary::kUnk);
}

TEST(CanonicalOrder, NounsThenFramesDeduplicated) {
  const std::vector<Term> in = {Term::frame("Sleep"), Term::noun("man"), Term::frame("Sleep"), Term::noun("bike"),
                                Term::noun("man")};
  EXPECT_EQ(canonical_term_order(in),
            (std::vector<Term>{Term::noun("man"), Term::noun("bike"), Term::frame("Sleep")}));
}

TEST(CanonicalOrder, CaptionTerms) {
  const Lexicon lex = load_lexicon(fixture("lexicon.tsv"));
  const RulePosTagger pos(lex);
  EXPECT_EQ(caption_terms(lex, pos, "The man was sitting on his bike. He slept.", 8),
            (std::vector<Term>{Term::noun("man"), Term::noun("bike"), Term::frame("Change_posture"),
                               Term::frame("Sleep")}));
  EXPECT_EQ(caption_terms(lex, pos, "The man was sitting on his bike.", 2).size(), 2u);
}

TEST(Lstm, StepMatchesReference) {
  Rng rng(8);
  const Tensor x = Tensor::randn({1, 3}, rng, 1.0), h = Tensor::randn({1, 2}, rng, 1.0),
               c = Tensor::randn({1, 2}, rng, 1.0), wx = Tensor::randn({3, 8}, rng, 1.0),
               wh = Tensor::randn({2, 8}, rng, 1.0), b = Tensor::randn({8}, rng, 1.0);
  ad::Graph g(false);
  const LstmStep s = lstm_step(g.constant(x), g.constant(h), g.constant(c), g.constant(wx), g.constant(wh),
                               g.constant(b));
  double pre[8];
  for (std::size_t j = 0; j < 8; ++j) {
    pre[j] = b[j];
    for (std::size_t k = 0; k < 3; ++k) pre[j] += x[k] * wx.at(k, j);
    for (std::size_t k = 0; k < 2; ++k) pre[j] += h[k] * wh.at(k, j);
  }
  for (std::size_t u = 0; u < 2; ++u) {
    const double i = sigmoid(pre[u]), f = sigmoid(pre[2 + u]), o = sigmoid(pre[4 + u]), gg = std::tanh(pre[6 + u]);
    const double c2 = f * c[u] + i * gg;
    EXPECT_NEAR(s.c.value()[u], c2, 1e-14);
    EXPECT_NEAR(s.h.value()[u], o * std::tanh(c2), 1e-14);
  }
}

TEST(Lstm, GatesStayInRange) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const double s = 0.1 + trial;
    ad::Graph g(false);
    const LstmStep st = lstm_step(g.constant(Tensor::randn({1, 4}, rng, s)), g.constant(Tensor::randn({1, 3}, rng, s)),
                                  g.constant(Tensor::randn({1, 3}, rng, s)), g.constant(Tensor::randn({4, 12}, rng, s)),
                                  g.constant(Tensor::randn({3, 12}, rng, s)), g.constant(Tensor::randn({12}, rng, s)));
    for (const ad::Var& gate : {st.input_gate, st.forget_gate, st.output_gate})
      for (double v : gate.value().storage()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
    for (double v : st.candidate.value().storage()) EXPECT_LE(std::abs(v), 1.0);
    for (double v : st.h.value().storage()) EXPECT_LE(std::abs(v), 1.0);
  }
}

TEST(TermDecoder, InitialLossNearLogVocab) {
  const auto ex = examples(64);
  TermDecoder m = make_decoder(ex, 64, 32);
  const double ln_v = std::log(static_cast<double>(m.vocab().size()));
  for (const auto& e : ex) {
    ad::Graph g(false);
    EXPECT_NEAR(m.loss(g, m.frozen_binder(g), e.feature, e.terms).value()[0], ln_v, 0.1 * ln_v);
  }
}

TEST(TermDecoder, ForgetBiasStartsAtOne) {
  const auto ex = examples(8);
  const TermDecoder m = make_decoder(ex, 8, 4);
  const Tensor& b = m.params().at("lstm.b").value;
  for (std::size_t u = 0; u < 4; ++u) {
    EXPECT_EQ(b[u], 0.0);
    EXPECT_EQ(b[4 + u], 1.0);
  }
}

TEST(TermDecoder, UntrainedAndBadInput) {
  const auto ex = examples(8);
  TermDecoder m = make_decoder(ex, 8, 4);
  try {
    m.predict(ex[0].feature, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnavailable);
  }
  m.mark_trained();
  EXPECT_TRUE(m.predict(ex[0].feature, 0).empty());
  EXPECT_THROW(m.predict(random_feature("wide", 9, 1), 8), Error);
}

TEST(TermDecoder, OverfitsSinglePair) {
  auto ex = examples(32);
  ex.resize(1);
  TermDecoder m = make_decoder(ex, 32, 16);
  TermTrainConfig tc;
  tc.steps = 200;
  tc.lr = 1e-2;
  const auto curve = train_term_decoder(m, ex, tc);
  EXPECT_LT(curve.back(), curve.front());
  EXPECT_EQ(m.predict(ex[0].feature, 8), ex[0].terms);
}

TEST(TermDecoder, TrainingIsDeterministic) {
  const auto ex = examples(16);
  TermDecoder a = make_decoder(ex, 16, 8), b = make_decoder(ex, 16, 8);
  TermTrainConfig tc;
  tc.steps = 20;
  tc.batch_size = 2;
  EXPECT_EQ(train_term_decoder(a, ex, tc), train_term_decoder(b, ex, tc));
  for (const auto& [name, p] : a.params()) EXPECT_EQ(p.value, b.params().at(name).value);
}

TEST(TermDecoder, PredictionsHaveNoDuplicatesOrUnknowns) {
  const auto ex = examples(16);
  TermDecoder m = make_decoder(ex, 16, 8);
  Rng r(1);
  for (auto& [name, p] : m.params())
    for (auto& v : p.value.storage()) v += r.normal(0.0, 1.0);
  m.mark_trained();
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto terms = m.predict(random_feature("r", 16, 100 + s), 8);
    EXPECT_LE(terms.size(), 8u);
    std::set<Term> uniq(terms.begin(), terms.end());
    EXPECT_EQ(uniq.size(), terms.size());
    for (const auto& t : terms) EXPECT_NE(t.str(), "<unk>");
  }
}

TEST(TermDecoder, CheckpointRoundTrip) {
  testutil::TempDir dir;
  const auto ex = examples(16);
  TermDecoder m = make_decoder(ex, 16, 8);
  TermTrainConfig tc;
  tc.steps = 5;
  train_term_decoder(m, ex, tc);
  m.save(dir / "terms.json");
  const TermDecoder back = TermDecoder::load(dir / "terms.json");
  EXPECT_TRUE(back.trained());
  EXPECT_EQ(back.vocab().tokens(), m.vocab().tokens());
  for (const auto& e : ex) EXPECT_EQ(back.predict(e.feature, 8), m.predict(e.feature, 8));
}
