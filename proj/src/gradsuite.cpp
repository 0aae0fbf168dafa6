#include "termstory/gradsuite.hpp"

#include <functional>

#include "termstory/image_term_model.hpp"
#include "termstory/rng.hpp"
#include "termstory/story_model.hpp"

namespace termstory {

namespace {

using Builder = std::function<ad::Var(ad::Graph&, ParamStore&)>;

/// Reduces a tensor to a scalar through fixed random weights so that no
/// gradient is trivially zero (e.g. sum of a softmax row).
ad::Var weighted_sum(ad::Graph& g, ad::Var x, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(x, g.constant(Tensor::randn(x.shape(), rng, 1.0))));
}

GradSuiteCase run_case(const std::string& name, ParamStore params, const Builder& build) {
  auto loss = [&](ad::Graph& g) { return build(g, params); };
  return {name, check_gradients(params, loss)};
}

ParamStore store(Rng& rng, std::initializer_list<std::pair<const char*, Shape>> specs) {
  ParamStore ps;
  for (const auto& [name, shape] : specs) ps.add(name, Tensor::randn(shape, rng, 1.0));
  return ps;
}

TermStoryPair tiny_pair() {
  TermStoryPair pair;
  pair.term_sets = empty_term_sets();
  pair.term_sets[0].terms = {Term::noun("man"), Term::frame("Placing"), Term::noun("bike")};
  pair.term_sets[2].terms = {Term::noun("trees")};
  pair.term_sets[4].terms = {Term::noun("boy"), Term::noun("seat")};
  pair.story.sentences = {{"the", "man", "sat", "."},
                          {"he", "rode", "."},
                          {"trees", "stood", "."},
                          {"he", "sat", "down", "."},
                          {"the", "boy", "slept", "."}};
  return pair;
}

}  // namespace

std::vector<GradSuiteCase> run_gradient_suite(std::uint64_t seed) {
  Rng rng(seed);
  const std::uint64_t w = seed * 7919 + 1;
  std::vector<GradSuiteCase> out;
  auto P = [](ad::Graph& g, ParamStore& ps, const char* n) { return g.parameter(ps.at(n)); };

  out.push_back(run_case("matmul", store(rng, {{"a", {3, 4}}, {"b", {4, 2}}}), [&](ad::Graph& g, ParamStore& ps) {
    return weighted_sum(g, ad::matmul(P(g, ps, "a"), P(g, ps, "b")), w);
  }));
  out.push_back(run_case("transpose", store(rng, {{"a", {3, 4}}}), [&](ad::Graph& g, ParamStore& ps) {
    return weighted_sum(g, ad::transpose(P(g, ps, "a")), w);
  }));
  out.push_back(run_case("add_sub_mul", store(rng, {{"a", {2, 3}}, {"b", {2, 3}}}), [&](ad::Graph& g, ParamStore& ps) {
    ad::Var a = P(g, ps, "a"), b = P(g, ps, "b");
    return weighted_sum(g, ad::mul(ad::add(a, b), ad::sub(a, b)), w);
  }));
  out.push_back(run_case("add_bias", store(rng, {{"x", {3, 4}}, {"b", {4}}}), [&](ad::Graph& g, ParamStore& ps) {
    return weighted_sum(g, ad::add_bias(P(g, ps, "x"), P(g, ps, "b")), w);
  }));
  out.push_back(run_case("add_constant_scale", store(rng, {{"x", {2, 5}}}), [&](ad::Graph& g, ParamStore& ps) {
    Rng c(w);
    return weighted_sum(g, ad::scale(ad::add_constant(P(g, ps, "x"), Tensor::randn({2, 5}, c, 1.0)), -1.7), w + 1);
  }));
  out.push_back(run_case("sum_mean", store(rng, {{"x", {3, 3}}}), [&](ad::Graph& g, ParamStore& ps) {
    ad::Var x = P(g, ps, "x");
    return ad::add(ad::mul(ad::sum(x), ad::sum(x)), ad::mean(ad::mul(x, x)));
  }));
  out.push_back(run_case("sigmoid", store(rng, {{"x", {2, 4}}}), [&](ad::Graph& g, ParamStore& ps) {
    return weighted_sum(g, ad::sigmoid(P(g, ps, "x")), w);
  }));
  out.push_back(run_case("tanh", store(rng, {{"x", {2, 4}}}), [&](ad::Graph& g, ParamStore& ps) {
    return weighted_sum(g, ad::tanh(P(g, ps, "x")), w);
  }));
  out.push_back(run_case("relu", store(rng, {{"x", {2, 4}}}), [&](ad::Graph& g, ParamStore& ps) {
    return weighted_sum(g, ad::relu(P(g, ps, "x")), w);
  }));
  out.push_back(run_case("gelu", store(rng, {{"x", {2, 4}}}), [&](ad::Graph& g, ParamStore& ps) {
    return weighted_sum(g, ad::gelu(P(g, ps, "x")), w);
  }));
  out.push_back(run_case("softmax", store(rng, {{"x", {3, 5}}}), [&](ad::Graph& g, ParamStore& ps) {
    return weighted_sum(g, ad::softmax(P(g, ps, "x")), w);
  }));
  out.push_back(run_case("masked_softmax", store(rng, {{"x", {3, 4}}}), [&](ad::Graph& g, ParamStore& ps) {
    static const std::uint8_t mask[] = {1, 0, 0, 0, 1, 1, 0, 1, 1, 1, 1, 0};
    return weighted_sum(g, ad::masked_softmax(P(g, ps, "x"), mask), w);
  }));
  out.push_back(run_case("layernorm", store(rng, {{"x", {3, 6}}, {"gamma", {6}}, {"beta", {6}}}),
                         [&](ad::Graph& g, ParamStore& ps) {
                           return weighted_sum(
                               g, ad::layernorm(P(g, ps, "x"), P(g, ps, "gamma"), P(g, ps, "beta"), 1e-6), w);
                         }));
  out.push_back(run_case("embed", store(rng, {{"table", {5, 3}}}), [&](ad::Graph& g, ParamStore& ps) {
    static const int ids[] = {4, 0, 4, 2};
    return weighted_sum(g, ad::embed(P(g, ps, "table"), ids), w);
  }));
  out.push_back(run_case("cross_entropy", store(rng, {{"logits", {4, 6}}}), [&](ad::Graph& g, ParamStore& ps) {
    static const int targets[] = {1, 5, 0, 3};
    static const double weights[] = {1.0, 0.0, 2.0, 0.5};
    ad::Var l = P(g, ps, "logits");
    return ad::add(ad::cross_entropy(l, targets, weights), ad::cross_entropy(l, targets));
  }));
  out.push_back(run_case("concat_slice", store(rng, {{"a", {2, 3}}, {"b", {2, 3}}, {"c", {1, 6}}}),
                         [&](ad::Graph& g, ParamStore& ps) {
                           const ad::Var cols[] = {P(g, ps, "a"), P(g, ps, "b")};
                           const ad::Var rows[] = {ad::concat_cols(cols), P(g, ps, "c")};
                           ad::Var x = ad::concat_rows(rows);
                           return ad::add(weighted_sum(g, ad::slice_rows(x, 1, 2), w),
                                          weighted_sum(g, ad::slice_cols(x, 2, 3), w + 1));
                         }));
  out.push_back(run_case("dropout", store(rng, {{"x", {4, 5}}}), [&](ad::Graph& g, ParamStore& ps) {
    Rng mask_rng(w);  // same mask on every evaluation
    return weighted_sum(g, ad::dropout(P(g, ps, "x"), 0.3, mask_rng), w + 1);
  }));
  out.push_back(run_case("lstm_step", store(rng, {{"x", {1, 3}}, {"wx", {3, 8}}, {"wh", {2, 8}}, {"b", {8}}}),
                         [&](ad::Graph& g, ParamStore& ps) {
                           Rng s(w);
                           ad::Var h = g.constant(Tensor::randn({1, 2}, s, 1.0));
                           ad::Var c = g.constant(Tensor::randn({1, 2}, s, 1.0));
                           LstmStep a = lstm_step(P(g, ps, "x"), h, c, P(g, ps, "wx"), P(g, ps, "wh"), P(g, ps, "b"));
                           LstmStep b = lstm_step(P(g, ps, "x"), a.h, a.c, P(g, ps, "wx"), P(g, ps, "wh"), P(g, ps, "b"));
                           return ad::add(weighted_sum(g, b.h, w), weighted_sum(g, b.c, w + 1));
                         }));

  {
    TermDecoderConfig cfg;
    cfg.d_img = 6;
    cfg.d_hidden = 5;
    cfg.seed = seed;
    const std::vector<std::vector<Term>> lists = {{Term::noun("man"), Term::noun("bike"), Term::frame("Placing")}};
    TermDecoder model(cfg, TermVocabulary::build(lists));
    Rng f(w);
    ImageFeature feat{"img", Tensor::randn({6}, f, 1.0).storage()};
    auto loss = [&](ad::Graph& g) { return model.loss(g, model.trainable_binder(g), feat, lists[0]); };
    out.push_back({"term_decoder_loss", check_gradients(model.params(), loss)});
  }
  {
    StoryModelConfig cfg;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 2;
    cfg.d_ff = 16;
    cfg.n_max = 6;
    cfg.dropout_rate = 0.0;
    cfg.seed = seed;
    const TermStoryPair pair = tiny_pair();
    StoryModel model(cfg, Vocabulary::build(std::span<const TermStoryPair>(&pair, 1)));
    // Larger weights than the default init so every parameter gets a
    // gradient well above finite-difference noise.
    Rng r(w);
    for (auto& [name, p] : model.params()) {
      if (name.ends_with("gamma")) continue;
      for (auto& x : p.value.storage()) x += r.normal(0.0, 0.3);
    }
    auto loss = [&](ad::Graph& g) { return model.loss(g, model.trainable_binder(g), pair, false, nullptr); };
    out.push_back({"story_model_loss", check_gradients(model.params(), loss)});
  }
  return out;
}

}  // namespace termstory
