#pragma once

// Small models and a pool shared by the session, API and acceptance tests.

#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "termstory/image_term_model.hpp"
#include "termstory/lexicon.hpp"
#include "termstory/session.hpp"
#include "termstory/story_model.hpp"
#include "termstory/termex.hpp"

namespace termstory::testutil {

struct ServiceModels {
  std::shared_ptr<const Lexicon> lexicon;
  std::shared_ptr<const StoryModel> story;
  std::shared_ptr<const TermDecoder> terms;
  std::shared_ptr<const ImagePool> pool;
};

/// Term decoder fitted to the pool captions and an untrained-but-marked story
/// model. Both are tiny so they build in well under a second.
inline ServiceModels make_service_models(const std::filesystem::path& fixtures) {
  ServiceModels m;
  auto lex = std::make_shared<Lexicon>(load_lexicon(fixtures / "lexicon.tsv"));
  m.lexicon = lex;
  auto pool = std::make_shared<ImagePool>(ImagePool::load(fixtures / "pool"));
  m.pool = pool;

  const RulePosTagger pos(*lex);
  std::vector<TermExample> examples;
  std::ifstream labels(fixtures / "pool" / "labels.jsonl");
  for (std::string line; std::getline(labels, line);) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const PoolEntry* p = pool->find(j.at("image_id").get<std::string>());
    examples.push_back({{p->image_id, p->vector}, caption_terms(*lex, pos, j.at("caption").get<std::string>(), 8)});
  }
  std::vector<std::vector<Term>> lists;
  for (const auto& e : examples) lists.push_back(e.terms);
  TermDecoderConfig tcfg;
  tcfg.d_img = pool->entries().front().vector.size();
  tcfg.d_hidden = 16;
  auto decoder = std::make_shared<TermDecoder>(tcfg, TermVocabulary::build(lists));
  TermTrainConfig tc;
  tc.steps = 150;
  tc.lr = 2e-2;
  train_term_decoder(*decoder, examples, tc);
  m.terms = decoder;

  const std::vector<TermStoryPair> corpus = read_corpus(fixtures / "corpus20.expected.jsonl");
  StoryModelConfig scfg;
  scfg.d_model = 16;
  scfg.n_heads = 2;
  scfg.n_layers = 1;
  scfg.d_ff = 32;
  auto story = std::make_shared<StoryModel>(scfg, Vocabulary::build(corpus));
  story->mark_trained();
  m.story = story;
  return m;
}

}  // namespace termstory::testutil
