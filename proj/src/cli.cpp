#include "termstory/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "termstory/api.hpp"
#include "termstory/error.hpp"
#include "termstory/gradsuite.hpp"
#include "termstory/image_term_model.hpp"
#include "termstory/lexicon.hpp"
#include "termstory/session.hpp"
#include "termstory/story_model.hpp"
#include "termstory/termex.hpp"

namespace termstory::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20190601;
constexpr double kGradTolerance = 1e-4;

fs::path data_root() {
  const char* env = std::getenv("DIXIT_DATA_DIR");
  return env && *env ? fs::path(env) : fs::path("data");
}

std::string under_root(const char* name) { return (data_root() / name).string(); }

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

struct Options {
  std::string lexicon = under_root("lexicon.tsv");
  std::string stories = under_root("stories.jsonl");
  std::string corpus = under_root("corpus.jsonl");
  std::string features = under_root("features.jsonl");
  std::string labels = under_root("labels.jsonl");
  std::string ckpt = under_root("story_model.json");
  std::string term_ckpt = under_root("term_model.json");
  std::string pool = under_root("pool");
  std::string sessions = under_root("sessions");
  std::string terms;
  std::string out;
  std::string addr = "127.0.0.1:8080";
  std::string mode = "greedy";
  std::size_t steps = 0;
  double lr = 1e-3;
  std::uint64_t seed = kDefaultSeed;
  std::size_t k = 10;
  std::size_t batch = 1;
  std::size_t log_every = 100;
  std::size_t max_terms = kDefaultMaxTermsPerImage;
  std::size_t n_max = kDefaultMaxSentenceTokens;
  std::size_t max_sentence_tokens = 0;
  std::size_t d_model = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_ff = 512;
  std::size_t hidden = 256;
  double dropout = 0.1;
  std::size_t seeds = 5;
  std::uint64_t grad_seed = 1;
};

void emit(std::ostream& out, json j) { out << j.dump() << '\n' << std::flush; }

int build_corpus_cmd(const Options& o, std::ostream& out) {
  const Lexicon lex = load_lexicon(o.lexicon);
  const auto stories = read_stories(o.stories);
  const RulePosTagger tagger(lex);
  CorpusOptions opts;
  opts.max_terms_per_image = o.max_terms;
  opts.max_sentence_tokens = o.n_max;
  const auto result = build_corpus(lex, stories, tagger, opts);
  const std::string dest = o.out.empty() ? o.corpus : o.out;
  write_corpus(dest, result.pairs);
  for (const auto& e : result.errors) emit(out, {{"event", "record_error"}, {"index", e.index}, {"message", e.message}});
  emit(out, {{"event", "corpus"},
             {"input", stories.size()},
             {"pairs", result.pairs.size()},
             {"dropped", result.dropped},
             {"errors", result.errors.size()},
             {"out", dest}});
  return kExitOk;
}

int train_story_cmd(const Options& o, std::ostream& out) {
  const auto corpus = read_corpus(o.corpus);
  StoryModelConfig cfg;
  cfg.d_model = o.d_model;
  cfg.n_layers = o.layers;
  cfg.n_heads = o.heads;
  cfg.d_ff = o.d_ff;
  cfg.n_max = o.n_max;
  cfg.max_terms_per_image = o.max_terms;
  cfg.dropout_rate = o.dropout;
  cfg.seed = o.seed;
  StoryModel model(cfg, Vocabulary::build(corpus));
  StoryTrainConfig tc;
  tc.steps = o.steps ? o.steps : 2000;
  tc.lr = o.lr;
  tc.batch_size = o.batch;
  tc.seed = o.seed;
  tc.on_step = [&](std::size_t step, double loss) {
    if (o.log_every && (step % o.log_every == 0 || step + 1 == tc.steps)) {
      emit(out, {{"event", "step"}, {"step", step}, {"loss", loss}});
    }
  };
  train_story_model(model, corpus, tc);
  const std::string dest = o.out.empty() ? o.ckpt : o.out;
  model.save(dest);
  emit(out, {{"event", "trained"},
             {"model", "story"},
             {"steps", tc.steps},
             {"vocab", model.vocab().size()},
             {"corpus_loss", story_corpus_loss(model, corpus)},
             {"ckpt", dest}});
  return kExitOk;
}

std::vector<TermExample> read_term_examples(const Options& o) {
  const auto feats = load_features(o.features);
  std::map<std::string, const ImageFeature*> by_id;
  for (const auto& f : feats) by_id[f.image_id] = &f;
  std::unique_ptr<Lexicon> lex;
  std::unique_ptr<RulePosTagger> tagger;
  std::vector<TermExample> examples;
  std::ifstream in(o.labels);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + o.labels);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = o.labels + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, where + ": " + e.what());
    }
    const std::string id = j.value("image_id", std::string());
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::kNotFound, where + ": no feature for image '" + id + "'");
    std::vector<Term> terms;
    if (j.contains("terms")) {
      for (const auto& t : j["terms"]) terms.push_back(Term::parse(t.get<std::string>()));
      terms = canonical_term_order(terms);
      if (terms.size() > o.max_terms) terms.resize(o.max_terms);
    } else if (j.contains("caption")) {
      if (!lex) {
        lex = std::make_unique<Lexicon>(load_lexicon(o.lexicon));
        tagger = std::make_unique<RulePosTagger>(*lex);
      }
      terms = caption_terms(*lex, *tagger, j["caption"].get<std::string>(), o.max_terms);
    } else {
      throw Error(ErrorCode::kParse, where + ": label needs \"terms\" or \"caption\"");
    }
    examples.push_back({*it->second, std::move(terms)});
  }
  return examples;
}

int train_terms_cmd(const Options& o, std::ostream& out) {
  const auto examples = read_term_examples(o);
  if (examples.empty()) throw Error(ErrorCode::kInvalidArgument, "no labelled examples in " + o.labels);
  std::vector<std::vector<Term>> lists;
  for (const auto& e : examples) lists.push_back(e.terms);
  TermDecoderConfig cfg;
  cfg.d_img = examples.front().feature.vector.size();
  cfg.d_hidden = o.hidden;
  cfg.max_terms = o.max_terms;
  cfg.seed = o.seed;
  TermDecoder model(cfg, TermVocabulary::build(lists));
  TermTrainConfig tc;
  tc.steps = o.steps ? o.steps : 300;
  tc.lr = o.lr;
  tc.batch_size = o.batch;
  tc.seed = o.seed;
  tc.on_step = [&](std::size_t step, double loss) {
    if (o.log_every && (step % o.log_every == 0 || step + 1 == tc.steps)) {
      emit(out, {{"event", "step"}, {"step", step}, {"loss", loss}});
    }
  };
  train_term_decoder(model, examples, tc);
  const std::string dest = o.out.empty() ? o.term_ckpt : o.out;
  model.save(dest);
  emit(out, {{"event", "trained"},
             {"model", "terms"},
             {"steps", tc.steps},
             {"examples", examples.size()},
             {"vocab", model.vocab().size()},
             {"ckpt", dest}});
  return kExitOk;
}

DecodeConfig decode_from(const Options& o) {
  return DecodeConfig::from_json(
      {{"mode", o.mode}, {"k", o.k}, {"seed", o.seed}, {"max_sentence_tokens", o.max_sentence_tokens}});
}

int generate_cmd(const Options& o, std::ostream& out) {
  if (o.terms.empty()) throw Error(ErrorCode::kInvalidArgument, "generate needs --terms");
  const TermSets terms = term_sets_from_json(read_json_file(o.terms));
  const StoryModel model = StoryModel::load(o.ckpt);
  GenerateInfo info;
  const StorySequence story = model.generate(terms, decode_from(o), &info);
  emit(out, {{"v", 1},
             {"terms", term_sets_to_json(terms)},
             {"sentences", story.sentences},
             {"text", story.text()},
             {"truncated", info.truncated}});
  return kExitOk;
}

int predict_terms_cmd(const Options& o, std::ostream& out) {
  const TermDecoder model = TermDecoder::load(o.term_ckpt);
  for (const auto& f : load_features(o.features, model.config().d_img)) {
    json terms = json::array();
    for (const auto& t : model.predict(f, o.max_terms)) terms.push_back(t.str());
    emit(out, {{"image_id", f.image_id}, {"terms", terms}});
  }
  return kExitOk;
}

int gradcheck_cmd(const Options& o, std::ostream& out) {
  double worst = 0.0;
  std::string worst_name;
  for (std::size_t i = 0; i < o.seeds; ++i) {
    const std::uint64_t seed = o.grad_seed + i;
    for (const auto& c : run_gradient_suite(seed)) {
      emit(out, {{"event", "case"},
                 {"seed", seed},
                 {"name", c.name},
                 {"max_rel_error", c.result.max_rel_error},
                 {"elements", c.result.elements_checked}});
      if (c.result.max_rel_error >= worst) {
        worst = c.result.max_rel_error;
        worst_name = c.name;
      }
    }
  }
  const bool ok = worst <= kGradTolerance;
  emit(out, {{"event", "gradcheck"}, {"max_rel_error", worst}, {"worst", worst_name}, {"tolerance", kGradTolerance},
             {"ok", ok}});
  return ok ? kExitOk : kExitRuntime;
}

int serve_cmd(const Options& o, std::ostream& out) {
  auto lex = std::make_shared<const Lexicon>(load_lexicon(o.lexicon));
  std::shared_ptr<const StoryModel> story;
  std::shared_ptr<const TermDecoder> terms;
  std::shared_ptr<const ImagePool> pool;
  if (fs::exists(o.ckpt)) story = std::make_shared<const StoryModel>(StoryModel::load(o.ckpt));
  if (fs::exists(o.term_ckpt)) terms = std::make_shared<const TermDecoder>(TermDecoder::load(o.term_ckpt));
  if (fs::exists(fs::path(o.pool) / "pool.jsonl")) pool = std::make_shared<const ImagePool>(ImagePool::load(o.pool));
  ServiceOptions opts;
  opts.sessions_dir = o.sessions;
  SessionService service(lex, story, terms, pool, opts);
  const Api api(service);
  const auto colon = o.addr.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "--addr must be host:port");
  const std::string host = o.addr.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(o.addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "--addr port is not a number");
  }
  serve(api, host, port, [&](int bound) {
    emit(out, {{"event", "listening"},
               {"addr", host + ":" + std::to_string(bound)},
               {"story_model", story != nullptr},
               {"term_model", terms != nullptr},
               {"pool", pool ? pool->entries().size() : 0}});
  });
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app("Term-driven visual story generation tools", "termstory");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto* build = app.add_subcommand("build-corpus", "Extract term sets from stories into a training corpus");
  build->add_option("--lexicon", o.lexicon, "Lexicon TSV");
  build->add_option("--stories", o.stories, "Story JSON Lines input");
  build->add_option("--corpus", o.corpus, "Corpus output (unless --out)");
  build->add_option("--out", o.out, "Corpus output path");
  build->add_option("--max-terms", o.max_terms, "Terms kept per sentence");
  build->add_option("--n-max", o.n_max, "Maximum tokens per sentence");

  auto* train_story = app.add_subcommand("train-story", "Train the story model on a corpus");
  train_story->add_option("--corpus", o.corpus, "Corpus JSON Lines");
  train_story->add_option("--out,--ckpt", o.out, "Checkpoint output path");
  train_story->add_option("--steps", o.steps, "Optimizer steps (default 2000)");
  train_story->add_option("--lr", o.lr, "Adam learning rate");
  train_story->add_option("--seed", o.seed, "Seed for init, shuffling and dropout");
  train_story->add_option("--batch", o.batch, "Stories per step");
  train_story->add_option("--log-every", o.log_every, "Progress line interval (0 = off)");
  train_story->add_option("--d-model", o.d_model);
  train_story->add_option("--layers", o.layers);
  train_story->add_option("--heads", o.heads);
  train_story->add_option("--d-ff", o.d_ff);
  train_story->add_option("--n-max", o.n_max);
  train_story->add_option("--max-terms", o.max_terms);
  train_story->add_option("--dropout", o.dropout);

  auto* train_terms = app.add_subcommand("train-terms", "Train the image-to-term decoder");
  train_terms->add_option("--features", o.features, "Feature file (JSON Lines or binary)");
  train_terms->add_option("--labels", o.labels, "JSON Lines {image_id, terms | caption}");
  train_terms->add_option("--lexicon", o.lexicon, "Lexicon used for caption labels");
  train_terms->add_option("--out,--ckpt", o.out, "Checkpoint output path");
  train_terms->add_option("--steps", o.steps, "Optimizer steps (default 300)");
  train_terms->add_option("--lr", o.lr, "Adam learning rate");
  train_terms->add_option("--seed", o.seed);
  train_terms->add_option("--batch", o.batch);
  train_terms->add_option("--log-every", o.log_every);
  train_terms->add_option("--hidden", o.hidden, "LSTM width");
  train_terms->add_option("--max-terms", o.max_terms);

  auto* generate = app.add_subcommand("generate", "Generate a story from a terms file");
  generate->add_option("--ckpt", o.ckpt, "Story model checkpoint");
  generate->add_option("--terms", o.terms, "JSON with 5 arrays of terms")->required();
  generate->add_option("--mode", o.mode, "greedy or topk")->check(CLI::IsMember({"greedy", "topk"}));
  generate->add_option("--k", o.k, "Top-k size");
  generate->add_option("--seed", o.seed, "Sampling seed");
  generate->add_option("--max-sentence-tokens", o.max_sentence_tokens, "Per-sentence cap (0 = model n_max)");

  auto* predict = app.add_subcommand("predict-terms", "Predict terms for every feature vector in a file");
  predict->add_option("--ckpt,--term-ckpt", o.term_ckpt, "Term decoder checkpoint");
  predict->add_option("--features", o.features, "Feature file");
  predict->add_option("--max-terms", o.max_terms);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--seed", o.grad_seed, "First seed");
  gradcheck->add_option("--seeds", o.seeds, "Number of seeds");

  auto* serve = app.add_subcommand("serve", "Serve the session API over HTTP");
  serve->add_option("--addr", o.addr, "host:port");
  serve->add_option("--lexicon", o.lexicon);
  serve->add_option("--ckpt", o.ckpt, "Story model checkpoint (optional)");
  serve->add_option("--term-ckpt", o.term_ckpt, "Term decoder checkpoint (optional)");
  serve->add_option("--pool", o.pool, "Image pool directory (optional)");
  serve->add_option("--sessions", o.sessions, "Event log directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*build) return build_corpus_cmd(o, out);
    if (*train_story) return train_story_cmd(o, out);
    if (*train_terms) return train_terms_cmd(o, out);
    if (*generate) return generate_cmd(o, out);
    if (*predict) return predict_terms_cmd(o, out);
    if (*gradcheck) return gradcheck_cmd(o, out);
    if (*serve) return serve_cmd(o, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace termstory::cli
