#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "service_support.hpp"
#include "termstory/error.hpp"
#include "termstory/rng.hpp"
#include "termstory/session.hpp"
#include "test_util.hpp"

using namespace termstory;
using termstory::testutil::fixture;
using nlohmann::json;

namespace {

const testutil::ServiceModels& models() {
  static const testutil::ServiceModels m = testutil::make_service_models(TERMSTORY_FIXTURES);
  return m;
}

ServiceOptions fixed_clock(std::filesystem::path dir = {}) {
  ServiceOptions o;
  o.sessions_dir = std::move(dir);
  o.durable = false;
  auto t = std::make_shared<std::int64_t>(1000);
  o.clock = [t] { return (*t)++; };
  return o;
}

std::unique_ptr<SessionService> service(ServiceOptions o = fixed_clock()) {
  const auto& m = models();
  return std::make_unique<SessionService>(m.lexicon, m.story, m.terms, m.pool, std::move(o));
}

const std::vector<std::string> kFive = {"pool-01", "pool-02", "pool-03", "pool-04", "pool-05"};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

Event event(const std::string& sid, std::uint64_t seq, EventKind kind, json payload = json::object()) {
  return {sid, seq, static_cast<std::int64_t>(seq), kind, std::move(payload)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Events, JsonRoundTripAndVersion) {
  const Event e = event("abc", 3, EventKind::kTermAdded, {{"slot", 2}, {"term", "boy"}});
  EXPECT_EQ(Event::from_json(json::parse(e.to_line())), e);
  EXPECT_EQ(e.to_json().at("v"), 1);
  EXPECT_EQ(e.to_json().at("kind"), "TermAdded");
  json bad = e.to_json();
  bad["v"] = 2;
  EXPECT_EQ(code_of([&] { Event::from_json(bad); }), ErrorCode::kCorrupt);
  bad = e.to_json();
  bad["kind"] = "Nope";
  EXPECT_EQ(code_of([&] { Event::from_json(bad); }), ErrorCode::kCorrupt);
  for (int k = 0; k < 10; ++k) {
    const auto kind = static_cast<EventKind>(k);
    EXPECT_EQ(event_kind_from_string(to_string(kind)), kind);
  }
}

TEST(Apply, TableOneTermEdit) {
  const json table1 = json::parse(slurp(fixture("table1.json")));
  Session s;
  apply(s, event("t1", 1, EventKind::kSessionCreated));
  apply(s, event("t1", 2, EventKind::kTermsPredicted, {{"terms", table1}}));
  apply(s, event("t1", 3, EventKind::kTermRemoved, {{"slot", 1}, {"term", "man"}}));
  apply(s, event("t1", 4, EventKind::kTermAdded, {{"slot", 1}, {"term", "boy"}}));
  EXPECT_EQ(s.current_terms[0].terms, (std::vector<Term>{Term::frame("Placing"), Term::noun("bike"), Term::noun("boy")}));
  for (int i = 1; i < 5; ++i) EXPECT_EQ(term_sets_to_json(s.current_terms)[i], table1[i]);
  EXPECT_EQ(s.last_seq, 4u);
}

TEST(Apply, SequencingIsEnforcedWithoutSideEffects) {
  Session s;
  EXPECT_EQ(code_of([&] { apply(s, event("a", 1, EventKind::kTermAdded, {{"slot", 1}, {"term", "man"}})); }),
            ErrorCode::kCorrupt);
  apply(s, event("a", 1, EventKind::kSessionCreated));
  const Session before = s;
  EXPECT_EQ(code_of([&] { apply(s, event("a", 3, EventKind::kTermAdded, {{"slot", 1}, {"term", "man"}})); }),
            ErrorCode::kCorrupt);
  EXPECT_EQ(code_of([&] { apply(s, event("b", 2, EventKind::kTermAdded, {{"slot", 1}, {"term", "man"}})); }),
            ErrorCode::kCorrupt);
  EXPECT_EQ(code_of([&] { apply(s, event("a", 2, EventKind::kSessionCreated)); }), ErrorCode::kCorrupt);
  EXPECT_EQ(code_of([&] { apply(s, event("a", 2, EventKind::kTermAdded, {{"slot", 1}})); }), ErrorCode::kCorrupt);
  EXPECT_EQ(code_of([&] { apply(s, event("a", 2, EventKind::kTermRemoved, {{"slot", 1}, {"term", "x"}})); }),
            ErrorCode::kNotFound);
  EXPECT_EQ(s, before);
  EXPECT_EQ(code_of([&] { replay({}); }), ErrorCode::kCorrupt);
}

TEST(ParseLog, IgnoresUnterminatedTail) {
  const std::string l1 = event("a", 1, EventKind::kSessionCreated).to_line() + "\n";
  const std::string l2 = event("a", 2, EventKind::kTermAdded, {{"slot", 1}, {"term", "man"}}).to_line() + "\n";
  const std::string all = l1 + l2;
  for (std::size_t cut = 0; cut <= all.size(); ++cut) {
    const ParsedLog p = parse_log(std::string_view(all).substr(0, cut));
    const std::size_t expect_events = cut >= all.size() ? 2 : cut >= l1.size() ? 1 : 0;
    EXPECT_EQ(p.events.size(), expect_events) << cut;
    EXPECT_EQ(p.valid_bytes, expect_events == 2 ? all.size() : expect_events == 1 ? l1.size() : 0u);
  }
  EXPECT_EQ(code_of([&] { parse_log("{broken}\n"); }), ErrorCode::kCorrupt);
}

TEST(Service, CreateSessionLogsCreation) {
  auto svc = service();
  const std::string sid = svc->create_session();
  EXPECT_EQ(sid.size(), 32u);
  const auto evs = svc->events(sid);
  ASSERT_EQ(evs.size(), 1u);
  EXPECT_EQ(evs[0].kind, EventKind::kSessionCreated);
  EXPECT_EQ(evs[0].seq, 1u);
  EXPECT_EQ(svc->get_session(sid).created_at, 1000);
  EXPECT_EQ(code_of([&] { svc->get_session("missing"); }), ErrorCode::kNotFound);
}

TEST(Service, SelectPoolImagesPredictsTerms) {
  auto svc = service();
  const std::string sid = svc->create_session();
  const TermSets terms = svc->select_images(sid, kFive);
  const Session s = svc->get_session(sid);
  EXPECT_EQ(s.image_source, ImageSource::kPool);
  EXPECT_EQ(*s.slots[0], "pool-01");
  EXPECT_EQ(s.current_terms, terms);
  EXPECT_TRUE(terms[0].contains(Term::noun("man")));
  EXPECT_TRUE(terms[0].contains(Term::noun("bike")));
  EXPECT_NO_THROW(validate_term_sets(terms));
  const auto evs = svc->events(sid);
  ASSERT_EQ(evs.size(), 3u);
  EXPECT_EQ(evs[1].kind, EventKind::kImagesSelected);
  EXPECT_EQ(evs[2].kind, EventKind::kTermsPredicted);
}

TEST(Service, SelectImageErrors) {
  auto svc = service();
  const std::string sid = svc->create_session();
  EXPECT_EQ(code_of([&] { svc->select_images(sid, {"pool-01"}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { svc->select_images(sid, {"pool-01", "pool-02", "pool-03", "pool-04", "nope"}); }),
            ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { svc->select_images("missing", kFive); }), ErrorCode::kNotFound);
  std::vector<ImageFeature> narrow(5, ImageFeature{"u", std::vector<double>(3, 0.0)});
  EXPECT_THROW(svc->select_uploaded_images(sid, narrow), Error);
  EXPECT_EQ(svc->events(sid).size(), 1u);

  const auto& m = models();
  SessionService bare(m.lexicon, nullptr, nullptr, m.pool, fixed_clock());
  const std::string sid2 = bare.create_session();
  EXPECT_EQ(code_of([&] { bare.select_images(sid2, kFive); }), ErrorCode::kUnavailable);
  EXPECT_EQ(code_of([&] { bare.generate_story(sid2, {}); }), ErrorCode::kUnavailable);
}

TEST(Service, UploadedImagesRecordSource) {
  auto svc = service();
  const std::string sid = svc->create_session();
  std::vector<ImageFeature> feats;
  for (int i = 0; i < 5; ++i) feats.push_back({"upload-" + std::to_string(i), models().pool->entries()[i].vector});
  svc->select_uploaded_images(sid, feats);
  const Session s = svc->get_session(sid);
  EXPECT_EQ(s.image_source, ImageSource::kUpload);
  EXPECT_EQ(*s.slots[4], "upload-4");
}

TEST(Service, TermRules) {
  auto svc = service();
  const std::string sid = svc->create_session();
  svc->select_images(sid, kFive);
  const Term man = Term::noun("man");
  ASSERT_TRUE(svc->get_session(sid).current_terms[0].contains(man));
  EXPECT_EQ(code_of([&] { svc->modify_terms(sid, {TermOp::Kind::kAdd, 1, man}); }), ErrorCode::kDuplicate);
  EXPECT_EQ(code_of([&] { svc->modify_terms(sid, {TermOp::Kind::kAdd, 1, Term::noun("unicorn")}); }),
            ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { svc->modify_terms(sid, {TermOp::Kind::kRemove, 2, Term::noun("cake")}); }),
            ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { svc->modify_terms(sid, {TermOp::Kind::kAdd, 6, man}); }), ErrorCode::kInvalidArgument);

  TermSets t = svc->modify_terms(sid, {TermOp::Kind::kRemove, 1, man});
  EXPECT_FALSE(t[0].contains(man));
  t = svc->modify_terms(sid, {TermOp::Kind::kAdd, 1, Term::noun("boy")});
  EXPECT_TRUE(t[0].contains(Term::noun("boy")));

  // Fill slot 3 to the limit, then one more overflows.
  const std::vector<std::string> nouns = {"dog", "cat", "lake", "house", "road", "car", "sky", "sun", "city", "snow"};
  std::size_t i = 0;
  while (svc->get_session(sid).current_terms[2].terms.size() < 8) {
    const Term n = Term::noun(nouns[i++]);
    if (!svc->get_session(sid).current_terms[2].contains(n)) svc->modify_terms(sid, {TermOp::Kind::kAdd, 3, n});
  }
  EXPECT_EQ(code_of([&] { svc->modify_terms(sid, {TermOp::Kind::kAdd, 3, Term::noun("tent")}); }),
            ErrorCode::kOverflow);
  EXPECT_EQ(svc->get_session(sid).current_terms[2].terms.size(), 8u);
}

TEST(Service, StoreAndRestoreRoundTrip) {
  auto svc = service();
  const std::string sid = svc->create_session();
  svc->select_images(sid, kFive);
  const Term bike = Term::noun("bike");
  const Session before = svc->get_session(sid);
  ASSERT_TRUE(before.current_terms[0].contains(bike));
  svc->modify_terms(sid, {TermOp::Kind::kStore, 1, bike});
  Session s = svc->get_session(sid);
  EXPECT_FALSE(s.current_terms[0].contains(bike));
  EXPECT_TRUE(s.stored_terms.count(bike));
  svc->modify_terms(sid, {TermOp::Kind::kRestore, 1, bike});
  s = svc->get_session(sid);
  EXPECT_TRUE(s.current_terms[0].same_terms(before.current_terms[0]));
  EXPECT_TRUE(s.stored_terms.empty());
  EXPECT_EQ(code_of([&] { svc->modify_terms(sid, {TermOp::Kind::kRestore, 1, bike}); }), ErrorCode::kNotFound);
  // Restoring into a different slot moves the term.
  svc->modify_terms(sid, {TermOp::Kind::kStore, 1, bike});
  svc->modify_terms(sid, {TermOp::Kind::kRestore, 4, bike});
  EXPECT_TRUE(svc->get_session(sid).current_terms[3].contains(bike));
}

TEST(Service, GenerateSnapshotsTerms) {
  auto svc = service();
  const std::string sid = svc->create_session();
  svc->select_images(sid, kFive);
  const TermSets at_generation = svc->get_session(sid).current_terms;
  const GeneratedStory g = svc->generate_story(sid, {});
  EXPECT_EQ(g.index, 0u);
  EXPECT_EQ(g.story.sentences.size(), 5u);
  svc->modify_terms(sid, {TermOp::Kind::kRemove, 1, Term::noun("man")});
  const Session s = svc->get_session(sid);
  ASSERT_EQ(s.stories.size(), 1u);
  EXPECT_EQ(s.stories[0].terms, at_generation);
  EXPECT_EQ(s.stories[0].story, g.story);
  EXPECT_EQ(svc->generate_story(sid, {.mode = DecodeMode::kTopK, .k = 3}).index, 1u);
  const GeneratedStory again = svc->generate_story(sid, {});
  EXPECT_EQ(again.story, svc->generate_story(sid, {}).story);
}

TEST(Service, RatingRulesAndLatestWins) {
  auto svc = service();
  const std::string sid = svc->create_session();
  EXPECT_EQ(code_of([&] { svc->rate_story(sid, 0, 3); }), ErrorCode::kNotFound);
  svc->generate_story(sid, {});
  EXPECT_EQ(code_of([&] { svc->rate_story(sid, 0, 0); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { svc->rate_story(sid, 0, 6); }), ErrorCode::kInvalidArgument);
  svc->rate_story(sid, 0, 2);
  svc->rate_story(sid, 0, 5);
  EXPECT_EQ(svc->get_session(sid).stories[0].rating, 5);
  const auto evs = svc->events(sid);
  EXPECT_EQ(std::count_if(evs.begin(), evs.end(), [](const Event& e) { return e.kind == EventKind::kStoryRated; }), 2);
  EXPECT_EQ(replay(evs).stories[0].rating, 5);
}

TEST(Service, EditKeepsOriginal) {
  auto svc = service();
  const std::string sid = svc->create_session();
  const GeneratedStory g = svc->generate_story(sid, {});
  svc->edit_story(sid, 0, "The boy sat on the bench. He slept.");
  const StoryRecord r = svc->get_session(sid).stories[0];
  EXPECT_EQ(r.story, g.story);
  EXPECT_EQ(r.edited_text, "The boy sat on the bench. He slept.");
  ASSERT_TRUE(r.edited.has_value());
  EXPECT_EQ(r.edited->sentences.size(), 2u);
  EXPECT_EQ(code_of([&] { svc->edit_story(sid, 0, "a. b. c. d. e. f."); }), ErrorCode::kOverflow);
  std::string long_sentence;
  for (int i = 0; i < 30; ++i) long_sentence += "w ";
  EXPECT_EQ(code_of([&] { svc->edit_story(sid, 0, long_sentence); }), ErrorCode::kOverflow);
  EXPECT_EQ(code_of([&] { svc->edit_story(sid, 0, "   "); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { svc->edit_story(sid, 3, "ok."); }), ErrorCode::kNotFound);
}

TEST(Service, SnapshotJsonHasStateFields) {
  auto svc = service();
  const std::string sid = svc->create_session();
  svc->select_images(sid, kFive);
  svc->generate_story(sid, {});
  const json j = svc->get_session(sid).to_json();
  EXPECT_EQ(j.at("session_id"), sid);
  EXPECT_EQ(j.at("image_source"), "pool");
  EXPECT_EQ(j.at("slots").size(), 5u);
  EXPECT_EQ(j.at("terms").size(), 5u);
  EXPECT_EQ(j.at("stories").size(), 1u);
}

TEST(Service, ReplayReproducesStateAfterRandomOperations) {
  auto svc = service();
  Rng rng(2024);
  const std::vector<Term> vocab = {Term::noun("man"),  Term::noun("boy"),   Term::noun("bike"),
                                   Term::noun("seat"), Term::frame("Sleep"), Term::frame("Placing")};
  for (int trial = 0; trial < 20; ++trial) {
    const std::string sid = svc->create_session();
    for (int op = 0; op < 40; ++op) {
      try {
        switch (rng.below(6)) {
          case 0: svc->select_images(sid, kFive); break;
          case 1:
          case 2:
            svc->modify_terms(sid, {static_cast<TermOp::Kind>(rng.below(4)), static_cast<int>(1 + rng.below(5)),
                                    vocab[rng.below(vocab.size())]});
            break;
          case 3: svc->generate_story(sid, {.mode = DecodeMode::kTopK, .k = 4, .seed = rng.next()}); break;
          case 4: svc->rate_story(sid, rng.below(3), static_cast<int>(rng.below(7))); break;
          case 5: svc->edit_story(sid, rng.below(3), "the man sat. he slept."); break;
        }
      } catch (const Error&) {
      }
      const auto evs = svc->events(sid);
      ASSERT_EQ(replay(evs), svc->get_session(sid));
      for (std::size_t i = 0; i < evs.size(); ++i) ASSERT_EQ(evs[i].seq, i + 1);
    }
  }
}

TEST(Service, PersistsAndReloads) {
  testutil::TempDir dir;
  std::string sid;
  Session state;
  {
    auto svc = service(fixed_clock(dir.path()));
    sid = svc->create_session();
    svc->select_images(sid, kFive);
    svc->generate_story(sid, {});
    svc->rate_story(sid, 0, 4);
    state = svc->get_session(sid);
  }
  auto svc = service(fixed_clock(dir.path()));
  EXPECT_EQ(svc->session_ids(), std::vector<std::string>{sid});
  EXPECT_EQ(svc->get_session(sid), state);
  svc->rate_story(sid, 0, 1);
  auto again = service(fixed_clock(dir.path()));
  EXPECT_EQ(again->get_session(sid).stories[0].rating, 1);
  const std::string index = slurp(dir / "index.jsonl");
  EXPECT_EQ(std::count(index.begin(), index.end(), '\n'), 1);
  EXPECT_NE(index.find(sid), std::string::npos);
}

TEST(Service, TornTailIsTruncatedOnLoad) {
  testutil::TempDir dir;
  std::string sid;
  Session state;
  {
    auto svc = service(fixed_clock(dir.path()));
    sid = svc->create_session();
    svc->select_images(sid, kFive);
    state = svc->get_session(sid);
  }
  const auto log = dir / (sid + ".jsonl");
  const std::string good = slurp(log);
  {
    std::ofstream out(log, std::ios::app | std::ios::binary);
    out << R"({"v":1,"session_id":")" << sid << R"(","seq":4,"ts":5,"kind":"TermAd)";
  }
  auto svc = service(fixed_clock(dir.path()));
  EXPECT_EQ(svc->get_session(sid), state);
  EXPECT_EQ(slurp(log), good);
  svc->modify_terms(sid, {TermOp::Kind::kAdd, 2, Term::noun("boy")});
  auto again = service(fixed_clock(dir.path()));
  EXPECT_TRUE(again->get_session(sid).current_terms[1].contains(Term::noun("boy")));
}

TEST(Service, EmptyOrTornFirstLineLogIsDropped) {
  testutil::TempDir dir;
  { std::ofstream(dir / "deadbeef.jsonl") << R"({"v":1,"sess)"; }
  auto svc = service(fixed_clock(dir.path()));
  EXPECT_TRUE(svc->session_ids().empty());
  EXPECT_FALSE(std::filesystem::exists(dir / "deadbeef.jsonl"));
}

TEST(Service, CorruptCompleteLineFailsLoad) {
  testutil::TempDir dir;
  { std::ofstream(dir / "x.jsonl") << "{\"v\":1}\n"; }
  EXPECT_THROW(service(fixed_clock(dir.path())), Error);
}

TEST(Service, TenThousandUniqueIds) {
  auto svc = service();
  std::set<std::string> ids;
  for (int i = 0; i < 10000; ++i) ids.insert(svc->create_session());
  EXPECT_EQ(ids.size(), 10000u);
  EXPECT_EQ(svc->session_ids().size(), 10000u);
}

TEST(Service, RejectsInvalidGeneratedIds) {
  ServiceOptions o = fixed_clock();
  o.id_generator = [] { return std::string("../escape"); };
  auto svc = service(o);
  EXPECT_EQ(code_of([&] { svc->create_session(); }), ErrorCode::kInvalidArgument);
  EXPECT_TRUE(svc->session_ids().empty());
}

TEST(Service, ConcurrentWritersKeepSequenceContiguous) {
  testutil::TempDir dir;
  ServiceOptions o;
  o.sessions_dir = dir.path();
  o.durable = false;
  auto svc = service(o);
  const std::string shared = svc->create_session();
  svc->select_images(shared, kFive);
  std::atomic<int> ok{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      const Term term = Term::noun(std::vector<std::string>{"dog", "cat", "lake", "road"}[t]);
      for (int i = 0; i < 25; ++i) {
        try {
          svc->modify_terms(shared, {TermOp::Kind::kAdd, 5, term});
          svc->modify_terms(shared, {TermOp::Kind::kRemove, 5, term});
          ok += 2;
        } catch (const Error&) {
        }
        svc->create_session();
      }
    });
  }
  for (auto& th : threads) th.join();
  const auto evs = svc->events(shared);
  EXPECT_EQ(evs.size(), 3u + static_cast<std::size_t>(ok.load()));
  for (std::size_t i = 0; i < evs.size(); ++i) EXPECT_EQ(evs[i].seq, i + 1);
  EXPECT_EQ(replay(evs), svc->get_session(shared));
  EXPECT_EQ(svc->session_ids().size(), 101u);
  auto reloaded = service(o);
  EXPECT_EQ(reloaded->get_session(shared), svc->get_session(shared));
}
