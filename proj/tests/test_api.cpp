#include <gtest/gtest.h>

#include <future>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "service_support.hpp"
#include "termstory/api.hpp"
#include "termstory/session.hpp"
#include "test_util.hpp"

using namespace termstory;
using nlohmann::json;

namespace {

class ApiTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { models_ = new testutil::ServiceModels(testutil::make_service_models(TERMSTORY_FIXTURES)); }
  static void TearDownTestSuite() { delete models_; }

  void SetUp() override {
    ServiceOptions o;
    o.durable = false;
    service_ = std::make_unique<SessionService>(models_->lexicon, models_->story, models_->terms, models_->pool, o);
    api_ = std::make_unique<Api>(*service_);
  }

  ApiResponse call(const std::string& method, const std::string& path, const json& body = nullptr,
                   std::map<std::string, std::string> query = {}) {
    json b = body;
    if (b.is_object() && !b.contains("v")) b["v"] = 1;
    return api_->handle({method, path, std::move(query), b.is_null() ? "" : b.dump()});
  }

  static json parse(const ApiResponse& r) { return json::parse(r.body); }

  std::string new_session() { return parse(call("POST", "/sessions", json::object())).at("session_id"); }

  static testutil::ServiceModels* models_;
  std::unique_ptr<SessionService> service_;
  std::unique_ptr<Api> api_;
};

testutil::ServiceModels* ApiTest::models_ = nullptr;

const json kFive = {"pool-01", "pool-02", "pool-03", "pool-04", "pool-05"};

}  // namespace

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status(ErrorCode::kInvalidArgument), 400);
  EXPECT_EQ(http_status(ErrorCode::kOverflow), 400);
  EXPECT_EQ(http_status(ErrorCode::kNotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::kDuplicate), 409);
  EXPECT_EQ(http_status(ErrorCode::kUnavailable), 503);
  EXPECT_EQ(http_status(ErrorCode::kCorrupt), 500);
}

TEST_F(ApiTest, PoolListing) {
  const auto r = call("GET", "/pool");
  EXPECT_EQ(r.status, 200);
  const json j = parse(r);
  EXPECT_EQ(j.at("v"), 1);
  EXPECT_EQ(j.at("images").size(), 10u);
  EXPECT_EQ(j.at("images")[0].at("thumbnail"), "thumbs/pool-01.jpg");
  EXPECT_FALSE(j.at("images")[0].contains("vector"));
}

TEST_F(ApiTest, SearchNounsAndFrames) {
  json j = parse(call("GET", "/search", nullptr, {{"type", "noun"}, {"q", "wood"}}));
  ASSERT_EQ(j.at("results").size(), 6u);
  EXPECT_EQ(j.at("results")[0].at("term"), "wood");
  j = parse(call("GET", "/search", nullptr, {{"type", "frame"}, {"q", "watch"}}));
  ASSERT_EQ(j.at("results").size(), 1u);
  EXPECT_EQ(j.at("results")[0].at("term"), "f:Seeking");
  EXPECT_EQ(call("GET", "/search", nullptr, {{"type", "verb"}, {"q", "x"}}).status, 400);
  EXPECT_EQ(call("GET", "/search", nullptr, {{"type", "noun"}, {"q", " "}}).status, 400);
  EXPECT_EQ(call("GET", "/search").status, 400);
}

TEST_F(ApiTest, TermDescription) {
  json j = parse(call("GET", "/terms/f:Sleep/description"));
  EXPECT_EQ(j.at("kind"), "frame");
  EXPECT_EQ(j.at("text"), "A sleeper is in a state of rest.");
  j = parse(call("GET", "/terms/bike/description"));
  EXPECT_EQ(j.at("image_refs").size(), 2u);
  const auto r = call("GET", "/terms/unicorn/description");
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(parse(r).at("error").at("code"), "not_found");
}

TEST_F(ApiTest, SessionLifecycle) {
  const auto created = call("POST", "/sessions", json::object());
  EXPECT_EQ(created.status, 201);
  const std::string sid = parse(created).at("session_id");

  auto r = call("POST", "/sessions/" + sid + "/images", {{"source", "pool"}, {"image_ids", kFive}});
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(parse(r).at("terms").size(), 5u);

  r = call("POST", "/sessions/" + sid + "/terms", {{"op", "remove"}, {"slot", 1}, {"term", "man"}});
  ASSERT_EQ(r.status, 200) << r.body;
  r = call("POST", "/sessions/" + sid + "/terms", {{"op", "store"}, {"slot", 1}, {"term", "bike"}});
  EXPECT_EQ(parse(r).at("stored"), json::array({"bike"}));
  r = call("POST", "/sessions/" + sid + "/terms", {{"op", "add"}, {"slot", 1}, {"term", "boy"}});
  EXPECT_EQ(parse(r).at("terms")[0].back(), "boy");
  r = call("POST", "/sessions/" + sid + "/terms", {{"op", "add"}, {"slot", 1}, {"term", "boy"}});
  EXPECT_EQ(r.status, 409);

  r = call("POST", "/sessions/" + sid + "/story", {{"decode", {{"mode", "greedy"}}}});
  ASSERT_EQ(r.status, 200) << r.body;
  json story = parse(r);
  EXPECT_EQ(story.at("story_index"), 0);
  EXPECT_EQ(story.at("sentences").size(), 5u);

  EXPECT_EQ(call("POST", "/sessions/" + sid + "/stories/0/rating", {{"stars", 4}}).status, 200);
  EXPECT_EQ(call("POST", "/sessions/" + sid + "/stories/0/rating", {{"stars", 9}}).status, 400);
  EXPECT_EQ(call("POST", "/sessions/" + sid + "/stories/0/rating", {{"stars", 4.5}}).status, 400);
  EXPECT_EQ(call("POST", "/sessions/" + sid + "/stories/3/rating", {{"stars", 4}}).status, 404);
  EXPECT_EQ(call("POST", "/sessions/" + sid + "/stories/x/rating", {{"stars", 4}}).status, 400);
  EXPECT_EQ(call("POST", "/sessions/" + sid + "/stories/0/edit", {{"text", "The boy sat."}}).status, 200);

  const json snap = parse(call("GET", "/sessions/" + sid)).at("session");
  EXPECT_EQ(snap.at("stories")[0].at("rating"), 4);
  EXPECT_EQ(snap.at("stories")[0].at("edited_text"), "The boy sat.");
  EXPECT_EQ(snap.at("stored"), json::array({"bike"}));

  const auto events = call("GET", "/sessions/" + sid + "/events");
  EXPECT_EQ(events.content_type, "application/x-ndjson");
  std::vector<Event> parsed;
  std::istringstream lines(events.body);
  for (std::string line; std::getline(lines, line);) parsed.push_back(Event::from_json(json::parse(line)));
  EXPECT_EQ(replay(parsed).to_json(), snap);
}

TEST_F(ApiTest, UploadedFeatures) {
  const std::string sid = new_session();
  json feats = json::array();
  for (int i = 0; i < 5; ++i)
    feats.push_back({{"image_id", "u" + std::to_string(i)}, {"vector", models_->pool->entries()[i].vector}});
  auto r = call("POST", "/sessions/" + sid + "/images", {{"source", "upload"}, {"features", feats}});
  ASSERT_EQ(r.status, 200) << r.body;
  feats[2]["vector"] = json::array({1.0});
  r = call("POST", "/sessions/" + sid + "/images", {{"source", "upload"}, {"features", feats}});
  EXPECT_EQ(r.status, 400);
}

TEST_F(ApiTest, RequestValidation) {
  const std::string sid = new_session();
  auto r = api_->handle({"POST", "/sessions/" + sid + "/terms", {}, R"({"op":"add","slot":1,"term":"boy"})"});
  EXPECT_EQ(r.status, 400);
  EXPECT_NE(r.body.find("\"v\""), std::string::npos);
  r = api_->handle({"POST", "/sessions/" + sid + "/terms", {}, R"({"v":2,"op":"add","slot":1,"term":"boy"})"});
  EXPECT_EQ(r.status, 400);
  r = api_->handle({"POST", "/sessions/" + sid + "/terms", {}, "not json"});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(parse(r).at("error").at("code"), "parse_error");
  r = call("POST", "/sessions/" + sid + "/terms", {{"op", "juggle"}, {"slot", 1}, {"term", "boy"}});
  EXPECT_EQ(r.status, 400);
  r = call("POST", "/sessions/" + sid + "/terms", {{"op", "add"}, {"slot", "one"}, {"term", "boy"}});
  EXPECT_EQ(r.status, 400);
  r = call("POST", "/sessions/" + sid + "/images", {{"source", "camera"}, {"image_ids", kFive}});
  EXPECT_EQ(r.status, 400);
}

TEST_F(ApiTest, RoutingErrors) {
  EXPECT_EQ(call("GET", "/nope").status, 404);
  EXPECT_EQ(call("GET", "/sessions/unknown").status, 404);
  EXPECT_EQ(call("DELETE", "/sessions").status, 405);
  EXPECT_EQ(call("GET", "/sessions/x/story").status, 405);
  EXPECT_EQ(call("POST", "/pool", json::object()).status, 405);
  const json err = parse(call("GET", "/nope"));
  EXPECT_EQ(err.at("v"), 1);
  EXPECT_EQ(err.at("error").at("code"), "not_found");
}

TEST_F(ApiTest, ServesOverHttp) {
  std::promise<int> port;
  ServeHandle handle;
  std::thread server([&] { serve(*api_, "127.0.0.1", 0, [&](int p) { port.set_value(p); }, &handle); });
  const int p = port.get_future().get();
  httplib::Client client("127.0.0.1", p);
  auto res = client.Post("/sessions", R"({"v":1})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  const std::string sid = json::parse(res->body).at("session_id");
  res = client.Get("/search?type=noun&q=wood");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body).at("results").size(), 6u);
  res = client.Get(("/sessions/" + sid).c_str());
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  handle.stop();
  server.join();
}
