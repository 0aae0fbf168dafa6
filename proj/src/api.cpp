#include "termstory/api.hpp"

#include <charconv>

#include <nlohmann/json.hpp>

#include "termstory/lexicon.hpp"
#include "termstory/session.hpp"
#include "termstory/text.hpp"

namespace termstory {

using nlohmann::json;

namespace {

ApiResponse json_response(int status, json body) {
  body["v"] = kApiVersion;
  return {status, "application/json", body.dump()};
}

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
  return json_response(status, {{"error", {{"code", code}, {"message", message}}}});
}

json parse_body(const ApiRequest& req, bool required) {
  if (trim(req.body).empty()) {
    if (required) throw Error(ErrorCode::kInvalidArgument, "request body required");
    return json::object();
  }
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("request body is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "request body must be a JSON object");
  if (!j.contains("v") || j["v"] != kApiVersion) {
    throw Error(ErrorCode::kInvalidArgument, "request body must carry \"v\": 1");
  }
  return j;
}

template <typename T>
T field(const json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("missing or invalid field '") + name + "'");
  }
}

std::size_t parse_index(const std::string& s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kInvalidArgument, "story index '" + s + "' is not a number");
  }
  return v;
}

json terms_state(const Session& s) {
  json stored = json::array();
  for (const auto& t : s.stored_terms) stored.push_back(t.str());
  return {{"terms", term_sets_to_json(s.current_terms)}, {"stored", stored}};
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse:
    case ErrorCode::kShape:
    case ErrorCode::kNonFinite:
    case ErrorCode::kOverflow:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kDuplicate:
      return 409;
    case ErrorCode::kUnavailable:
      return 503;
    case ErrorCode::kIo:
    case ErrorCode::kCorrupt:
      return 500;
  }
  return 500;
}

ApiResponse Api::handle(const ApiRequest& req) const {
  try {
    return route(req);
  } catch (const Error& e) {
    return error_response(http_status(e.code()), to_string(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

ApiResponse Api::route(const ApiRequest& req) const {
  const auto parts = split(req.path, '/');
  std::vector<std::string> seg;
  for (const auto& p : parts)
    if (!p.empty()) seg.push_back(p);
  const bool get = req.method == "GET", post = req.method == "POST";
  auto method_not_allowed = [&] { return error_response(405, "method_not_allowed", req.method + " " + req.path); };

  if (seg.size() == 1 && seg[0] == "pool") {
    if (!get) return method_not_allowed();
    json images = json::array();
    if (service_.pool()) {
      for (const auto& e : service_.pool()->entries()) {
        images.push_back({{"image_id", e.image_id}, {"thumbnail", e.thumbnail}});
      }
    }
    return json_response(200, {{"images", images}});
  }

  if (seg.size() == 1 && seg[0] == "search") {
    if (!get) return method_not_allowed();
    auto type = req.query.find("type");
    auto q = req.query.find("q");
    if (type == req.query.end() || q == req.query.end()) {
      throw Error(ErrorCode::kInvalidArgument, "search needs type and q parameters");
    }
    json results = json::array();
    if (type->second == "noun") {
      for (const auto& n : search_nouns(service_.lexicon(), q->second)) {
        results.push_back({{"lemma", n.lemma}, {"image_refs", n.description_image_refs}, {"term", n.lemma}});
      }
    } else if (type->second == "frame") {
      for (const auto& f : search_frames(service_.lexicon(), q->second)) {
        results.push_back({{"name", f.name},
                           {"description", f.description},
                           {"lexical_units", f.lexical_units},
                           {"term", Term::frame(f.name).str()}});
      }
    } else {
      throw Error(ErrorCode::kInvalidArgument, "search type must be 'noun' or 'frame'");
    }
    return json_response(200, {{"type", type->second}, {"query", q->second}, {"results", results}});
  }

  if (seg.size() == 3 && seg[0] == "terms" && seg[2] == "description") {
    if (!get) return method_not_allowed();
    const Term term = Term::parse(seg[1]);
    const auto d = describe_term(service_.lexicon(), term);
    return json_response(200, {{"term", term.str()},
                               {"kind", term.is_frame() ? "frame" : "noun"},
                               {"text", d.text},
                               {"image_refs", d.image_refs}});
  }

  if (seg.empty() || seg[0] != "sessions") return error_response(404, "not_found", "no route for " + req.path);

  if (seg.size() == 1) {
    if (!post) return method_not_allowed();
    parse_body(req, false);
    return json_response(201, {{"session_id", service_.create_session()}});
  }
  const std::string& sid = seg[1];
  if (seg.size() == 2) {
    if (!get) return method_not_allowed();
    return json_response(200, {{"session", service_.get_session(sid).to_json()}});
  }
  if (seg.size() == 3 && seg[2] == "events") {
    if (!get) return method_not_allowed();
    std::string out;
    for (const auto& e : service_.events(sid)) out += e.to_line() + "\n";
    return {200, "application/x-ndjson", out};
  }
  if (seg.size() == 3 && seg[2] == "images") {
    if (!post) return method_not_allowed();
    const json body = parse_body(req, true);
    const ImageSource source = image_source_from_string(field<std::string>(body, "source"));
    TermSets terms;
    if (source == ImageSource::kPool) {
      terms = service_.select_images(sid, field<std::vector<std::string>>(body, "image_ids"));
    } else {
      std::vector<ImageFeature> feats;
      for (const auto& f : field<json>(body, "features")) {
        feats.push_back({field<std::string>(f, "image_id"), field<std::vector<double>>(f, "vector")});
      }
      terms = service_.select_uploaded_images(sid, feats);
    }
    return json_response(200, {{"terms", term_sets_to_json(terms)}});
  }
  if (seg.size() == 3 && seg[2] == "terms") {
    if (!post) return method_not_allowed();
    const json body = parse_body(req, true);
    TermOp op;
    op.kind = term_op_from_string(field<std::string>(body, "op"));
    op.slot = field<int>(body, "slot");
    op.term = Term::parse(field<std::string>(body, "term"));
    service_.modify_terms(sid, op);
    return json_response(200, terms_state(service_.get_session(sid)));
  }
  if (seg.size() == 3 && seg[2] == "story") {
    if (!post) return method_not_allowed();
    const json body = parse_body(req, false);
    const DecodeConfig decode = DecodeConfig::from_json(body.value("decode", json::object()));
    const auto g = service_.generate_story(sid, decode);
    return json_response(200, {{"story_index", g.index},
                               {"sentences", g.story.sentences},
                               {"text", g.story.text()},
                               {"truncated", g.truncated}});
  }
  if (seg.size() == 5 && seg[2] == "stories" && (seg[4] == "rating" || seg[4] == "edit")) {
    if (!post) return method_not_allowed();
    const std::size_t k = parse_index(seg[3]);
    const json body = parse_body(req, true);
    if (seg[4] == "rating") {
      if (!body.contains("stars") || !body["stars"].is_number_integer()) {
        throw Error(ErrorCode::kInvalidArgument, "stars must be an integer in 1..5");
      }
      service_.rate_story(sid, k, body["stars"].get<int>());
    } else {
      service_.edit_story(sid, k, field<std::string>(body, "text"));
    }
    return json_response(200, {{"story_index", k}, {"ok", true}});
  }
  return error_response(404, "not_found", "no route for " + req.path);
}

}  // namespace termstory
