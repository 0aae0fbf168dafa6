#include "termstory/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "termstory/error.hpp"

namespace termstory {

using nlohmann::json;

json tensors_to_json(const ParamStore& params) {
  json out = json::object();
  for (const auto& [name, p] : params) {
    out[name] = {{"shape", p.value.shape()}, {"data", p.value.storage()}};
  }
  return out;
}

void tensors_from_json(const json& tensors, ParamStore& params) {
  if (!tensors.is_object()) throw Error(ErrorCode::kParse, "checkpoint: \"tensors\" must be an object");
  for (const auto& [name, entry] : tensors.items()) {
    try {
      auto shape = entry.at("shape").get<Shape>();
      auto data = entry.at("data").get<std::vector<double>>();
      Tensor t(std::move(shape), std::move(data));
      if (!t.all_finite()) throw Error(ErrorCode::kNonFinite, "non-finite value");
      params.add(name, std::move(t));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, "checkpoint tensor '" + name + "': " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "checkpoint tensor '" + name + "': " + e.what());
    }
  }
}

void assign_tensors(const ParamStore& source, ParamStore& target) {
  if (source.size() != target.size()) {
    throw Error(ErrorCode::kShape, "checkpoint holds " + std::to_string(source.size()) + " tensors, model expects " +
                                       std::to_string(target.size()));
  }
  for (auto& [name, p] : target) {
    if (!source.contains(name)) throw Error(ErrorCode::kNotFound, "checkpoint is missing tensor '" + name + "'");
    const auto& s = source.at(name);
    if (s.value.shape() != p.value.shape()) {
      throw Error(ErrorCode::kShape, "tensor '" + name + "' has shape " + shape_string(s.value.shape()) +
                                         ", model expects " + shape_string(p.value.shape()));
    }
    p.value = s.value;
  }
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  json doc = {{"v", kCheckpointVersion},
              {"kind", ckpt.kind},
              {"config", ckpt.config},
              {"vocab", ckpt.vocab},
              {"tensors", tensors_to_json(ckpt.params)}};
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("checkpoint: ") + e.what());
  }
  if (!doc.is_object() || doc.value("v", 0) != kCheckpointVersion) {
    throw Error(ErrorCode::kParse, "checkpoint: unsupported or missing version");
  }
  Checkpoint ckpt;
  try {
    ckpt.kind = doc.at("kind").get<std::string>();
    ckpt.config = doc.at("config");
    ckpt.vocab = doc.at("vocab").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("checkpoint: ") + e.what());
  }
  tensors_from_json(doc.at("tensors"), ckpt.params);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << checkpoint_to_string(ckpt);
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace termstory
