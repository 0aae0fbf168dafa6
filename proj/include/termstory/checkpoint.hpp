#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "termstory/optim.hpp"

namespace termstory {

inline constexpr int kCheckpointVersion = 1;

/// JSON checkpoint container:
///   {"v":1, "kind":..., "config":{...}, "vocab":[...],
///    "tensors":{name:{"shape":[...],"data":[...]}}}
/// Keys are sorted and doubles are written in shortest round-trip form, so
/// save -> load -> save reproduces the same bytes.
struct Checkpoint {
  std::string kind;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> vocab;
  ParamStore params;
};

nlohmann::json tensors_to_json(const ParamStore& params);
/// Fills `params` from a "tensors" object, registering new entries.
void tensors_from_json(const nlohmann::json& tensors, ParamStore& params);
/// Copies values into an already-shaped store; every name and shape must match.
void assign_tensors(const ParamStore& source, ParamStore& target);

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace termstory
