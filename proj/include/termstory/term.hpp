#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace termstory {

enum class TermKind { kNoun, kFrame };

/// A noun lemma or a verb-frame name. Written as "bike" or "f:Placing" in
/// every text format.
struct Term {
  TermKind kind = TermKind::kNoun;
  std::string value;

  static Term noun(std::string v) { return {TermKind::kNoun, std::move(v)}; }
  static Term frame(std::string v) { return {TermKind::kFrame, std::move(v)}; }

  bool is_frame() const { return kind == TermKind::kFrame; }

  /// "f:Name" for frames, the lemma for nouns.
  std::string str() const;
  /// Inverse of str(). Throws Error(kInvalidArgument) on an empty value.
  static Term parse(std::string_view text);

  auto operator<=>(const Term&) const = default;
  bool operator==(const Term&) const = default;
};

inline constexpr std::string_view kFramePrefix = "f:";

}  // namespace termstory
