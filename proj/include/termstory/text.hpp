#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace termstory {

bool is_space(char c);
std::string trim(std::string_view s);
/// ASCII lowercase; bytes >= 0x80 pass through unchanged.
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(std::span<const std::string> parts, std::string_view sep);

/// Lowercases, splits on whitespace, and splits every ASCII punctuation
/// character into its own token. An apostrophe or hyphen with a letter or
/// digit on both sides stays inside the word ("don't", "t-shirt").
std::vector<std::string> tokenize(std::string_view text);

/// Joins tokens with spaces, attaching closing punctuation to the previous word.
std::string detokenize(std::span<const std::string> tokens);

/// True for ".", "!" and "?".
bool is_sentence_end(std::string_view token);

/// Splits a token stream into sentences at sentence-final punctuation. A
/// trailing fragment without terminator becomes its own sentence.
std::vector<std::vector<std::string>> split_sentences(std::span<const std::string> tokens);

}  // namespace termstory
