#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace storyweave {

/// Lowercases, splits on whitespace and strips leading/trailing punctuation
/// from every token. Empty results are dropped. Shared by the tf-idf
/// vectorizer, the nuclearity cues and the encoder vocabulary.
std::vector<std::string> tokenize(std::string_view text);

// Raw whitespace-separated pieces, no normalization.
std::vector<std::string_view> whitespace_split(std::string_view text);

std::size_t whitespace_token_count(std::string_view text);

std::string trim(std::string_view text);

/// Trims and replaces every internal whitespace run with a single space.
std::string collapse_whitespace(std::string_view text);

std::string to_lower_ascii(std::string_view text);

}  // namespace storyweave
