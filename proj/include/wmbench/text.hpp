#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace wmbench {

// Whitespace word-splitting with ASCII lowercasing: the tokenizer for the toy
// language model and the hashed n-gram embedder.
std::vector<std::string> tokenize(std::string_view text);

// Join tokens with single spaces.
std::string join_tokens(const std::vector<std::string>& tokens);

// First min(max_words, word_count) whitespace-delimited words of `text`,
// re-joined with single spaces. Does not lowercase (prompts keep their case).
std::string first_words(std::string_view text, int max_words);

} // namespace wmbench
