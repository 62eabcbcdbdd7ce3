#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cfkit::text {

/// ASCII lower-casing; bytes >= 0x80 are passed through unchanged.
std::string casefold(std::string_view s);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool starts_with(std::string_view s, std::string_view prefix);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Collapses runs of spaces into one and trims both ends.
std::string collapse_spaces(std::string_view s);

/// Whitespace tokenizer that also splits leading/trailing ASCII punctuation
/// and the clitic "n't". Used only for generated text that has no parse.
std::vector<std::string> simple_tokenize(std::string_view s);

bool is_punct(std::string_view token);

}  // namespace cfkit::text
