#include "cfkit/text.hpp"

#include <cctype>

namespace cfkit::text {

std::string casefold(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool prev_space = false;
  for (char c : s) {
    if (c == ' ') {
      if (!prev_space) out.push_back(c);
      prev_space = true;
    } else {
      out.push_back(c);
      prev_space = false;
    }
  }
  return trim(out);
}

bool is_punct(std::string_view token) {
  if (token.empty()) return false;
  for (char c : token) {
    if (!std::ispunct(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::vector<std::string> simple_tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j == i) break;
    std::string_view word = s.substr(i, j - i);
    i = j;

    std::vector<std::string> trailing;
    std::size_t b = 0, e = word.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(word[b])) && word[b] != '\'') {
      out.emplace_back(1, word[b]);
      ++b;
    }
    while (e > b && std::ispunct(static_cast<unsigned char>(word[e - 1])) && word[e - 1] != '\'') {
      trailing.emplace_back(1, word[e - 1]);
      --e;
    }
    std::string_view core = word.substr(b, e - b);
    if (core.size() > 3 && casefold(core.substr(core.size() - 3)) == "n't") {
      out.emplace_back(core.substr(0, core.size() - 3));
      out.emplace_back(core.substr(core.size() - 3));
    } else if (!core.empty()) {
      out.emplace_back(core);
    }
    for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) out.push_back(*it);
  }
  return out;
}

}  // namespace cfkit::text
