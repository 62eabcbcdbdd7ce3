#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "cfkit/corpus.hpp"
#include "cfkit/text.hpp"

namespace testutil {

// "He/PRON/PRP/3/nsubj is/AUX/VBZ/3/aux ..." with 1-based heads (0 = root).
// An optional sixth field gives the lemma; otherwise the lowercased form.
inline cfkit::Sentence mk(const std::string& id, const std::string& spec) {
  std::vector<cfkit::Token> toks;
  std::istringstream in(spec);
  std::string item;
  while (in >> item) {
    auto parts = cfkit::text::split(item, '/');
    cfkit::Token t;
    t.index = toks.size();
    t.surface = parts.at(0);
    t.upos = parts.at(1);
    t.xpos = parts.at(2);
    t.head = std::stoi(parts.at(3)) - 1;
    t.deprel = parts.at(4);
    t.lemma = parts.size() > 5 ? parts[5] : cfkit::text::casefold(t.surface);
    t.space_before = !toks.empty() && !cfkit::text::is_punct(t.surface);
    toks.push_back(std::move(t));
  }
  return cfkit::Sentence(id, "", std::move(toks));
}

inline std::string fixture(const std::string& name) { return std::string(CFKIT_FIXTURES_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("cfkit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

}  // namespace testutil
