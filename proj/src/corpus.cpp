#include "cfkit/corpus.hpp"

#include <algorithm>
#include <set>

#include "cfkit/error.hpp"
#include "cfkit/text.hpp"

namespace cfkit {

Sentence::Sentence(std::string id, std::string text, std::vector<Token> tokens, bool parsed,
                   std::vector<ExtraLine> extra)
    : id_(std::move(id)),
      text_(std::move(text)),
      tokens_(std::move(tokens)),
      extra_(std::move(extra)),
      parsed_(parsed) {
  const auto n = tokens_.size();
  std::size_t roots = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Token& t = tokens_[i];
    t.index = i;
    if (t.surface.empty()) throw ValidationError("token " + std::to_string(i + 1) + " has empty surface");
    if (t.head == kRootHead) {
      ++roots;
    } else if (t.head < 0 || static_cast<std::size_t>(t.head) >= n) {
      throw ValidationError("token " + std::to_string(i + 1) + " head out of range");
    } else if (static_cast<std::size_t>(t.head) == i) {
      throw ValidationError("token " + std::to_string(i + 1) + " is its own head");
    }
  }
  if (n > 0 && roots == 0) throw ValidationError("no root token (cyclic head links)");
  if (roots > 1) throw ValidationError("multiple roots");

  // Every chain must reach the root within n steps.
  for (std::size_t i = 0; i < n; ++i) {
    int cur = static_cast<int>(i);
    std::size_t steps = 0;
    while (cur != kRootHead) {
      cur = tokens_[cur].head;
      if (++steps > n) throw ValidationError("cyclic head links at token " + std::to_string(i + 1));
    }
  }
  if (text_.empty()) text_ = detokenize();
  build_index();
}

void Sentence::build_index() {
  children_.assign(tokens_.size(), {});
  for (const Token& t : tokens_) {
    if (!t.is_root()) children_[t.head].push_back(t.index);
  }
}

Sentence Sentence::from_text(std::string id, std::string raw) {
  auto words = text::simple_tokenize(raw);
  std::vector<Token> toks;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    Token t;
    t.surface = words[i];
    t.lemma = text::casefold(words[i]);
    t.upos = "_";
    t.xpos = "_";
    t.head = i == 0 ? kRootHead : 0;
    t.deprel = i == 0 ? "root" : "dep";
    std::size_t found = raw.find(words[i], pos);
    if (found == std::string::npos) found = pos;
    t.space_before = i > 0 && found > pos;
    pos = found + words[i].size();
    toks.push_back(std::move(t));
  }
  return Sentence(std::move(id), std::move(raw), std::move(toks), false);
}

std::size_t Sentence::root() const {
  for (const Token& t : tokens_) {
    if (t.is_root()) return t.index;
  }
  throw ValidationError("empty sentence has no root");
}

const std::vector<std::size_t>& Sentence::children(std::size_t i) const { return children_.at(i); }

std::string Sentence::detokenize() const {
  std::string out;
  for (const Token& t : tokens_) {
    if (t.space_before && !out.empty()) out.push_back(' ');
    out += t.surface;
  }
  return out;
}

std::string Sentence::span_text(TokenRange r) const {
  std::string out;
  for (std::size_t i = r.begin; i < r.end && i < tokens_.size(); ++i) {
    if (i > r.begin && tokens_[i].space_before) out.push_back(' ');
    out += tokens_[i].surface;
  }
  return out;
}

std::vector<std::size_t> Sentence::char_offsets() const {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  for (const Token& t : tokens_) {
    if (t.space_before && pos > 0) ++pos;
    out.push_back(pos);
    pos += t.surface.size();
  }
  return out;
}

std::vector<std::string> Sentence::surfaces() const {
  std::vector<std::string> out;
  out.reserve(tokens_.size());
  for (const Token& t : tokens_) out.push_back(t.surface);
  return out;
}

Sentence Sentence::with_id(std::string id) const {
  Sentence s = *this;
  s.id_ = std::move(id);
  return s;
}

std::vector<std::size_t> subtree_indices(const Sentence& s, std::size_t i) {
  if (i >= s.size()) throw ValidationError("token index " + std::to_string(i) + " out of range");
  std::vector<std::size_t> out;
  std::vector<std::size_t> stack{i};
  while (!stack.empty()) {
    std::size_t cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    for (std::size_t c : s.children(cur)) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_contiguous(const std::vector<std::size_t>& idx) {
  for (std::size_t k = 1; k < idx.size(); ++k) {
    if (idx[k] != idx[k - 1] + 1) return false;
  }
  return true;
}

namespace {

bool is_nominal(const Token& t) { return t.upos == "NOUN" || t.upos == "PROPN" || t.upos == "PRON"; }

bool is_chunk_dependent(const std::string& deprel) {
  static const std::set<std::string> rels{"det", "amod", "compound", "nummod", "det:poss",
                                          "nmod:poss", "flat", "det:predet", "compound:prt"};
  return rels.count(deprel) > 0;
}

}  // namespace

std::vector<TokenRange> noun_chunks(const Sentence& s) {
  std::vector<TokenRange> candidates;
  for (const Token& head : s.tokens()) {
    if (!is_nominal(head)) continue;
    std::set<std::size_t> members{head.index};
    for (std::size_t c : s.children(head.index)) {
      if (!is_chunk_dependent(s[c].deprel)) continue;
      for (std::size_t d : subtree_indices(s, c)) members.insert(d);
    }
    // Grow outward from the head while members stay contiguous.
    std::size_t b = head.index, e = head.index + 1;
    while (b > 0 && members.count(b - 1)) --b;
    while (e < s.size() && members.count(e)) ++e;
    candidates.push_back({b, e});
  }
  // Larger chunks win; nested nominals (compounds) are absorbed.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const TokenRange& a, const TokenRange& b) { return a.size() > b.size(); });
  std::vector<TokenRange> chosen;
  for (const TokenRange& r : candidates) {
    bool overlaps = std::any_of(chosen.begin(), chosen.end(), [&](const TokenRange& c) {
      return r.begin < c.end && c.begin < r.end;
    });
    if (!overlaps) chosen.push_back(r);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

const Sentence* Dataset::find(const std::string& id) const {
  for (const Sentence& s : sentences) {
    if (s.id() == id) return &s;
  }
  return nullptr;
}

const Sentence* Dataset::find_by_text(const std::string& t) const {
  for (const Sentence& s : sentences) {
    if (s.text() == t) return &s;
  }
  return nullptr;
}

std::vector<const Sentence*> Dataset::originals() const {
  std::set<std::string> revised;
  for (const auto& [orig, revs] : pair_index) revised.insert(revs.begin(), revs.end());
  std::vector<const Sentence*> out;
  for (const Sentence& s : sentences) {
    if (!revised.count(s.id())) out.push_back(&s);
  }
  return out;
}

}  // namespace cfkit
