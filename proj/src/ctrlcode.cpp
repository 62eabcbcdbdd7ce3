#include "cfkit/ctrlcode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "cfkit/error.hpp"
#include "cfkit/text.hpp"

namespace cfkit {

namespace {

bool tagged(const Token& t) { return !t.upos.empty() && t.upos != "_"; }

bool is_content(const Token& t) {
  if (!tagged(t)) {
    static const std::set<std::string> stop{"a", "an", "the", "is", "are", "was", "were", "be", "of",
                                            "by", "in", "on", "to", "for", "and", "or", "it"};
    return !text::is_punct(t.surface) && !stop.count(text::casefold(t.surface));
  }
  static const std::set<std::string> content{"NOUN", "PROPN", "VERB", "ADJ", "ADV", "NUM"};
  return content.count(t.upos) > 0;
}

struct Focus {
  const Perturbation& p;
  std::vector<std::size_t> spans;

  template <class Fn>
  void each_token(Fn&& fn) const {
    for (std::size_t k : spans) {
      const EditSpan& e = p.edits[k];
      for (std::size_t i = e.x.begin; i < e.x.end; ++i) fn(p.original[i], p.original, e.x);
      for (std::size_t i = e.xhat.begin; i < e.xhat.end; ++i) fn(p.revised[i], p.revised, e.xhat);
    }
  }

  std::vector<std::string> span_phrases() const {
    std::vector<std::string> out;
    for (std::size_t k : spans) {
      const EditSpan& e = p.edits[k];
      if (!e.x.empty()) out.push_back(text::casefold(p.original.span_text(e.x)));
      if (!e.xhat.empty()) out.push_back(text::casefold(p.revised.span_text(e.xhat)));
    }
    return out;
  }
};

// Lexicon entries with a space match as whole-word phrases inside a span.
bool touches_lexicon(const Focus& f, const std::set<std::string>& lex) {
  bool hit = false;
  f.each_token([&](const Token& t, const Sentence&, TokenRange) {
    if (lex.count(text::casefold(t.surface))) hit = true;
  });
  if (hit) return true;
  for (const std::string& phrase : f.span_phrases()) {
    const std::string padded = " " + phrase + " ";
    for (const std::string& entry : lex) {
      if (entry.find(' ') != std::string::npos && padded.find(" " + entry + " ") != std::string::npos) return true;
    }
  }
  return false;
}

bool touches_negation(const Focus& f, const ClassifierConfig& cfg) {
  bool neg_rel = false;
  f.each_token([&](const Token& t, const Sentence&, TokenRange) {
    if (t.deprel == "neg") neg_rel = true;
  });
  return neg_rel || touches_lexicon(f, cfg.negation_lexicon);
}

bool touches_quantifier(const Focus& f, const ClassifierConfig& cfg) {
  bool numeral = false;
  f.each_token([&](const Token& t, const Sentence&, TokenRange) {
    if (t.upos == "NUM" || t.xpos == "CD") numeral = true;
  });
  return numeral || touches_lexicon(f, cfg.quantifier_lexicon);
}

double content_overlap(const Perturbation& p, const std::vector<std::size_t>& spans) {
  std::multiset<std::string> removed, added;
  for (std::size_t k : spans) {
    const EditSpan& e = p.edits[k];
    for (std::size_t i = e.x.begin; i < e.x.end; ++i) {
      if (is_content(p.original[i])) removed.insert(text::casefold(p.original[i].surface));
    }
    for (std::size_t i = e.xhat.begin; i < e.xhat.end; ++i) {
      if (is_content(p.revised[i])) added.insert(text::casefold(p.revised[i].surface));
    }
  }
  if (removed.empty() || added.empty()) return 0.0;
  std::vector<std::string> common;
  std::set_intersection(removed.begin(), removed.end(), added.begin(), added.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(std::max(removed.size(), added.size()));
}

std::vector<std::string> upos_of(const Sentence& s, TokenRange r) {
  std::vector<std::string> out;
  for (std::size_t i = r.begin; i < r.end; ++i) out.push_back(s[i].upos);
  return out;
}

bool same_pos(const Sentence& a, TokenRange ra, const Sentence& b, TokenRange rb) {
  if (!a.parsed() || !b.parsed()) return true;
  return upos_of(a, ra) == upos_of(b, rb);
}

bool is_chunk(const Sentence& s, TokenRange r) {
  if (!s.parsed()) return false;
  for (const TokenRange& c : noun_chunks(s)) {
    if (c == r) return true;
  }
  return false;
}

bool lexical_swap(const Focus& f) {
  if (f.spans.size() != 1) return false;
  const EditSpan& e = f.p.edits[f.spans[0]];
  if (e.kind != EditKind::replace) return false;
  const bool single = e.x.size() == 1 && e.xhat.size() == 1;
  const bool chunk = is_chunk(f.p.original, e.x) && is_chunk(f.p.revised, e.xhat);
  if (!single && !chunk) return false;
  return same_pos(f.p.original, e.x, f.p.revised, e.xhat);
}

enum class Shape { inserts, deletes, replaces, mixed };

Shape shape_of(const Focus& f) {
  bool ins = false, del = false, rep = false;
  for (std::size_t k : f.spans) {
    switch (f.p.edits[k].kind) {
      case EditKind::insert: ins = true; break;
      case EditKind::remove: del = true; break;
      case EditKind::replace: rep = true; break;
    }
  }
  if (ins && !del && !rep) return Shape::inserts;
  if (del && !ins && !rep) return Shape::deletes;
  if (rep || (ins && del)) return Shape::replaces;
  return Shape::mixed;
}

bool short_phrases(const Focus& f, std::size_t limit) {
  std::size_t x_total = 0, xhat_total = 0;
  for (std::size_t k : f.spans) {
    x_total += f.p.edits[k].x.size();
    xhat_total += f.p.edits[k].xhat.size();
  }
  return x_total <= limit && xhat_total <= limit;
}

// Tree intactness is ternary: unknown when a side has no parse.
enum class Tree { intact, altered, unknown };

Tree tree_state(const Perturbation& p) {
  if (!p.original.parsed() || !p.revised.parsed()) return Tree::unknown;
  return remaining_tree_intact(p) ? Tree::intact : Tree::altered;
}

ControlCode cascade(const Perturbation& p, const std::vector<std::size_t>& spans, const ClassifierConfig& cfg,
                    bool gate) {
  if (p.edits.empty() || spans.empty()) return ControlCode::global;
  if (gate && levenshtein_norm(p.original, p.revised) > cfg.global_edit_max) return ControlCode::global;

  const Focus f{p, spans};
  if (touches_negation(f, cfg)) return ControlCode::negation;
  if (touches_quantifier(f, cfg)) return ControlCode::quantifier;
  if (content_overlap(p, spans) >= cfg.shuffle_overlap_min) return ControlCode::shuffle;
  if (lexical_swap(f)) return ControlCode::lexical;

  const Tree tree = tree_state(p);
  const bool keeps_tree = tree != Tree::altered;
  const bool is_short = short_phrases(f, cfg.max_phrase_tokens);
  const Shape shape = shape_of(f);
  if (keeps_tree && is_short) {
    if (shape == Shape::inserts) return ControlCode::insert;
    if (shape == Shape::deletes) return ControlCode::remove;
    if (shape == Shape::replaces) return ControlCode::resemantic;
  }
  if (tree == Tree::altered) return ControlCode::restructure;
  return ControlCode::global;
}

std::vector<std::size_t> all_spans(const Perturbation& p) {
  std::vector<std::size_t> v(p.edits.size());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

void ClassifierConfig::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!in_unit(shuffle_overlap_min)) throw ValidationError("shuffle_overlap_min must be in (0,1]");
  if (!in_unit(global_edit_max)) throw ValidationError("global_edit_max must be in (0,1]");
  if (max_phrase_tokens == 0) throw ValidationError("max_phrase_tokens must be positive");
}

double EmbeddingShiftScorer::shift(const std::string& removed, const std::string& added) const {
  auto vecs = embed_({removed, added});
  if (vecs.size() != 2 || vecs[0].size() != vecs[1].size()) throw ValidationError("embedding backend returned bad shape");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < vecs[0].size(); ++i) {
    dot += vecs[0][i] * vecs[1][i];
    na += vecs[0][i] * vecs[0][i];
    nb += vecs[1][i] * vecs[1][i];
  }
  if (na == 0 || nb == 0) return 1.0;
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

bool remaining_tree_intact(const Perturbation& p) {
  const Sentence& x = p.original;
  const Sentence& y = p.revised;
  constexpr std::size_t kMatched = static_cast<std::size_t>(-1);
  std::vector<std::size_t> span_x(x.size(), kMatched), span_y(y.size(), kMatched);
  std::vector<std::size_t> x_to_y(x.size(), kMatched);
  std::size_t i = 0, j = 0;
  for (std::size_t k = 0; k < p.edits.size(); ++k) {
    const EditSpan& e = p.edits[k];
    for (; i < e.x.begin && j < e.xhat.begin; ++i, ++j) x_to_y[i] = j;
    for (std::size_t a = e.x.begin; a < e.x.end; ++a) span_x[a] = k;
    for (std::size_t b = e.xhat.begin; b < e.xhat.end; ++b) span_y[b] = k;
    i = e.x.end;
    j = e.xhat.end;
  }
  for (; i < x.size() && j < y.size(); ++i, ++j) x_to_y[i] = j;

  for (std::size_t a = 0; a < x.size(); ++a) {
    if (x_to_y[a] == kMatched) continue;
    const Token& tx = x[a];
    const Token& ty = y[x_to_y[a]];
    if (tx.deprel != ty.deprel) return false;
    if (tx.is_root() || ty.is_root()) {
      if (tx.is_root() != ty.is_root()) return false;
      continue;
    }
    const auto hx = static_cast<std::size_t>(tx.head);
    const auto hy = static_cast<std::size_t>(ty.head);
    if (x_to_y[hx] != kMatched) {
      if (x_to_y[hx] != hy) return false;
    } else if (span_x[hx] == kMatched || span_x[hx] != span_y[hy]) {
      return false;
    }
  }
  return true;
}

ControlCode classify(const Perturbation& p, const ClassifierConfig& cfg) {
  return cascade(p, all_spans(p), cfg, true);
}

ControlCode classify_span(const Perturbation& p, std::size_t span, const ClassifierConfig& cfg) {
  if (span >= p.edits.size()) throw ValidationError("span index out of range");
  return cascade(p, {span}, cfg, false);
}

ControlCode primary_code(const Perturbation& p, const ClassifierConfig& cfg) {
  if (p.edits.size() <= 1) return classify(p, cfg);
  const auto spans = all_spans(p);
  if (levenshtein_norm(p.original, p.revised) > cfg.global_edit_max) return ControlCode::global;
  if (content_overlap(p, spans) >= cfg.shuffle_overlap_min && !touches_negation(Focus{p, spans}, cfg) &&
      !touches_quantifier(Focus{p, spans}, cfg)) {
    return ControlCode::shuffle;
  }

  const double denom = static_cast<double>(std::max({p.original.size(), p.revised.size(), std::size_t{1}}));
  ControlCode best = ControlCode::global;
  double best_score = -1.0;
  for (std::size_t k : spans) {
    const ControlCode code = classify_span(p, k, cfg);
    const EditSpan& e = p.edits[k];
    double score;
    if (cfg.semantic_shift) {
      score = cfg.semantic_shift->shift(p.original.span_text(e.x), p.revised.span_text(e.xhat));
    } else {
      score = static_cast<double>(std::max(e.x.size(), e.xhat.size())) / denom;
    }
    if (score > best_score || (score == best_score && rule_rank(code) < rule_rank(best))) {
      best = code;
      best_score = score;
    }
  }
  return best;
}

std::set<std::string> load_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open word list " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string w = text::trim(line);
    if (w.empty() || w[0] == '#') continue;
    out.insert(text::casefold(w));
  }
  return out;
}

}  // namespace cfkit
