#include "cfkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "cfkit/diff.hpp"
#include "cfkit/error.hpp"
#include "cfkit/text.hpp"

namespace cfkit {

OrderedTree to_ordered_tree(const Sentence& s, TreeLabel label) {
  OrderedTree t;
  for (const Token& tok : s.tokens()) {
    switch (label) {
      case TreeLabel::deprel: t.labels.push_back(tok.deprel); break;
      case TreeLabel::upos: t.labels.push_back(tok.upos); break;
      case TreeLabel::deprel_upos: t.labels.push_back(tok.deprel + "/" + tok.upos); break;
    }
    t.parent.push_back(tok.head);
  }
  return t;
}

namespace {

// Post-order view of a forest: node labels, leftmost-leaf descendants, and
// keyroots, all in 1-based post-order numbering.
struct PostOrder {
  std::vector<std::string> label;  // [1..n]
  std::vector<std::size_t> lml;    // leftmost leaf of the subtree rooted at i
  std::vector<std::size_t> keyroots;

  explicit PostOrder(const OrderedTree& t) {
    const std::size_t n = t.size();
    std::vector<std::vector<std::size_t>> kids(n);
    std::vector<std::size_t> roots;
    for (std::size_t i = 0; i < n; ++i) {
      if (t.parent[i] < 0) roots.push_back(i);
      else kids[static_cast<std::size_t>(t.parent[i])].push_back(i);
    }
    label.assign(n + 1, "");
    lml.assign(n + 1, 0);
    std::size_t counter = 0;
    // Iterative post-order to keep deep chains off the call stack.
    struct Frame {
      std::size_t node;
      std::size_t next_child;
      std::size_t first_leaf;
    };
    for (std::size_t r : roots) {
      std::vector<Frame> stack{{r, 0, 0}};
      while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_child < kids[f.node].size()) {
          stack.push_back({kids[f.node][f.next_child++], 0, 0});
          continue;
        }
        const std::size_t id = ++counter;
        label[id] = t.labels[f.node];
        lml[id] = f.first_leaf == 0 ? id : f.first_leaf;
        const std::size_t my_lml = lml[id];
        stack.pop_back();
        if (!stack.empty() && stack.back().first_leaf == 0) stack.back().first_leaf = my_lml;
      }
    }
    // A keyroot is the highest node for each distinct leftmost leaf.
    std::map<std::size_t, std::size_t> highest;
    for (std::size_t i = 1; i <= n; ++i) highest[lml[i]] = std::max(highest[lml[i]], i);
    for (const auto& [leaf, node] : highest) keyroots.push_back(node);
    std::sort(keyroots.begin(), keyroots.end());
  }

  std::size_t size() const { return label.size() - 1; }
};

}  // namespace

double tree_edit_distance(const OrderedTree& a, const OrderedTree& b) {
  const PostOrder A(a), B(b);
  const std::size_t n = A.size(), m = B.size();
  std::vector<std::vector<double>> td(n + 1, std::vector<double>(m + 1, 0.0));
  std::vector<std::vector<double>> fd(n + 2, std::vector<double>(m + 2, 0.0));
  // Virtual super-root: forests compare as children of a shared root.
  for (std::size_t i : A.keyroots) {
    for (std::size_t j : B.keyroots) {
      const std::size_t li = A.lml[i], lj = B.lml[j];
      fd[li - 1][lj - 1] = 0.0;
      for (std::size_t x = li; x <= i; ++x) fd[x][lj - 1] = fd[x - 1][lj - 1] + 1.0;
      for (std::size_t y = lj; y <= j; ++y) fd[li - 1][y] = fd[li - 1][y - 1] + 1.0;
      for (std::size_t x = li; x <= i; ++x) {
        for (std::size_t y = lj; y <= j; ++y) {
          const double del = fd[x - 1][y] + 1.0;
          const double ins = fd[x][y - 1] + 1.0;
          if (A.lml[x] == li && B.lml[y] == lj) {
            const double rel = fd[x - 1][y - 1] + (A.label[x] == B.label[y] ? 0.0 : 1.0);
            fd[x][y] = std::min({del, ins, rel});
            td[x][y] = fd[x][y];
          } else {
            const double sub = fd[A.lml[x] - 1][B.lml[y] - 1] + td[x][y];
            fd[x][y] = std::min({del, ins, sub});
          }
        }
      }
    }
  }
  if (n == 0) return static_cast<double>(m);
  if (m == 0) return static_cast<double>(n);
  // Whole-forest distance: rerun the forest recurrence over all nodes.
  std::vector<std::vector<double>> full(n + 1, std::vector<double>(m + 1, 0.0));
  for (std::size_t x = 1; x <= n; ++x) full[x][0] = full[x - 1][0] + 1.0;
  for (std::size_t y = 1; y <= m; ++y) full[0][y] = full[0][y - 1] + 1.0;
  for (std::size_t x = 1; x <= n; ++x) {
    for (std::size_t y = 1; y <= m; ++y) {
      const double del = full[x - 1][y] + 1.0;
      const double ins = full[x][y - 1] + 1.0;
      const double sub = full[A.lml[x] - 1][B.lml[y] - 1] + td[x][y];
      full[x][y] = std::min({del, ins, sub});
    }
  }
  return full[n][m];
}

double tree_edit_distance(const Sentence& a, const Sentence& b, TreeLabel label) {
  return tree_edit_distance(to_ordered_tree(a, label), to_ordered_tree(b, label));
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<Ngram, std::size_t> out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[Ngram(toks.begin() + i, toks.begin() + i + n)];
  return out;
}

}  // namespace

double bleu4(const std::vector<std::string>& hyp, const std::vector<std::vector<std::string>>& refs) {
  if (hyp.empty() || refs.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto hyp_counts = ngram_counts(hyp, n);
    std::map<Ngram, std::size_t> max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    std::size_t matched = 0, total = 0;
    for (const auto& [g, c] : hyp_counts) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(c, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      p = (static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0);
    }
    log_sum += 0.25 * std::log(p);
  }
  const double c = static_cast<double>(hyp.size());
  std::size_t closest = refs.front().size();
  for (const auto& r : refs) {
    const auto diff = [&](std::size_t len) { return std::abs(static_cast<double>(len) - c); };
    if (diff(r.size()) < diff(closest) || (diff(r.size()) == diff(closest) && r.size() < closest)) closest = r.size();
  }
  const double r = static_cast<double>(closest);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

double self_bleu(const std::vector<std::string>& texts) {
  if (texts.size() < 2) throw ValidationError("self-BLEU needs at least two texts");
  std::vector<std::vector<std::string>> toks;
  for (const auto& t : texts) toks.push_back(text::simple_tokenize(t));
  double sum = 0.0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::vector<std::vector<std::string>> refs;
    for (std::size_t j = 0; j < toks.size(); ++j) {
      if (j != i) refs.push_back(toks[j]);
    }
    sum += bleu4(toks[i], refs);
  }
  return sum / static_cast<double>(toks.size());
}

double control_success_rate(const std::vector<ControlRequest>& requests, std::size_t top) {
  if (requests.empty()) return 0.0;
  std::size_t ok = 0;
  for (const ControlRequest& r : requests) {
    const std::size_t upto = std::min(top, r.recomputed.size());
    if (std::find(r.recomputed.begin(), r.recomputed.begin() + static_cast<std::ptrdiff_t>(upto), r.requested) !=
        r.recomputed.begin() + static_cast<std::ptrdiff_t>(upto)) {
      ++ok;
    }
  }
  return static_cast<double>(ok) / static_cast<double>(requests.size());
}

IntrinsicReport intrinsic_report(const std::vector<std::pair<Sentence, std::vector<Sentence>>>& groups,
                                 TreeLabel label) {
  IntrinsicReport rep;
  double bleu_sum = 0.0, lev_sum = 0.0, ted_sum = 0.0;
  std::size_t bleu_n = 0, close_n = 0;
  for (const auto& [x, revs] : groups) {
    SentenceReport sr;
    sr.id = x.id();
    sr.candidates = revs.size();
    if (revs.size() >= 2) {
      std::vector<std::string> texts;
      for (const Sentence& r : revs) texts.push_back(r.text());
      sr.self_bleu = self_bleu(texts);
      bleu_sum += *sr.self_bleu;
      ++bleu_n;
    }
    if (!revs.empty()) {
      for (const Sentence& r : revs) {
        sr.mean_levenshtein += levenshtein_norm(x, r);
        sr.mean_tree_distance += tree_edit_distance(x, r, label);
      }
      sr.mean_levenshtein /= static_cast<double>(revs.size());
      sr.mean_tree_distance /= static_cast<double>(revs.size());
      lev_sum += sr.mean_levenshtein;
      ted_sum += sr.mean_tree_distance;
      ++close_n;
    }
    rep.per_sentence.push_back(std::move(sr));
  }
  if (bleu_n) rep.self_bleu = bleu_sum / static_cast<double>(bleu_n);
  if (close_n) {
    rep.mean_levenshtein = lev_sum / static_cast<double>(close_n);
    rep.mean_tree_distance = ted_sum / static_cast<double>(close_n);
  }
  return rep;
}

std::string format_report_table(const IntrinsicReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %10s %12s %10s\n", "sentence", "Self-BLEU", "Levenshtein", "Syntactic");
  out << line;
  for (const SentenceReport& s : r.per_sentence) {
    std::string bleu = s.self_bleu ? std::to_string(*s.self_bleu).substr(0, 6) : "-";
    std::snprintf(line, sizeof line, "%-24s %10s %12.4f %10.4f\n", s.id.c_str(), bleu.c_str(), s.mean_levenshtein,
                  s.mean_tree_distance);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-24s %10.4f %12.4f %10.4f\n", "overall", r.self_bleu, r.mean_levenshtein,
                r.mean_tree_distance);
  out << line;
  return out.str();
}

}  // namespace cfkit
