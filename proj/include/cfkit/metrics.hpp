#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfkit/control_code.hpp"
#include "cfkit/corpus.hpp"

namespace cfkit {

/// Ordered labeled tree. parent[i] is -1 for the root; children are ordered
/// by index.
struct OrderedTree {
  std::vector<std::string> labels;
  std::vector<int> parent;

  std::size_t size() const { return labels.size(); }
};

enum class TreeLabel { deprel, upos, deprel_upos };

OrderedTree to_ordered_tree(const Sentence& s, TreeLabel label = TreeLabel::deprel);

/// Unit-cost ordered tree edit distance (insert, delete, relabel), computed
/// with the Zhang-Shasha keyroot dynamic program. Works on forests too.
double tree_edit_distance(const OrderedTree& a, const OrderedTree& b);
double tree_edit_distance(const Sentence& a, const Sentence& b, TreeLabel label = TreeLabel::deprel);

/// BLEU-4 of `hypothesis` against `references`: uniform weights, add-one
/// smoothing for n >= 2, closest-reference brevity penalty.
double bleu4(const std::vector<std::string>& hypothesis, const std::vector<std::vector<std::string>>& references);

/// Mean BLEU-4 of each element against all the others. Requires >= 2 items.
double self_bleu(const std::vector<std::string>& texts);

struct ControlRequest {
  ControlCode requested = ControlCode::global;
  /// Recomputed codes of the generations, best first.
  std::vector<ControlCode> recomputed;
};

/// Fraction of requests where one of the first `top` recomputed codes equals
/// the requested code.
double control_success_rate(const std::vector<ControlRequest>& requests, std::size_t top = 3);

struct SentenceReport {
  std::string id;
  std::size_t candidates = 0;
  std::optional<double> self_bleu;
  double mean_levenshtein = 0.0;
  double mean_tree_distance = 0.0;
};

struct IntrinsicReport {
  double self_bleu = 0.0;
  double mean_levenshtein = 0.0;
  double mean_tree_distance = 0.0;
  std::vector<SentenceReport> per_sentence;
};

/// Closeness and diversity of a candidate set per original sentence.
/// Sentence-level values are averaged with equal weight per sentence;
/// self-BLEU only over sentences with at least two candidates.
IntrinsicReport intrinsic_report(const std::vector<std::pair<Sentence, std::vector<Sentence>>>& groups,
                                 TreeLabel label = TreeLabel::deprel);

/// Plain-text table with the Self-BLEU / Levenshtein / Syntactic columns.
std::string format_report_table(const IntrinsicReport& r);

}  // namespace cfkit
