#pragma once

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "cfkit/control_code.hpp"
#include "cfkit/diff.hpp"

namespace cfkit {

/// Scores how much an edit changes meaning, given the removed and added span
/// text. Implementations must tolerate concurrent calls.
class SemanticShiftScorer {
 public:
  virtual ~SemanticShiftScorer() = default;
  virtual double shift(const std::string& removed, const std::string& added) const = 0;
};

/// 1 - cosine similarity of the two span embeddings.
class EmbeddingShiftScorer : public SemanticShiftScorer {
 public:
  using EmbedFn = std::function<std::vector<std::vector<double>>(const std::vector<std::string>&)>;
  explicit EmbeddingShiftScorer(EmbedFn embed) : embed_(std::move(embed)) {}
  double shift(const std::string& removed, const std::string& added) const override;

 private:
  EmbedFn embed_;
};

struct ClassifierConfig {
  std::set<std::string> negation_lexicon{"not",     "n't",     "no",      "never", "none",
                                         "nothing", "nobody",  "nowhere", "neither", "nor",
                                         "without", "supposedly"};
  std::set<std::string> quantifier_lexicon{"all",  "some",     "many",    "few",  "most",
                                           "more", "less",     "at least", "at most", "exactly",
                                           "only", "every",    "each",    "no"};
  double shuffle_overlap_min = 0.5;
  double global_edit_max = 0.6;
  /// Upper bound on the tokens of a "short phrase" for insert/delete/resemantic.
  std::size_t max_phrase_tokens = 4;
  /// Null selects the length-based fallback ranking in primary_code.
  std::shared_ptr<const SemanticShiftScorer> semantic_shift;

  void validate() const;
};

/// Rule cascade over all edit spans of the pair.
ControlCode classify(const Perturbation& p, const ClassifierConfig& cfg);

/// The cascade restricted to one edit span (tree checks still use the pair).
ControlCode classify_span(const Perturbation& p, std::size_t span, const ClassifierConfig& cfg);

/// Classifies each span and returns the code of the span with the largest
/// semantic shift. Swaps across spans are detected on the whole pair first.
ControlCode primary_code(const Perturbation& p, const ClassifierConfig& cfg);

/// True when every token outside the edit spans keeps its relation and its
/// (aligned) governor. False when either side is unparsed.
bool remaining_tree_intact(const Perturbation& p);

/// One word per line; blank lines and `#` comments are ignored.
std::set<std::string> load_word_list(const std::string& path);

}  // namespace cfkit
