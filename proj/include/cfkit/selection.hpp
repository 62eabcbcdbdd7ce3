#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cfkit/backends.hpp"
#include "cfkit/pipeline.hpp"

namespace cfkit {

struct SelectionSignature {
  ControlCode code = ControlCode::global;
  std::multiset<std::string> removed;
  std::multiset<std::string> added;
  /// FNV-1a over the revision's (relation, head offset) sequence.
  std::uint64_t tree_shape = 0;
};

SelectionSignature signature_of(const Perturbation& p, ControlCode code);
SelectionSignature signature_of(const Sentence& x, const Candidate& c);

struct DiversityWeights {
  double code = 0.2;
  double removed = 0.4;
  double added = 0.4;
};

double signature_similarity(const SelectionSignature& a, const SelectionSignature& b, const DiversityWeights& w);

/// Greedy least-similar selection. Starts from the element with the lowest
/// maximum similarity to the rest of the pool, then repeatedly adds the
/// element whose maximum similarity to the selected set is smallest. Ties go
/// to the lower index. When k >= pool size the whole pool is returned in
/// order. Returns indices into `pool`.
std::vector<std::size_t> diversity_select(const std::vector<SelectionSignature>& pool, std::size_t k,
                                          const DiversityWeights& w = {});

/// What surprise selection needs to know about one counterfactual.
struct SurpriseCandidate {
  std::set<std::size_t> edited;   // e(x^): edited original tokens
  std::set<std::size_t> removed;  // r(x^): original tokens that were removed or replaced
  PredictionRecord prediction;
};

struct SurpriseRow {
  double attribution = 0.0;  // s(t), the expected change
  double actual = 0.0;       // D(t, x)
  double gap = 0.0;          // D(t, x) - s(t)
  std::size_t group_size = 0;
};

struct SurpriseResult {
  std::size_t t_low = 0;   // largest gap: small weight, big observed change
  std::size_t t_high = 0;  // smallest gap: big weight, little observed change
  std::optional<std::size_t> pick_low;   // candidate index in G(t_low)
  std::optional<std::size_t> pick_high;  // candidate index in G(t_high)
  std::vector<SurpriseRow> table;
};

/// Compares the attribution-implied change of each token with the observed
/// prediction change of the counterfactuals that edit it. Probabilities are
/// those of the class predicted for x.
SurpriseResult surprise_select(const AttributionMap& attribution, const PredictionRecord& original,
                               const std::vector<SurpriseCandidate>& cands);

/// Builds SurpriseCandidates from generated candidates (which must carry
/// predictions) and runs the selection.
SurpriseResult surprise_select(const Sentence& x, const AttributionMap& attribution, const PredictionRecord& original,
                               const std::vector<Candidate>& cands);

struct LabeledCandidate {
  std::string id;
  std::optional<std::string> label;
  std::optional<std::string> original_label;
};

struct ContrastPartition {
  std::vector<std::size_t> kept;     // label differs from the original's
  std::vector<std::size_t> dropped;  // same label
};

/// Keeps exactly the items whose label differs from the original label.
/// Throws ValidationError when either label is missing.
ContrastPartition contrast_filter(const std::vector<LabeledCandidate>& items);

}  // namespace cfkit
