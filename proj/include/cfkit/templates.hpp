#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cfkit/backends.hpp"
#include "cfkit/diff.hpp"

namespace cfkit {

enum class Granularity { text = 0, lemma = 1, xpos = 2, upos = 3 };

std::string_view to_string(Granularity g);

struct TemplateConfig {
  /// g(t) per granularity with sibling context; doubled without context.
  std::array<double, 4> sparsity{1.0, 2.0, 4.0, 8.0};
  double no_context_factor = 2.0;
};

struct TemplateRule {
  std::vector<std::string> before;
  std::vector<std::string> after;
  Granularity level = Granularity::text;
  /// Number of context tokens kept on each side of the edited span (0 or 1).
  int context_left = 0;
  int context_right = 0;
  std::set<std::string> covered;    // candidate ids
  std::set<std::string> originals;  // original sentence ids
  double sparsity_weight = 1.0;     // g(t)
  double weight = 1.0;              // g(t) / |t|_x

  bool has_context() const { return context_left + context_right > 0; }
  std::size_t unique_originals() const { return originals.size(); }
  /// "before -> after", with "+x" / "-x" shorthands for pure inserts/deletes.
  std::string pattern() const;
  std::string granularity_name() const;
};

struct TemplateSource {
  std::string candidate_id;
  std::string original_id;
  Perturbation perturbation;
};

/// One template per (edit span, granularity, context choice); identical
/// templates are merged. Throws ValidationError on unparsed sentences.
std::vector<TemplateRule> extract_templates(const std::vector<TemplateSource>& sources, const TemplateConfig& cfg = {});

/// True when the rule describes one of the perturbation's edit spans.
bool template_matches(const TemplateRule& rule, const Perturbation& p);

struct TemplateSelection {
  std::vector<TemplateRule> selected;
  std::vector<std::string> uncovered;  // universe elements no template covers
  std::size_t covered = 0;
  double total_weight = 0.0;
};

/// Greedy weighted set cover: picks the template with the smallest
/// weight / newly-covered ratio until `budget` of the universe is covered.
/// Ties prefer lower g(t), then the lexicographically smaller pattern.
TemplateSelection select_templates(const std::vector<TemplateRule>& templates, const std::set<std::string>& universe,
                                   double budget = 0.9);

struct FlipReport {
  TemplateRule rule;
  int from_label = 0;
  std::map<int, std::size_t> to_labels;
  std::size_t flipped = 0;
  std::size_t with_predictions = 0;
  std::size_t missing = 0;
  double flip_rate = 0.0;
};

using PredictionPairs = std::map<std::string, std::pair<PredictionRecord, PredictionRecord>>;

/// Fraction of each template's covered candidates whose label changed.
/// Candidates without predictions are left out and counted in `missing`.
std::vector<FlipReport> flip_rates(const std::vector<TemplateRule>& selected, const PredictionPairs& predictions);

/// Tab-separated table, one header row then one row per report.
std::string templates_tsv(const std::vector<FlipReport>& reports);

}  // namespace cfkit
