#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cfkit/control_code.hpp"
#include "cfkit/corpus.hpp"

namespace cfkit {

enum class EditKind { insert, remove, replace };

std::string_view to_string(EditKind k);

struct EditSpan {
  TokenRange x;     // range in the original; empty for inserts
  TokenRange xhat;  // range in the revision; empty for deletes
  EditKind kind = EditKind::replace;

  friend bool operator==(const EditSpan&, const EditSpan&) = default;
};

struct Perturbation {
  Sentence original;
  Sentence revised;
  std::vector<EditSpan> edits;
  std::optional<ControlCode> code;
};

/// LCS alignment over case-folded tokens. Deterministic: equal tokens always
/// match, and deletions are preferred over insertions on ties. Edit regions
/// separated by a single matched token are merged into one replace span.
std::vector<EditSpan> align(const std::vector<std::string>& x, const std::vector<std::string>& xhat);
std::vector<EditSpan> align(const Sentence& x, const Sentence& xhat);

Perturbation make_perturbation(Sentence x, Sentence xhat);

/// Unit-cost word-level edit distance over case-folded tokens.
std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// levenshtein / max(|x|, |xhat|); 0 when both are empty.
double levenshtein_norm(const std::vector<std::string>& x, const std::vector<std::string>& xhat);
double levenshtein_norm(const Sentence& x, const Sentence& xhat);

struct EditViews {
  std::set<std::size_t> edited;  // original token indices
  std::multiset<std::string> removed;
  std::multiset<std::string> added;
};

/// Edited original tokens plus removed/added case-folded surfaces. A pure
/// insertion is attributed to the token left of the insertion point, or to
/// token 0 when it is at the start.
EditViews edit_views(const Perturbation& p);
EditViews edit_views(const Perturbation& p, const std::vector<std::size_t>& span_subset);

/// Original token indices covered by non-empty x ranges (no insert anchors).
std::set<std::size_t> removed_indices(const Perturbation& p);

/// Replays the edits over x, drawing inserted material from xhat. Equal to
/// the case-folded xhat whenever the spans are consistent.
std::vector<std::string> replay_edits(const std::vector<std::string>& x, const std::vector<EditSpan>& edits,
                                      const std::vector<std::string>& xhat);

}  // namespace cfkit
