#include "cfkit/selection.hpp"

#include <algorithm>
#include <limits>

#include "cfkit/error.hpp"

namespace cfkit {

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

SelectionSignature signature_of(const Perturbation& p, ControlCode code) {
  SelectionSignature sig;
  sig.code = code;
  const EditViews v = edit_views(p);
  sig.removed = v.removed;
  sig.added = v.added;
  std::uint64_t h = 14695981039346656037ULL;
  for (const Token& t : p.revised.tokens()) {
    const long long offset = t.is_root() ? 0 : static_cast<long long>(t.head) - static_cast<long long>(t.index);
    h = fnv1a(h, t.deprel);
    h = fnv1a(h, "|" + std::to_string(offset) + ";");
  }
  sig.tree_shape = h;
  return sig;
}

SelectionSignature signature_of(const Sentence& x, const Candidate& c) {
  return signature_of(candidate_perturbation(x, c), c.code);
}

double signature_similarity(const SelectionSignature& a, const SelectionSignature& b, const DiversityWeights& w) {
  double s = 0.0;
  if (a.code == b.code) s += w.code;
  if (a.removed == b.removed) s += w.removed;
  if (a.added == b.added) s += w.added;
  return s;
}

std::vector<std::size_t> diversity_select(const std::vector<SelectionSignature>& pool, std::size_t k,
                                          const DiversityWeights& w) {
  if (k == 0) throw ValidationError("k must be positive");
  const std::size_t n = pool.size();
  std::vector<std::size_t> out;
  if (k >= n) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }

  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sim[i][j] = signature_similarity(pool[i], pool[j], w);
  }

  std::size_t first = 0;
  double first_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) m = std::max(m, sim[i][j]);
    }
    if (m < first_score) {
      first_score = m;
      first = i;
    }
  }
  std::vector<bool> chosen(n, false);
  std::vector<double> closest(n, 0.0);  // max similarity to the selected set
  auto take = [&](std::size_t i) {
    chosen[i] = true;
    out.push_back(i);
    for (std::size_t j = 0; j < n; ++j) closest[j] = std::max(closest[j], sim[j][i]);
  };
  take(first);
  while (out.size() < k) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      if (best == n || closest[i] < closest[best]) best = i;
    }
    take(best);
  }
  return out;
}

SurpriseResult surprise_select(const AttributionMap& attribution, const PredictionRecord& original,
                               const std::vector<SurpriseCandidate>& cands) {
  if (cands.empty()) throw ValidationError("surprise selection needs at least one candidate");
  const std::size_t n = attribution.weights.size();
  const int cls = original.label;
  const double fp_x = original.prob(cls);

  std::vector<double> change(cands.size());
  for (std::size_t c = 0; c < cands.size(); ++c) {
    for (std::size_t t : cands[c].edited) {
      if (t >= n) throw ValidationError("candidate edits a token outside the attribution map");
    }
    change[c] = std::abs(fp_x - cands[c].prediction.prob(cls));
  }

  SurpriseResult r;
  r.table.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    SurpriseRow& row = r.table[t];
    row.attribution = attribution.weights[t];
    double sum = row.attribution;
    for (std::size_t c = 0; c < cands.size(); ++c) {
      if (!cands[c].edited.count(t)) continue;
      ++row.group_size;
      sum += change[c] / static_cast<double>(cands[c].edited.size());
    }
    row.actual = sum / static_cast<double>(row.group_size + 1);
    row.gap = row.actual - row.attribution;
  }
  for (std::size_t t = 1; t < n; ++t) {
    if (r.table[t].gap > r.table[r.t_low].gap) r.t_low = t;
    if (-r.table[t].gap > -r.table[r.t_high].gap) r.t_high = t;
  }

  auto objective = [&](std::size_t c) {
    double removed_weight = 0.0;
    for (std::size_t u : cands[c].removed) {
      if (u < n) removed_weight += attribution.weights[u];
    }
    return change[c] - removed_weight;
  };
  for (std::size_t c = 0; c < cands.size(); ++c) {
    if (n > 0 && cands[c].edited.count(r.t_low)) {
      if (!r.pick_low || objective(c) > objective(*r.pick_low)) r.pick_low = c;
    }
    if (n > 0 && cands[c].edited.count(r.t_high)) {
      if (!r.pick_high || objective(c) < objective(*r.pick_high)) r.pick_high = c;
    }
  }
  return r;
}

SurpriseResult surprise_select(const Sentence& x, const AttributionMap& attribution, const PredictionRecord& original,
                               const std::vector<Candidate>& cands) {
  if (attribution.weights.size() != x.size()) throw ValidationError("attribution map does not cover every token");
  std::vector<SurpriseCandidate> in;
  for (const Candidate& c : cands) {
    if (!c.prediction) throw ValidationError("candidate " + c.id + " has no prediction");
    const Perturbation p = candidate_perturbation(x, c);
    in.push_back({edit_views(p).edited, removed_indices(p), *c.prediction});
  }
  return surprise_select(attribution, original, in);
}

ContrastPartition contrast_filter(const std::vector<LabeledCandidate>& items) {
  ContrastPartition out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].label || !items[i].original_label) {
      throw ValidationError("item " + (items[i].id.empty() ? std::to_string(i) : items[i].id) + " is missing a label");
    }
    (*items[i].label != *items[i].original_label ? out.kept : out.dropped).push_back(i);
  }
  return out;
}

}  // namespace cfkit
