#include "cfkit/diff.hpp"

#include <algorithm>
#include <stdexcept>

#include "cfkit/text.hpp"

namespace cfkit {

namespace {

constexpr std::array<std::string_view, 9> kCodeNames{
    "negation", "quantifier", "shuffle", "lexical", "insert", "delete", "resemantic", "restructure", "global"};

std::vector<std::string> folded(const std::vector<std::string>& v) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(text::casefold(s));
  return out;
}

EditKind kind_of(TokenRange x, TokenRange xhat) {
  if (x.empty()) return EditKind::insert;
  if (xhat.empty()) return EditKind::remove;
  return EditKind::replace;
}

}  // namespace

std::string_view to_string(ControlCode c) { return kCodeNames[static_cast<std::size_t>(c)]; }

std::optional<ControlCode> parse_control_code(std::string_view s) {
  for (std::size_t i = 0; i < kCodeNames.size(); ++i) {
    if (kCodeNames[i] == s) return static_cast<ControlCode>(i);
  }
  return std::nullopt;
}

int rule_rank(ControlCode c) {
  switch (c) {
    case ControlCode::negation: return 1;
    case ControlCode::quantifier: return 2;
    case ControlCode::shuffle: return 3;
    case ControlCode::lexical: return 4;
    case ControlCode::insert: return 5;
    case ControlCode::remove: return 6;
    case ControlCode::resemantic: return 7;
    case ControlCode::restructure: return 8;
    case ControlCode::global: return 9;
  }
  return 9;
}

std::string_view to_string(EditKind k) {
  switch (k) {
    case EditKind::insert: return "insert";
    case EditKind::remove: return "delete";
    case EditKind::replace: return "replace";
  }
  return "replace";
}

std::vector<EditSpan> align(const std::vector<std::string>& x_raw, const std::vector<std::string>& y_raw) {
  const auto x = folded(x_raw);
  const auto y = folded(y_raw);
  const std::size_t m = x.size(), n = y.size();

  // lcs[i][j] = LCS length of x[i:] and y[j:]
  std::vector<std::vector<std::size_t>> lcs(m + 1, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = m; i-- > 0;) {
    for (std::size_t j = n; j-- > 0;) {
      lcs[i][j] = x[i] == y[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }

  struct Region {
    TokenRange x, y;
  };
  std::vector<Region> regions;
  // Matched tokens between the previous region and the current position.
  std::vector<std::size_t> gap_before;
  std::size_t i = 0, j = 0, matched_run = 0;
  bool in_region = false;
  Region cur;
  auto close_region = [&] {
    if (!in_region) return;
    cur.x.end = i;
    cur.y.end = j;
    regions.push_back(cur);
    in_region = false;
  };
  auto open_region = [&] {
    if (in_region) return;
    cur = {{i, i}, {j, j}};
    gap_before.push_back(matched_run);
    matched_run = 0;
    in_region = true;
  };
  while (i < m || j < n) {
    if (i < m && j < n && x[i] == y[j]) {
      close_region();
      ++i;
      ++j;
      ++matched_run;
    } else if (i < m && (j == n || lcs[i + 1][j] >= lcs[i][j + 1])) {
      open_region();
      ++i;
    } else {
      open_region();
      ++j;
    }
  }
  close_region();

  std::vector<EditSpan> out;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const Region& reg = regions[r];
    if (!out.empty() && r > 0 && gap_before[r] < 2) {
      EditSpan& prev = out.back();
      prev.x.end = reg.x.end;
      prev.xhat.end = reg.y.end;
      prev.kind = EditKind::replace;
      continue;
    }
    out.push_back({reg.x, reg.y, kind_of(reg.x, reg.y)});
  }
  return out;
}

std::vector<EditSpan> align(const Sentence& x, const Sentence& xhat) { return align(x.surfaces(), xhat.surfaces()); }

Perturbation make_perturbation(Sentence x, Sentence xhat) {
  Perturbation p;
  p.edits = align(x, xhat);
  p.original = std::move(x);
  p.revised = std::move(xhat);
  return p;
}

std::size_t levenshtein(const std::vector<std::string>& a_raw, const std::vector<std::string>& b_raw) {
  const auto a = folded(a_raw);
  const auto b = folded(b_raw);
  std::vector<std::size_t> prev(b.size() + 1), row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({prev[j] + 1, row[j - 1] + 1, sub});
    }
    std::swap(prev, row);
  }
  return prev[b.size()];
}

double levenshtein_norm(const std::vector<std::string>& x, const std::vector<std::string>& xhat) {
  const std::size_t denom = std::max(x.size(), xhat.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(levenshtein(x, xhat)) / static_cast<double>(denom);
}

double levenshtein_norm(const Sentence& x, const Sentence& xhat) {
  return levenshtein_norm(x.surfaces(), xhat.surfaces());
}

EditViews edit_views(const Perturbation& p, const std::vector<std::size_t>& subset) {
  EditViews v;
  for (std::size_t k : subset) {
    const EditSpan& e = p.edits.at(k);
    if (e.x.empty()) {
      if (!p.original.empty()) v.edited.insert(e.x.begin > 0 ? std::min(e.x.begin - 1, p.original.size() - 1) : 0);
    }
    for (std::size_t i = e.x.begin; i < e.x.end; ++i) {
      v.edited.insert(i);
      v.removed.insert(text::casefold(p.original[i].surface));
    }
    for (std::size_t i = e.xhat.begin; i < e.xhat.end; ++i) v.added.insert(text::casefold(p.revised[i].surface));
  }
  return v;
}

EditViews edit_views(const Perturbation& p) {
  std::vector<std::size_t> all(p.edits.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  return edit_views(p, all);
}

std::set<std::size_t> removed_indices(const Perturbation& p) {
  std::set<std::size_t> out;
  for (const EditSpan& e : p.edits) {
    for (std::size_t i = e.x.begin; i < e.x.end; ++i) out.insert(i);
  }
  return out;
}

std::vector<std::string> replay_edits(const std::vector<std::string>& x, const std::vector<EditSpan>& edits,
                                      const std::vector<std::string>& xhat) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (const EditSpan& e : edits) {
    if (e.x.begin < pos || e.x.end > x.size() || e.xhat.end > xhat.size()) {
      throw std::out_of_range("edit spans overlap or exceed the sequence");
    }
    for (; pos < e.x.begin; ++pos) out.push_back(text::casefold(x[pos]));
    for (std::size_t j = e.xhat.begin; j < e.xhat.end; ++j) out.push_back(text::casefold(xhat[j]));
    pos = e.x.end;
  }
  for (; pos < x.size(); ++pos) out.push_back(text::casefold(x[pos]));
  return out;
}

}  // namespace cfkit
