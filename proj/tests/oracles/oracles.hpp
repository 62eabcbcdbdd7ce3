// Reference implementations used only by tests. Written for clarity, not
// speed, and without reusing library internals.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// Wagner-Fischer over whole tokens, compared case-insensitively (ASCII).
inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (lower(a[i - 1]) == lower(b[j - 1]) ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[a.size()][b.size()];
}

// BLEU-4 with uniform weights, add-one smoothing for orders 2-4, and the
// closest reference length (shorter wins ties) for the brevity penalty.
inline double bleu(const std::vector<std::string>& hyp, const std::vector<std::vector<std::string>>& refs) {
  if (hyp.empty()) return 0.0;
  auto grams = [](const std::vector<std::string>& toks, std::size_t n) {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      std::string key;
      for (std::size_t k = 0; k < n; ++k) key += toks[i + k] + '\x1f';
      ++out[key];
    }
    return out;
  };
  double logp = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto h = grams(hyp, n);
    int total = 0, clipped = 0;
    for (auto& [g, c] : h) {
      total += c;
      int best = 0;
      for (const auto& r : refs) {
        auto rg = grams(r, n);
        if (rg.count(g)) best = std::max(best, rg[g]);
      }
      clipped += std::min(c, best);
    }
    double p = n == 1 ? (total ? double(clipped) / total : 0.0) : (clipped + 1.0) / (total + 1.0);
    if (p == 0.0) return 0.0;
    logp += std::log(p) / 4.0;
  }
  const double c = double(hyp.size());
  double r = -1;
  for (const auto& ref : refs) {
    const double len = double(ref.size());
    if (r < 0 || std::fabs(len - c) < std::fabs(r - c) || (std::fabs(len - c) == std::fabs(r - c) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(logp);
}

// Ordered labeled forest given by parent links (-1 for roots); siblings are
// ordered by index and node indices must be a preorder numbering.
struct Tree {
  std::vector<std::string> label;
  std::vector<int> parent;
};

inline bool ancestor(const Tree& t, int a, int b) {  // a is a proper ancestor of b
  for (int p = t.parent[b]; p >= 0; p = t.parent[p]) {
    if (p == a) return true;
  }
  return false;
}

// Minimum cost over all Tai mappings: unmapped nodes cost 1 (insert or
// delete), mapped pairs with different labels cost 1 (relabel). A mapping is
// valid when it is one-to-one and preserves ancestry and left-to-right order.
// With preorder numbering, "a left of b" is a < b and a not ancestor of b.
inline int tree_edit_distance(const Tree& a, const Tree& b) {
  const int n = int(a.label.size()), m = int(b.label.size());
  int best = n + m;
  std::vector<std::pair<int, int>> map;
  std::vector<bool> used(m, false);
  std::function<void(int, int)> rec = [&](int i, int cost) {
    if (i == n) {
      const int k = int(map.size());
      best = std::min(best, cost + (n - k) + (m - k));
      return;
    }
    rec(i + 1, cost);  // i unmapped
    for (int j = 0; j < m; ++j) {
      if (used[j]) continue;
      bool ok = true;
      for (auto [i2, j2] : map) {
        if (ancestor(a, i2, i) != ancestor(b, j2, j) || ancestor(a, i, i2) != ancestor(b, j, j2)) {
          ok = false;
          break;
        }
        const bool left_a = i2 < i && !ancestor(a, i2, i);
        const bool left_b = j2 < j && !ancestor(b, j2, j);
        if (left_a != left_b) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      used[j] = true;
      map.push_back({i, j});
      rec(i + 1, cost + (a.label[i] == b.label[j] ? 0 : 1));
      map.pop_back();
      used[j] = false;
    }
  };
  rec(0, 0);
  return best;
}

// Every ordered tree with exactly n nodes, as preorder parent arrays: node i
// attaches to a node on the rightmost path of the tree built so far.
inline std::vector<std::vector<int>> ordered_shapes(int n) {
  std::vector<std::vector<int>> out;
  if (n == 0) {
    out.push_back({});
    return out;
  }
  std::vector<int> parent{-1};
  std::function<void()> rec = [&] {
    if (int(parent.size()) == n) {
      out.push_back(parent);
      return;
    }
    // Rightmost path: from the last node up to the root.
    for (int v = int(parent.size()) - 1; v >= 0; v = parent[v]) {
      parent.push_back(v);
      rec();
      parent.pop_back();
    }
  };
  rec();
  return out;
}

struct SurpriseCase {
  std::vector<double> s;                    // attribution per token
  double fx = 0.0;                          // f_p(x)
  std::vector<std::set<std::size_t>> edited;
  std::vector<std::set<std::size_t>> removed;
  std::vector<double> fxhat;                // f_p of each candidate
};

struct SurpriseAnswer {
  std::vector<double> D, gap;
  std::size_t tL = 0, tU = 0;
  long pickL = -1, pickU = -1;
};

inline SurpriseAnswer surprise(const SurpriseCase& c) {
  SurpriseAnswer a;
  const std::size_t n = c.s.size();
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<std::size_t> G;
    for (std::size_t k = 0; k < c.edited.size(); ++k) {
      if (c.edited[k].count(t)) G.push_back(k);
    }
    double acc = c.s[t];
    for (std::size_t k : G) {
      const double w = 1.0 / double(c.edited[k].size());
      acc += w * std::fabs(c.fx - c.fxhat[k]);
    }
    const double D = acc / double(G.size() + 1);
    a.D.push_back(D);
    a.gap.push_back(D - c.s[t]);
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (a.gap[t] > a.gap[a.tL]) a.tL = t;
    if (-a.gap[t] > -a.gap[a.tU]) a.tU = t;
  }
  auto obj = [&](std::size_t k) {
    double r = 0.0;
    for (std::size_t u : c.removed[k]) r += c.s[u];
    return std::fabs(c.fx - c.fxhat[k]) - r;
  };
  for (std::size_t k = 0; k < c.edited.size(); ++k) {
    if (c.edited[k].count(a.tL) && (a.pickL < 0 || obj(k) > obj(std::size_t(a.pickL)))) a.pickL = long(k);
    if (c.edited[k].count(a.tU) && (a.pickU < 0 || obj(k) < obj(std::size_t(a.pickU)))) a.pickU = long(k);
  }
  return a;
}

// Cheapest collection of sets covering the whole universe {0..u-1}; returns
// +inf when impossible.
inline double optimal_cover(const std::vector<std::set<int>>& sets, const std::vector<double>& weight, int u) {
  const int m = int(sets.size());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::set<int> got;
    double w = 0.0;
    for (int i = 0; i < m; ++i) {
      if (mask & (1u << i)) {
        got.insert(sets[i].begin(), sets[i].end());
        w += weight[i];
      }
    }
    if (int(got.size()) == u) best = std::min(best, w);
  }
  return best;
}

struct Sig {
  int code;
  std::multiset<std::string> removed, added;
};

// Least-similar greedy selection, written directly from its definition.
inline std::vector<std::size_t> diversity(const std::vector<Sig>& pool, std::size_t k, double a, double b, double g) {
  const std::size_t n = pool.size();
  std::vector<std::size_t> out;
  if (k >= n) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  auto sim = [&](std::size_t i, std::size_t j) {
    return a * (pool[i].code == pool[j].code) + b * (pool[i].removed == pool[j].removed) +
           g * (pool[i].added == pool[j].added);
  };
  auto max_sim = [&](std::size_t i, const std::vector<std::size_t>& against) {
    double best = 0.0;
    for (std::size_t j : against) {
      if (j != i) best = std::max(best, sim(i, j));
    }
    return best;
  };
  std::vector<std::size_t> everyone;
  for (std::size_t i = 0; i < n; ++i) everyone.push_back(i);
  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (max_sim(i, everyone) < max_sim(first, everyone)) first = i;
  }
  out.push_back(first);
  while (out.size() < k) {
    long pick = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(out.begin(), out.end(), i) != out.end()) continue;
      if (pick < 0 || max_sim(i, out) < max_sim(std::size_t(pick), out)) pick = long(i);
    }
    out.push_back(std::size_t(pick));
  }
  return out;
}

}  // namespace oracle
