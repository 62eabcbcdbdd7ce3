#include "cfkit/templates.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <optional>
#include <thread>
#include <tuple>

#include "cfkit/error.hpp"
#include "cfkit/text.hpp"

namespace cfkit {

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::text: return "text";
    case Granularity::lemma: return "lemma";
    case Granularity::xpos: return "xpos";
    case Granularity::upos: return "upos";
  }
  return "text";
}

std::string TemplateRule::pattern() const {
  const std::string b = text::join(before, " ");
  const std::string a = text::join(after, " ");
  if (!has_context()) {
    if (before.empty()) return "+" + a;
    if (after.empty()) return "-" + b;
  }
  return b + " -> " + a;
}

std::string TemplateRule::granularity_name() const {
  std::string out(to_string(level));
  if (has_context()) out += "+ctx";
  return out;
}

namespace {

std::string render(const Token& t, Granularity g) {
  switch (g) {
    case Granularity::text: return text::casefold(t.surface);
    case Granularity::lemma: return t.lemma.empty() || t.lemma == "_" ? text::casefold(t.surface) : text::casefold(t.lemma);
    case Granularity::xpos: return t.xpos;
    case Granularity::upos: return t.upos;
  }
  return t.surface;
}

std::vector<std::string> render_window(const Sentence& s, std::size_t begin, std::size_t end, Granularity g) {
  std::vector<std::string> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(render(s.tokens()[i], g));
  return out;
}

// Parent of the span's top token in `s`, or -1 for a root span.
int span_parent(const Sentence& s, const TokenRange& r) {
  for (std::size_t i = r.begin; i < r.end; ++i) {
    const int h = s.tokens()[i].head;
    if (h < 0 || !r.contains(static_cast<std::size_t>(h))) return h;
  }
  return -1;
}

bool related(const Sentence& s, std::size_t n, int parent) {
  if (parent < 0) return false;
  return static_cast<int>(n) == parent || s.tokens()[n].head == parent;
}

using Key = std::tuple<int, int, int, std::vector<std::string>, std::vector<std::string>>;

struct Emitted {
  Key key;
  std::size_t source;
};

std::vector<Emitted> emit(const TemplateSource& src, std::size_t idx) {
  const Perturbation& p = src.perturbation;
  std::vector<Emitted> out;
  for (const EditSpan& e : p.edits) {
    // Context follows the side that has material.
    const bool use_x = !e.x.empty();
    const Sentence& tree = use_x ? p.original : p.revised;
    const TokenRange r = use_x ? e.x : e.xhat;
    const int parent = span_parent(tree, r);
    int left = 0, right = 0;
    if (e.x.begin > 0 && e.xhat.begin > 0 && related(tree, r.begin - 1, parent)) left = 1;
    if (e.x.end < p.original.size() && e.xhat.end < p.revised.size() && r.end < tree.size() &&
        related(tree, r.end, parent)) {
      right = 1;
    }
    for (int g = 0; g < 4; ++g) {
      const auto level = static_cast<Granularity>(g);
      out.push_back({Key{g, 0, 0, render_window(p.original, e.x.begin, e.x.end, level),
                         render_window(p.revised, e.xhat.begin, e.xhat.end, level)},
                     idx});
      if (left + right > 0) {
        out.push_back({Key{g, left, right,
                           render_window(p.original, e.x.begin - left, e.x.end + right, level),
                           render_window(p.revised, e.xhat.begin - left, e.xhat.end + right, level)},
                       idx});
      }
    }
  }
  return out;
}

}  // namespace

std::vector<TemplateRule> extract_templates(const std::vector<TemplateSource>& sources, const TemplateConfig& cfg) {
  for (const TemplateSource& s : sources) {
    if (!s.perturbation.original.parsed() || !s.perturbation.revised.parsed()) {
      throw ValidationError("template extraction needs parsed sentences: " + s.candidate_id);
    }
  }
  std::vector<std::vector<Emitted>> per(sources.size());
  const std::size_t workers = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()),
                                                    std::max<std::size_t>(1, sources.size() / 32));
  if (workers <= 1) {
    for (std::size_t i = 0; i < sources.size(); ++i) per[i] = emit(sources[i], i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < sources.size(); i += workers) per[i] = emit(sources[i], i);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::map<Key, TemplateRule> merged;
  for (const auto& list : per) {
    for (const Emitted& em : list) {
      auto [it, fresh] = merged.try_emplace(em.key);
      TemplateRule& r = it->second;
      if (fresh) {
        r.level = static_cast<Granularity>(std::get<0>(em.key));
        r.context_left = std::get<1>(em.key);
        r.context_right = std::get<2>(em.key);
        r.before = std::get<3>(em.key);
        r.after = std::get<4>(em.key);
        r.sparsity_weight = cfg.sparsity[static_cast<std::size_t>(r.level)] * (r.has_context() ? 1.0 : cfg.no_context_factor);
      }
      r.covered.insert(sources[em.source].candidate_id);
      r.originals.insert(sources[em.source].original_id);
    }
  }
  std::vector<TemplateRule> out;
  for (auto& [k, r] : merged) {
    r.weight = r.sparsity_weight / static_cast<double>(r.originals.size());
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const TemplateRule& a, const TemplateRule& b) {
    return std::tuple(a.sparsity_weight, a.pattern()) < std::tuple(b.sparsity_weight, b.pattern());
  });
  return out;
}

bool template_matches(const TemplateRule& rule, const Perturbation& p) {
  for (const EditSpan& e : p.edits) {
    const auto l = static_cast<std::size_t>(rule.context_left);
    const auto r = static_cast<std::size_t>(rule.context_right);
    if (e.x.begin < l || e.xhat.begin < l) continue;
    if (e.x.end + r > p.original.size() || e.xhat.end + r > p.revised.size()) continue;
    if (render_window(p.original, e.x.begin - l, e.x.end + r, rule.level) == rule.before &&
        render_window(p.revised, e.xhat.begin - l, e.xhat.end + r, rule.level) == rule.after) {
      return true;
    }
  }
  return false;
}

TemplateSelection select_templates(const std::vector<TemplateRule>& templates, const std::set<std::string>& universe,
                                   double budget) {
  if (!(budget > 0.0 && budget <= 1.0)) throw ValidationError("coverage budget must be in (0, 1]");
  TemplateSelection sel;
  std::set<std::string> coverable;
  for (const TemplateRule& t : templates) {
    if (!(t.weight > 0.0)) throw ValidationError("template weight must be positive: " + t.pattern());
    for (const auto& c : t.covered) {
      if (universe.count(c)) coverable.insert(c);
    }
  }
  for (const auto& u : universe) {
    if (!coverable.count(u)) sel.uncovered.push_back(u);
  }
  // Smallest count reaching the budget, guarding against rounding up on exact products.
  const double raw = budget * static_cast<double>(universe.size());
  std::size_t target = static_cast<std::size_t>(raw);
  if (static_cast<double>(target) < raw - 1e-9) ++target;
  target = std::min(target, coverable.size());

  std::set<std::string> done;
  std::vector<bool> used(templates.size(), false);
  while (done.size() < target) {
    std::optional<std::size_t> best;
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < templates.size(); ++i) {
      if (used[i]) continue;
      std::size_t gain = 0;
      for (const auto& c : templates[i].covered) {
        if (coverable.count(c) && !done.count(c)) ++gain;
      }
      if (gain == 0) continue;
      if (!best) {
        best = i;
        best_gain = gain;
        continue;
      }
      const TemplateRule& a = templates[i];
      const TemplateRule& b = templates[*best];
      // a.w / gain vs b.w / best_gain without dividing.
      const double lhs = a.weight * static_cast<double>(best_gain);
      const double rhs = b.weight * static_cast<double>(gain);
      bool better = lhs < rhs;
      if (lhs == rhs) {
        better = std::tuple(a.sparsity_weight, a.pattern(), a.granularity_name(), a.covered) <
                 std::tuple(b.sparsity_weight, b.pattern(), b.granularity_name(), b.covered);
      }
      if (better) {
        best = i;
        best_gain = gain;
      }
    }
    if (!best) break;
    used[*best] = true;
    for (const auto& c : templates[*best].covered) {
      if (coverable.count(c)) done.insert(c);
    }
    sel.selected.push_back(templates[*best]);
    sel.total_weight += templates[*best].weight;
  }
  sel.covered = done.size();
  return sel;
}

std::vector<FlipReport> flip_rates(const std::vector<TemplateRule>& selected, const PredictionPairs& predictions) {
  std::vector<FlipReport> out;
  for (const TemplateRule& t : selected) {
    FlipReport rep;
    rep.rule = t;
    std::map<int, std::size_t> from;
    for (const auto& c : t.covered) {
      auto it = predictions.find(c);
      if (it == predictions.end()) {
        ++rep.missing;
        continue;
      }
      const auto& [orig, rev] = it->second;
      ++rep.with_predictions;
      ++from[orig.label];
      ++rep.to_labels[rev.label];
      if (rev.label != orig.label) ++rep.flipped;
    }
    std::size_t most = 0;
    for (const auto& [label, n] : from) {
      if (n > most) {
        most = n;
        rep.from_label = label;
      }
    }
    if (rep.with_predictions) rep.flip_rate = static_cast<double>(rep.flipped) / static_cast<double>(rep.with_predictions);
    out.push_back(std::move(rep));
  }
  return out;
}

std::string templates_tsv(const std::vector<FlipReport>& reports) {
  std::ostringstream out;
  out << "before\tafter\tgranularity\tcoverage\tunique_originals\tweight\tflip_rate\n";
  char num[64];
  for (const FlipReport& r : reports) {
    out << text::join(r.rule.before, " ") << '\t' << text::join(r.rule.after, " ") << '\t'
        << r.rule.granularity_name() << '\t' << r.rule.covered.size() << '\t' << r.rule.unique_originals() << '\t';
    std::snprintf(num, sizeof num, "%.6f", r.rule.weight);
    out << num << '\t';
    std::snprintf(num, sizeof num, "%.6f", r.flip_rate);
    out << num << '\n';
  }
  return out.str();
}

}  // namespace cfkit
