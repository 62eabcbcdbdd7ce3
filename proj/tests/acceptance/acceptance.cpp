// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Set CFKIT_UPDATE_GOLDEN=1 to rewrite the golden end-to-end files.
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "oracles.hpp"

#include "cfkit/ctrlcode.hpp"
#include "cfkit/error.hpp"
#include "cfkit/jsonio.hpp"
#include "cfkit/metrics.hpp"
#include "cfkit/mock_backend.hpp"
#include "cfkit/pipeline.hpp"
#include "cfkit/prompting.hpp"
#include "cfkit/selection.hpp"
#include "cfkit/templates.hpp"
#include "cfkit/text.hpp"

namespace fs = std::filesystem;
using namespace cfkit;

namespace {

struct Paths {
  std::string cli, fixtures, golden;
  fs::path work;
};

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Records the first failure; later checks still run so the detail is useful.
struct Check {
  Outcome out;
  void expect(bool cond, const std::string& what) {
    if (!cond && out.ok) {
      out.ok = false;
      out.detail = what;
    }
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

int sh(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// ---------------------------------------------------------------- 1

Outcome control_codes(const Paths& p) {
  Check c;
  const ClassifierConfig cfg;
  const Dataset t1 = parse_conllu_file(p.fixtures + "/codes.conllu");
  int right = 0;
  for (const char* code : {"negation", "quantifier", "shuffle", "lexical", "resemantic", "insert", "delete", "restructure"}) {
    const Perturbation pert = make_perturbation(*t1.find("ex-x"), *t1.find(std::string("ex-") + code));
    if (to_string(primary_code(pert, cfg)) == code && to_string(classify(pert, cfg)) == code) ++right;
  }
  c.expect(right == 8, std::to_string(right) + "/8 example pairs");
  const Dataset f2 = parse_conllu_file(p.fixtures + "/kids.conllu");
  const Perturbation fig = make_perturbation(*f2.find("kids-x"), *f2.find("kids-xhat"));
  c.expect(primary_code(fig, cfg) == ControlCode::negation, "multi-edit example is " + std::string(to_string(primary_code(fig, cfg))));
  if (c.out.ok) c.out.detail = "8/8 rows, multi-edit -> negation";
  return c.out;
}

// ---------------------------------------------------------------- 2

Outcome wire_format(const Paths& p) {
  Check c;
  const Dataset ds = parse_conllu_file(p.fixtures + "/corpus.conllu");
  const ClassifierConfig cfg;
  std::size_t pairs = 0, prompts = 0, specs_seen = 0;
  for (const auto& [oid, revs] : ds.pair_index) {
    for (const auto& rid : revs) {
      const Perturbation pert = make_perturbation(*ds.find(oid), *ds.find(rid));
      ++pairs;
      const auto specs = enumerate_blanks(pert.original, &pert.edits, BlankMode::training, 0);
      specs_seen += specs.size();
      c.expect(!specs.empty() && specs.size() <= 4, rid + ": " + std::to_string(specs.size()) + " blank granularities");
      const bool has_whole = std::any_of(specs.begin(), specs.end(), [&](const BlankSpec& s) {
        return s.ranges.size() == 1 && s.ranges[0].begin == 0 && s.ranges[0].end == pert.original.size();
      });
      c.expect(has_whole, rid + ": no whole-sentence blank");
      for (const BlankSpec& spec : specs) {
        for (std::optional<ControlCode> code : {std::optional<ControlCode>(primary_code(pert, cfg)), std::optional<ControlCode>()}) {
          const Prompt pr = make_training_prompt(pert, spec, code);
          const std::string wire = render_prompt(pr);
          c.expect(parse_prompt(wire) == pr, rid + ": prompt does not round-trip: " + wire);
          std::string out;
          for (const auto& a : *pr.answers) out += a + " [ANSWER] ";
          const std::string rebuilt = parse_generation(*pr.blanked_template, out);
          c.expect(rebuilt == pert.revised.text(), rid + ": rebuilt '" + rebuilt + "' != '" + pert.revised.text() + "'");
          ++prompts;
        }
      }
    }
  }
  c.expect(ds.sentences.size() >= 100, "fixture corpus too small");
  if (c.out.ok) {
    c.out.detail = std::to_string(pairs) + " pairs, " + std::to_string(specs_seen) + " blank specs, " +
                   std::to_string(prompts) + " prompts round-trip";
  }
  return c.out;
}

// ---------------------------------------------------------------- 3

// The original scores 0 and every other text scores `total`; word scores are
// all 0, so the chunk delta stays at 0.
struct SteeredScorer : Scorer {
  std::string original;
  double total = 0.0;
  std::vector<FluencyScore> score(const std::vector<std::string>& texts) override {
    std::vector<FluencyScore> out;
    for (const auto& t : texts) {
      FluencyScore s;
      s.total = t == original ? 0.0 : total;
      for (const auto& w : text::simple_tokenize(t)) s.token_logprobs.push_back({w, 0.0});
      out.push_back(std::move(s));
    }
    return out;
  }
};

Outcome fluency(const Paths& p) {
  Check c;
  const Dataset f2 = parse_conllu_file(p.fixtures + "/kids.conllu");
  const Sentence& x = *f2.find("kids-x");
  auto cands = generate_candidates(x, std::vector<ControlCode>{ControlCode::negation},
                                   std::vector<BlankSpec>{BlankSpec{{{2, 2}}}}, make_mock_backends(), PipelineOptions{})
                   .candidates;
  c.expect(!cands.empty(), "no candidates for the boundary check");
  SteeredScorer s;
  s.original = x.detokenize();
  for (double v : {-10.0, std::nextafter(-10.0, -11.0), -10.5, -9.5}) {
    s.total = v;
    const auto fr = fluency_filter(x, cands, s, 10.0);
    const bool keep = v >= -10.0;
    c.expect(fr.kept.size() == (keep ? cands.size() : 0), "delta " + std::to_string(v) + " handled wrongly");
  }
  c.expect(passes_fluency(0.0, -10.0, 10.0) && !passes_fluency(0.0, std::nextafter(-10.0, -11.0), 10.0),
           "chunk boundary");

  // Random (sentence delta, chunk delta) pairs: kept at t implies kept at t' > t.
  std::mt19937_64 rng(2021);
  std::uniform_real_distribution<double> delta(-25.0, 5.0), thr(0.0, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double ds = delta(rng), dc = delta(rng), t1 = thr(rng), t2 = t1 + thr(rng);
    const bool a = passes_fluency(ds, dc, t1), b = passes_fluency(ds, dc, t2);
    c.expect(!a || b, "not monotone at pair " + std::to_string(i));
    c.expect(a == (std::min(ds, dc) >= -t1), "rule mismatch at pair " + std::to_string(i));
  }
  // The same property through the filter itself.
  for (int i = 0; i < 200; ++i) {
    s.total = delta(rng);
    const double t1 = thr(rng), t2 = t1 + thr(rng);
    const auto a = fluency_filter(x, cands, s, t1), b = fluency_filter(x, cands, s, t2);
    c.expect(a.kept.size() <= b.kept.size(), "filter not monotone");
  }
  if (c.out.ok) c.out.detail = "-10 kept, below -10 rejected, 1000 pairs monotone";
  return c.out;
}

// ---------------------------------------------------------------- 4

std::vector<oracle::Tree> all_trees(int max_nodes, const std::vector<std::string>& alphabet) {
  std::vector<oracle::Tree> out;
  for (int n = 0; n <= max_nodes; ++n) {
    for (const auto& shape : oracle::ordered_shapes(n)) {
      std::size_t combos = 1;
      for (int i = 0; i < n; ++i) combos *= alphabet.size();
      for (std::size_t k = 0; k < combos; ++k) {
        oracle::Tree t;
        t.parent = shape;
        std::size_t code = k;
        for (int i = 0; i < n; ++i) {
          t.label.push_back(alphabet[code % alphabet.size()]);
          code /= alphabet.size();
        }
        out.push_back(std::move(t));
      }
    }
  }
  return out;
}

OrderedTree lib(const oracle::Tree& t) { return OrderedTree{t.label, t.parent}; }

oracle::Tree random_tree(std::mt19937_64& rng, int max_nodes) {
  oracle::Tree t;
  const int n = int(rng() % std::uint64_t(max_nodes + 1));
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      t.parent.push_back(-1);
    } else {
      std::vector<int> path;
      for (int v = i - 1; v >= 0; v = t.parent[v]) path.push_back(v);
      t.parent.push_back(path[rng() % path.size()]);
    }
    t.label.push_back(std::string(1, char('a' + rng() % 3)));
  }
  return t;
}

Outcome tree_distance(const Paths&) {
  Check c;
  const auto trees = all_trees(4, {"a", "b", "c"});
  std::size_t pairs = 0;
  for (const auto& a : trees) {
    const OrderedTree la = lib(a);
    for (const auto& b : trees) {
      const double got = tree_edit_distance(la, lib(b));
      const int want = oracle::tree_edit_distance(a, b);
      if (got != double(want)) {
        c.expect(false, "pair " + std::to_string(pairs) + ": got " + std::to_string(got) + ", oracle " + std::to_string(want));
      }
      ++pairs;
    }
  }
  std::mt19937_64 rng(77);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_tree(rng, 8), b = random_tree(rng, 8), z = random_tree(rng, 8);
    const double ab = tree_edit_distance(lib(a), lib(b)), ba = tree_edit_distance(lib(b), lib(a));
    const double az = tree_edit_distance(lib(a), lib(z)), zb = tree_edit_distance(lib(z), lib(b));
    const bool same = a.label == b.label && a.parent == b.parent;
    c.expect(tree_edit_distance(lib(a), lib(a)) == 0.0, "d(a,a) != 0");
    c.expect(ab == ba, "not symmetric");
    c.expect(same == (ab == 0.0), "identity of indiscernibles");
    c.expect(ab <= az + zb, "triangle inequality");
    c.expect(ab <= double(a.label.size() + b.label.size()), "exceeds delete-all + insert-all");
  }
  if (c.out.ok) c.out.detail = std::to_string(pairs) + " exhaustive pairs, 1000 axiom triples";
  return c.out;
}

// ---------------------------------------------------------------- 5

Outcome lexical_metrics(const Paths&) {
  Check c;
  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab{"the", "The", "dog", "cat", "is", "not", "NOT", "a", "big", "ran", ".", "kids"};
  auto sentence = [&](std::size_t max_len, const std::vector<std::string>& v) {
    std::vector<std::string> out;
    for (std::size_t n = rng() % (max_len + 1); n > 0; --n) out.push_back(v[rng() % v.size()]);
    return out;
  };
  for (int i = 0; i < 1000; ++i) {
    const auto a = sentence(12, vocab), b = sentence(12, vocab);
    c.expect(levenshtein(a, b) == oracle::levenshtein(a, b), "levenshtein differs at pair " + std::to_string(i));
  }
  c.expect(self_bleu({"a dog is here today", "a dog is here today", "a dog is here today"}) == 1.0,
           "self-BLEU of identical texts is not 1");

  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f"};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + rng() % 4;
    std::vector<std::vector<std::string>> toks;
    std::vector<std::string> texts;
    for (std::size_t k = 0; k < n; ++k) {
      auto t = sentence(9, words);
      if (t.empty()) t.push_back("a");
      texts.push_back(text::join(t, " "));
      toks.push_back(std::move(t));
    }
    double want = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<std::vector<std::string>> refs;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != k) refs.push_back(toks[j]);
      }
      want += oracle::bleu(toks[k], refs);
    }
    want /= double(n);
    worst = std::max(worst, std::fabs(self_bleu(texts) - want));
  }
  c.expect(worst <= 1e-9, "self-BLEU off by " + std::to_string(worst));
  if (c.out.ok) c.out.detail = "1000 Levenshtein pairs exact, 100 self-BLEU sets within 1e-9";
  return c.out;
}

// ---------------------------------------------------------------- 6

Outcome surprise(const Paths&) {
  Check c;
  {
    // x = [a, b], s(a) = 0.1, s(b) = 0.5; one candidate edits a and moves f_p by 0.8.
    const SurpriseResult r = surprise_select(AttributionMap{{0.1, 0.5}}, make_prediction({0.1, 0.9}),
                                             {SurpriseCandidate{{0}, {0}, PredictionRecord{0, {0.9, 0.1}}}});
    c.expect(r.t_low == 0 && r.pick_low == 0u && std::fabs(r.table[0].actual - 0.45) < 1e-12, "micro example");
  }
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto probs = [&](std::size_t k) {
    std::vector<double> v(k);
    double sum = 0.0;
    for (double& x : v) sum += (x = unit(rng) + 1e-3);
    for (double& x : v) x /= sum;
    return v;
  };
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 1 + rng() % 10, m = 1 + rng() % 20, classes = 2 + rng() % 2;
    AttributionMap attr;
    for (std::size_t t = 0; t < n; ++t) attr.weights.push_back(unit(rng));
    const PredictionRecord px = make_prediction(probs(classes));
    std::vector<SurpriseCandidate> cands;
    oracle::SurpriseCase sc;
    sc.s = attr.weights;
    sc.fx = px.probs[std::size_t(px.label)];
    for (std::size_t k = 0; k < m; ++k) {
      SurpriseCandidate cand;
      while (cand.edited.empty()) {
        for (std::size_t t = 0; t < n; ++t) {
          if (rng() % 3 == 0) cand.edited.insert(t);
        }
      }
      for (std::size_t t : cand.edited) {
        if (rng() % 2) cand.removed.insert(t);
      }
      cand.prediction = make_prediction(probs(classes));
      sc.edited.push_back(cand.edited);
      sc.removed.push_back(cand.removed);
      sc.fxhat.push_back(cand.prediction.probs[std::size_t(px.label)]);
      cands.push_back(std::move(cand));
    }
    const auto want = oracle::surprise(sc);
    const SurpriseResult got = surprise_select(attr, px, cands);
    const std::string at = "instance " + std::to_string(inst);
    for (std::size_t t = 0; t < n; ++t) {
      c.expect(std::fabs(got.table[t].actual - want.D[t]) <= 1e-9, at + ": D differs");
      c.expect(std::fabs(got.table[t].gap - want.gap[t]) <= 1e-9, at + ": gap differs");
    }
    c.expect(got.t_low == want.tL && got.t_high == want.tU, at + ": surprising tokens differ");
    c.expect((got.pick_low ? long(*got.pick_low) : -1L) == want.pickL, at + ": low pick differs");
    c.expect((got.pick_high ? long(*got.pick_high) : -1L) == want.pickU, at + ": high pick differs");
  }
  if (c.out.ok) c.out.detail = "micro example + 100 random instances within 1e-9";
  return c.out;
}

// ---------------------------------------------------------------- 7

Outcome set_cover(const Paths&) {
  Check c;
  std::mt19937_64 rng(1234);
  std::size_t instances = 0;
  double worst_ratio = 0.0;
  for (int inst = 0; inst < 2000; ++inst) {
    const int m = 1 + int(rng() % 10), u = 1 + int(rng() % 12);
    std::vector<std::set<int>> sets(static_cast<std::size_t>(m));
    for (auto& s : sets) {
      for (int e = 0; e < u; ++e) {
        if (rng() % 3 == 0) s.insert(e);
      }
    }
    // Make every element coverable.
    for (int e = 0; e < u; ++e) sets[rng() % std::size_t(m)].insert(e);
    std::vector<TemplateRule> rules;
    std::vector<double> weights;
    std::set<std::string> universe;
    for (int e = 0; e < u; ++e) universe.insert("e" + std::to_string(e));
    std::size_t largest = 0;
    for (int i = 0; i < m; ++i) {
      if (sets[std::size_t(i)].empty()) sets[std::size_t(i)].insert(0);
      TemplateRule r;
      r.after = {"t" + std::to_string(i)};
      for (int e : sets[std::size_t(i)]) r.covered.insert("e" + std::to_string(e));
      for (std::size_t o = 0, no = 1 + rng() % 4; o < no; ++o) r.originals.insert("o" + std::to_string(o));
      r.sparsity_weight = double(1u << (rng() % 4)) * (rng() % 2 ? 2.0 : 1.0);
      r.weight = r.sparsity_weight / double(r.originals.size());
      weights.push_back(r.weight);
      largest = std::max(largest, r.covered.size());
      rules.push_back(std::move(r));
    }
    const TemplateSelection sel = select_templates(rules, universe, 1.0);
    c.expect(sel.uncovered.empty(), "instance " + std::to_string(inst) + " left elements uncovered");
    double got = 0.0;
    for (const auto& r : sel.selected) got += r.weight;
    const double opt = oracle::optimal_cover(sets, weights, u);
    double h = 0.0;
    for (std::size_t k = 1; k <= largest; ++k) h += 1.0 / double(k);
    c.expect(got <= h * opt + 1e-9, "instance " + std::to_string(inst) + ": greedy " + std::to_string(got) +
                                        " > H * opt " + std::to_string(h * opt));
    worst_ratio = std::max(worst_ratio, got / opt);

    auto shuffled = rules;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const TemplateSelection again = select_templates(shuffled, universe, 1.0);
    bool same = again.selected.size() == sel.selected.size();
    for (std::size_t i = 0; same && i < sel.selected.size(); ++i) same = again.selected[i].pattern() == sel.selected[i].pattern();
    c.expect(same, "instance " + std::to_string(inst) + " depends on input order");
    ++instances;
  }
  if (c.out.ok) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu instances, worst greedy/opt %.3f", instances, worst_ratio);
    c.out.detail = buf;
  }
  return c.out;
}

// ---------------------------------------------------------------- 8

Outcome diversity(const Paths&) {
  Check c;
  std::mt19937_64 rng(88);
  const std::vector<std::string> vocab{"a", "b", "c"};
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = 1 + rng() % 8, k = 1 + rng() % 3;
    std::vector<SelectionSignature> pool;
    std::vector<oracle::Sig> ref;
    for (std::size_t i = 0; i < n; ++i) {
      const int code = int(rng() % 3);
      std::multiset<std::string> rem, add;
      for (std::size_t j = rng() % 3; j > 0; --j) rem.insert(vocab[rng() % 3]);
      for (std::size_t j = rng() % 3; j > 0; --j) add.insert(vocab[rng() % 3]);
      SelectionSignature s;
      s.code = kPerturbationCodes[std::size_t(code)];
      s.removed = rem;
      s.added = add;
      pool.push_back(std::move(s));
      ref.push_back({code, rem, add});
    }
    c.expect(diversity_select(pool, k) == oracle::diversity(ref, k, 0.2, 0.4, 0.4), "pool " + std::to_string(round));
  }
  if (c.out.ok) c.out.detail = "200 pools match the reference greedy";
  return c.out;
}

// ---------------------------------------------------------------- 9

struct E2E {
  std::string candidates, kept, selected, templates;
};

std::vector<std::pair<std::string, std::vector<Candidate>>> by_original(const std::vector<Candidate>& cands) {
  std::vector<std::pair<std::string, std::vector<Candidate>>> out;
  std::map<std::string, std::size_t> where;
  for (const Candidate& c : cands) {
    auto [it, fresh] = where.try_emplace(c.original_id, out.size());
    if (fresh) out.push_back({c.original_id, {}});
    out[it->second].second.push_back(c);
  }
  return out;
}

E2E e2e_library(const std::string& corpus) {
  const Dataset ds = parse_conllu_file(corpus);
  const Backends b = make_mock_backends();
  PipelineOptions opts;
  E2E r;
  std::vector<Candidate> all;
  std::ostringstream gen;
  for (const Sentence* x : ds.originals()) {
    auto got = generate_candidates(*x, std::nullopt, std::nullopt, b, opts).candidates;
    write_candidates_jsonl(gen, got);
    all.insert(all.end(), got.begin(), got.end());
  }
  r.candidates = gen.str();

  std::vector<Candidate> kept;
  std::ostringstream k;
  for (auto& [oid, list] : by_original(all)) {
    auto fr = fluency_filter(*ds.find(oid), list, *b.scorer, 10.0);
    write_candidates_jsonl(k, fr.kept);
    kept.insert(kept.end(), fr.kept.begin(), fr.kept.end());
  }
  r.kept = k.str();

  std::ostringstream sel;
  for (const auto& [oid, list] : by_original(kept)) {
    std::vector<SelectionSignature> sigs;
    for (const Candidate& c : list) sigs.push_back(signature_of(*ds.find(oid), c));
    for (std::size_t i : diversity_select(sigs, 3)) sel << json(list[i]).dump() << '\n';
  }
  r.selected = sel.str();

  std::vector<TemplateSource> sources;
  PredictionPairs preds;
  std::set<std::string> universe;
  for (auto& [oid, list] : by_original(kept)) {
    const Sentence& x = *ds.find(oid);
    const PredictionRecord px = predict_candidates(x, list, *b.predictor);
    for (const Candidate& c : list) {
      sources.push_back({c.id, oid, candidate_perturbation(x, c)});
      preds[c.id] = {px, *c.prediction};
      universe.insert(c.id);
    }
  }
  const auto chosen = select_templates(extract_templates(sources), universe, 0.9);
  r.templates = templates_tsv(flip_rates(chosen.selected, preds));
  return r;
}

std::optional<E2E> e2e_cli(const Paths& p, const fs::path& dir, const std::string& corpus) {
  fs::create_directories(dir);
  const std::string cli = quote(p.cli) + " --mock ";
  auto at = [&](const char* name) { return quote((dir / name).string()); };
  const std::string steps[] = {
      cli + "generate " + quote(corpus) + " -o " + at("candidates.jsonl"),
      cli + "filter " + quote(corpus) + " " + at("candidates.jsonl") + " -o " + at("kept.jsonl"),
      cli + "select --strategy diversity -k 3 --corpus " + quote(corpus) + " --candidates " + at("kept.jsonl") + " -o " +
          at("selected.jsonl"),
      cli + "templates " + quote(corpus) + " " + at("kept.jsonl") + " -o " + at("templates.tsv"),
  };
  for (const auto& s : steps) {
    if (sh(s + " 2>/dev/null") != 0) return std::nullopt;
  }
  return E2E{slurp(dir / "candidates.jsonl"), slurp(dir / "kept.jsonl"), slurp(dir / "selected.jsonl"),
             slurp(dir / "templates.tsv")};
}

Outcome end_to_end(const Paths& p) {
  Check c;
  const std::string corpus = p.fixtures + "/pipeline.conllu";
  const auto one = e2e_cli(p, p.work / "e2e-1", corpus);
  const auto two = e2e_cli(p, p.work / "e2e-2", corpus);
  c.expect(one && two, "CLI pipeline failed");
  if (!c.out.ok) return c.out;
  const E2E lib = e2e_library(corpus);
  const std::pair<const char*, std::string E2E::*> files[] = {{"candidates.jsonl", &E2E::candidates},
                                                             {"kept.jsonl", &E2E::kept},
                                                             {"selected.jsonl", &E2E::selected},
                                                             {"templates.tsv", &E2E::templates}};
  const char* update = std::getenv("CFKIT_UPDATE_GOLDEN");
  if (update && std::string(update) == "1") {
    fs::create_directories(p.golden);
    for (const auto& [name, field] : files) spit(fs::path(p.golden) / name, (*one).*field);
  }
  for (const auto& [name, field] : files) {
    c.expect(!((*one).*field).empty(), std::string(name) + " is empty");
    c.expect((*one).*field == (*two).*field, std::string(name) + " differs between runs");
    c.expect((*one).*field == lib.*field, std::string(name) + " differs between CLI and library");
    const fs::path golden = fs::path(p.golden) / name;
    c.expect(fs::exists(golden), golden.string() + " missing (run with CFKIT_UPDATE_GOLDEN=1)");
    c.expect(slurp(golden) == (*one).*field, std::string(name) + " differs from golden");
  }
  if (c.out.ok) {
    auto lines = [](const std::string& s) { return std::to_string(std::count(s.begin(), s.end(), '\n')); };
    c.out.detail = lines(one->candidates) + " candidates, " + lines(one->kept) + " kept, " + lines(one->selected) +
                   " selected, " + lines(one->templates) + " TSV lines; byte-equal to golden";
  }
  return c.out;
}

// ---------------------------------------------------------------- 10

Outcome contrast(const Paths& p) {
  Check c;
  const std::string path = p.fixtures + "/contrast_pairs.jsonl";
  std::set<std::string> flipped;
  std::size_t rows = 0;
  {
    std::ifstream in(path);
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      ++rows;
      if (j["label_original"] != j["label_revised"]) flipped.insert(j["id"].get<std::string>());
    }
  }
  std::ifstream in(path);
  const auto pairs = parse_pairs_jsonl(in);
  std::vector<LabeledCandidate> items;
  for (const auto& pr : pairs) items.push_back({pr.id, pr.label_revised, pr.label_original});
  const ContrastPartition part = contrast_filter(items);
  std::set<std::string> kept;
  for (std::size_t i : part.kept) kept.insert(items[i].id);
  std::set<std::size_t> all(part.kept.begin(), part.kept.end());
  all.insert(part.dropped.begin(), part.dropped.end());
  c.expect(rows == 100 && pairs.size() == 100, "fixture has " + std::to_string(rows) + " rows");
  c.expect(all.size() == 100 && part.kept.size() + part.dropped.size() == 100, "partition loses or repeats items");
  c.expect(kept == flipped, "kept set differs from the label-flipped set");
  c.expect(kept.size() == 45, "kept " + std::to_string(kept.size()) + ", expected 45");

  const fs::path out = p.work / "contrast.jsonl";
  c.expect(sh(quote(p.cli) + " select --strategy contrast --pairs " + quote(path) + " -o " + quote(out.string())) == 0,
           "CLI contrast failed");
  std::set<std::string> cli_kept;
  std::ifstream cin(out);
  for (std::string line; std::getline(cin, line);) {
    if (!line.empty()) cli_kept.insert(json::parse(line)["id"].get<std::string>());
  }
  c.expect(cli_kept == flipped, "CLI kept set differs");
  if (c.out.ok) c.out.detail = "100 pairs -> 45 kept + 55 dropped, CLI agrees";
  return c.out;
}

// ---------------------------------------------------------------- 11

struct Server {
  pid_t pid = -1;
  int port = -1;
};

Server spawn(const Paths& p, const fs::path& data) {
  int fds[2];
  if (pipe(fds) != 0) return {};
  const pid_t pid = fork();
  if (pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    execl(p.cli.c_str(), "cfkit", "--mock", "serve", "--host", "127.0.0.1", "--port", "0", "--data-dir",
          data.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  std::string line;
  char ch;
  while (read(fds[0], &ch, 1) == 1 && ch != '\n') line += ch;
  close(fds[0]);
  Server s{pid, -1};
  if (auto colon = line.rfind(':'); line.rfind("listening on ", 0) == 0 && colon != std::string::npos) {
    s.port = std::atoi(line.c_str() + colon + 1);
  }
  return s;
}

void stop(Server& s, int sig) {
  if (s.pid > 0) {
    kill(s.pid, sig);
    waitpid(s.pid, nullptr, 0);
    s.pid = -1;
  }
}

Outcome service(const Paths& p) {
  Check c;
  const fs::path data = p.work / "service-data";
  fs::remove_all(data);
  Server srv = spawn(p, data);
  c.expect(srv.port > 0, "service did not report a port");
  if (!c.out.ok) {
    stop(srv, SIGKILL);
    return c.out;
  }
  json before;
  {
    httplib::Client cli("127.0.0.1", srv.port);
    cli.set_read_timeout(30, 0);
    auto post = [&](const std::string& path, const json& body, int want) {
      auto res = cli.Post(path, body.dump(), "application/json");
      c.expect(res && res->status == want, "POST " + path + " -> " + (res ? std::to_string(res->status) : "no response"));
      return res ? json::parse(res->body, nullptr, false) : json();
    };
    post("/v1/sessions", {{"id", "acceptance"}, {"path", p.fixtures + "/pipeline.conllu"}}, 201);
    post("/v1/sessions/acceptance/generate", {{"sentence_id", "pc001"}}, 200);
    post("/v1/sessions/acceptance/generate", {{"sentence_id", "pe001"}}, 200);
    post("/v1/sessions/acceptance/selections", {{"strategy", "diversity"}, {"sentence_id", "pc001"}, {"k", 3}}, 200);
    post("/v1/sessions/acceptance/selections", {{"strategy", "contrast"}}, 200);
    const json t = post("/v1/sessions/acceptance/templates", json::object(), 200);
    c.expect(t.contains("templates") && !t["templates"].empty(), "no templates mined");
    auto got = cli.Get("/v1/sessions/acceptance");
    c.expect(got && got->status == 200, "GET session failed");
    if (got) before = json::parse(got->body, nullptr, false);
  }
  stop(srv, SIGKILL);

  Server again = spawn(p, data);
  c.expect(again.port > 0, "service did not restart");
  if (again.port > 0) {
    httplib::Client cli("127.0.0.1", again.port);
    auto got = cli.Get("/v1/sessions/acceptance");
    c.expect(got && got->status == 200, "session missing after restart");
    if (got) c.expect(json::parse(got->body, nullptr, false) == before, "reloaded session differs");
    c.expect(before.contains("candidates") && before["candidates"].size() == 2, "session lacks candidates");
  }
  stop(again, SIGTERM);
  if (c.out.ok) c.out.detail = "state identical after SIGKILL and restart";
  return c.out;
}

}  // namespace

int main(int argc, char** argv) {
  Paths paths;
  CLI::App app{"cfkit acceptance suite"};
  app.add_option("--cli", paths.cli, "cfkit executable")->required();
  app.add_option("--fixtures", paths.fixtures, "Fixture directory")->required();
  app.add_option("--golden", paths.golden, "Golden output directory")->required();
  CLI11_PARSE(app, argc, argv);

  paths.work = fs::temp_directory_path() / ("cfkit-acceptance-" + std::to_string(getpid()));
  fs::create_directories(paths.work);

  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)(const Paths&);
    double limit_s;  // 0: no runtime bound
  };
  const Criterion criteria[] = {
      {1, "control-code golden suite", control_codes, 1.0},
      {2, "prompt wire format", wire_format, 0},
      {3, "fluency filter", fluency, 0},
      {4, "tree edit distance", tree_distance, 30.0},
      {5, "levenshtein and self-BLEU", lexical_metrics, 0},
      {6, "surprise selection", surprise, 0},
      {7, "greedy weighted set cover", set_cover, 10.0},
      {8, "diversity selection", diversity, 0},
      {9, "end-to-end determinism", end_to_end, 60.0},
      {10, "contrast filter", contrast, 0},
      {11, "service round-trip", service, 0},
  };

  int failed = 0;
  for (const auto& cr : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run(paths);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.ok && cr.limit_s > 0 && secs >= cr.limit_s) {
      o = {false, "took " + std::to_string(secs) + "s, limit " + std::to_string(cr.limit_s) + "s"};
    }
    failed += !o.ok;
    std::printf("%s %2d %-28s %7.2fs  %s\n", o.ok ? "PASS" : "FAIL", cr.id, cr.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(paths.work);
  std::printf("%d/%zu criteria passed\n", int(std::size(criteria)) - failed, std::size(criteria));
  return failed ? 1 : 0;
}
