// cfkit command-line front end.

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "httplib.h"

#include "cfkit/error.hpp"
#include "cfkit/http_backend.hpp"
#include "cfkit/jsonio.hpp"
#include "cfkit/mock_backend.hpp"
#include "cfkit/service.hpp"
#include "cfkit/text.hpp"

using namespace cfkit;

namespace {

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string backend_url;
  bool mock = false;
  std::size_t max_in_flight = 8;
};

struct Settings {
  PipelineOptions pipeline;
  BackendUrls urls;
  double threshold = 10.0;
  std::size_t max_in_flight = 8;
  std::string data_dir;
  int port = 8080;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

Settings load_settings(const Globals& g) {
  Settings s;
  s.urls = backend_urls_from_env();
  if (const char* d = std::getenv("CFKIT_DATA_DIR")) s.data_dir = d;
  if (const char* p = std::getenv("CFKIT_PORT")) s.port = std::atoi(p);
  if (!g.config_path.empty()) {
    const json c = read_json_file(g.config_path);
    s.pipeline.seed = c.value("seed", s.pipeline.seed);
    s.threshold = c.value("threshold", s.threshold);
    s.max_in_flight = c.value("max_in_flight", s.max_in_flight);
    s.pipeline.params.num_return = c.value("num_return", s.pipeline.params.num_return);
    s.pipeline.params.beam_width = c.value("beam_width", s.pipeline.params.beam_width);
    s.pipeline.params.temperature = c.value("temperature", s.pipeline.params.temperature);
    if (c.value("strategy", "beam") == "sample") s.pipeline.params.strategy = GenerationParams::Strategy::sample;
    s.pipeline.blanks.max_specs = c.value("max_blank_specs", s.pipeline.blanks.max_specs);
    if (c.contains("backend_url")) {
      const std::string u = c["backend_url"].get<std::string>();
      s.urls.generate = s.urls.score = s.urls.predict = u;
    }
    s.urls.generate = c.value("gen_url", s.urls.generate);
    s.urls.score = c.value("score_url", s.urls.score);
    s.urls.predict = c.value("predict_url", s.urls.predict);
    if (c.contains("timeout_ms")) s.urls.timeout = std::chrono::milliseconds(c["timeout_ms"].get<long>());
    if (c.contains("negation_lexicon")) s.pipeline.classifier.negation_lexicon = load_word_list(c["negation_lexicon"]);
    if (c.contains("quantifier_lexicon")) s.pipeline.classifier.quantifier_lexicon = load_word_list(c["quantifier_lexicon"]);
    s.pipeline.classifier.shuffle_overlap_min = c.value("shuffle_overlap_min", s.pipeline.classifier.shuffle_overlap_min);
    s.pipeline.classifier.global_edit_max = c.value("global_edit_max", s.pipeline.classifier.global_edit_max);
    s.data_dir = c.value("data_dir", s.data_dir);
    s.port = c.value("port", s.port);
  }
  if (g.seed_set) s.pipeline.seed = g.seed;
  s.pipeline.params.seed = s.pipeline.seed;
  if (!g.backend_url.empty()) s.urls.generate = s.urls.score = s.urls.predict = g.backend_url;
  if (g.max_in_flight != 8) s.max_in_flight = g.max_in_flight;
  s.pipeline.params.validate();
  s.pipeline.classifier.validate();
  return s;
}

Backends make_backends(const Globals& g, const Settings& s) {
  if (g.mock || !s.urls.any()) {
    Backends b = make_mock_backends();
    b.max_in_flight = s.max_in_flight;
    return b;
  }
  return make_http_backends(s.urls, s.max_in_flight);
}

template <class T>
T& require(const std::shared_ptr<T>& p, const char* what) {
  if (!p) throw BackendError(BackendError::Kind::transport, std::string("no ") + what + " backend configured");
  return *p;
}

// Writes to the named file, or stdout for "" / "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::trunc);
      if (!file_) throw ValidationError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<Candidate> read_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return read_candidates_jsonl(in);
}

const Sentence& lookup(const Dataset& ds, const std::string& id) {
  const Sentence* x = ds.find(id);
  if (!x) throw NotFoundError("no sentence '" + id + "' in corpus");
  return *x;
}

// Candidates grouped by original, in first-appearance order.
std::vector<std::pair<std::string, std::vector<Candidate>>> group(const std::vector<Candidate>& cands) {
  std::vector<std::pair<std::string, std::vector<Candidate>>> out;
  std::map<std::string, std::size_t> where;
  for (const Candidate& c : cands) {
    auto [it, fresh] = where.try_emplace(c.original_id, out.size());
    if (fresh) out.push_back({c.original_id, {}});
    out[it->second].second.push_back(c);
  }
  return out;
}

// Fills in missing predictions and returns each original's prediction.
std::map<std::string, PredictionRecord> ensure_predictions(const Dataset& ds, std::vector<Candidate>& cands,
                                                           Predictor& predictor) {
  std::map<std::string, PredictionRecord> originals;
  auto groups = group(cands);
  std::map<std::string, Candidate*> by_id;
  for (Candidate& c : cands) by_id[c.id] = &c;
  for (auto& [oid, list] : groups) {
    originals[oid] = predict_candidates(lookup(ds, oid), list, predictor);
    for (const Candidate& c : list) {
      if (!by_id[c.id]->prediction) by_id[c.id]->prediction = c.prediction;
    }
  }
  return originals;
}

Sentence resolve(const Dataset* parses, const std::string& id, const std::string& text) {
  if (parses) {
    if (const Sentence* s = parses->find_by_text(text)) return s->with_id(id);
  }
  return Sentence::from_text(id, text);
}

json edits_json(const Perturbation& p) {
  json out = json::array();
  for (const EditSpan& e : p.edits) out.push_back({{"x", e.x}, {"xhat", e.xhat}, {"kind", std::string(to_string(e.kind))}});
  return out;
}

std::atomic<httplib::Server*> g_server{nullptr};

void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cfkit: counterfactual generation, selection and analysis"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON settings file")->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t v) { g.seed = v; g.seed_set = true; }, "Random seed for blanks and sampling");
  app.add_option("--backend-url", g.backend_url, "Base URL serving /generate, /score and /predict");
  app.add_flag("--mock", g.mock, "Use the built-in deterministic mock backend");
  app.add_option("--max-in-flight", g.max_in_flight, "Concurrent generation requests")->check(CLI::PositiveNumber);

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "Control codes for sentence pairs (JSONL in, JSONL out)");
  std::string cl_input, cl_parses, cl_output;
  classify_cmd->add_option("input", cl_input, "Pairs JSONL")->required()->check(CLI::ExistingFile);
  classify_cmd->add_option("--parses", cl_parses, "CoNLL-U parses, matched to pair sides by text")->check(CLI::ExistingFile);
  classify_cmd->add_option("-o,--output", cl_output, "Output file (default stdout)");

  // prompts
  auto* prompts_cmd = app.add_subcommand("prompts", "Training or generation prompts for a corpus");
  std::string pr_corpus, pr_mode = "training", pr_output;
  std::vector<std::string> pr_codes;
  prompts_cmd->add_option("corpus", pr_corpus, "CoNLL-U corpus")->required()->check(CLI::ExistingFile);
  prompts_cmd->add_option("--mode", pr_mode, "training or generation")->check(CLI::IsMember({"training", "generation"}));
  prompts_cmd->add_option("--codes", pr_codes, "Control codes for generation prompts (default: all)");
  prompts_cmd->add_option("-o,--output", pr_output, "Output file (default stdout)");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Generate candidates for every original sentence");
  std::string ge_corpus, ge_output;
  std::vector<std::string> ge_codes, ge_ids;
  gen_cmd->add_option("corpus", ge_corpus, "CoNLL-U corpus")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--codes", ge_codes, "Control codes (default: all)");
  gen_cmd->add_option("--sentence", ge_ids, "Restrict to these sentence ids");
  gen_cmd->add_option("-o,--output", ge_output, "Candidates JSONL (default stdout)");

  // filter
  auto* filter_cmd = app.add_subcommand("filter", "Fluency filter over candidates");
  std::string fi_corpus, fi_cands, fi_output, fi_rejected;
  double fi_threshold = -1.0;
  filter_cmd->add_option("corpus", fi_corpus, "CoNLL-U corpus")->required()->check(CLI::ExistingFile);
  filter_cmd->add_option("candidates", fi_cands, "Candidates JSONL")->required()->check(CLI::ExistingFile);
  filter_cmd->add_option("--threshold", fi_threshold, "Largest allowed log-probability drop (default 10)");
  filter_cmd->add_option("-o,--output", fi_output, "Kept candidates (default stdout)");
  filter_cmd->add_option("--rejected", fi_rejected, "Write rejected candidates here");

  // select
  auto* select_cmd = app.add_subcommand("select", "Pick a subset of candidates");
  std::string se_strategy, se_corpus, se_cands, se_attr, se_pairs, se_output;
  std::size_t se_k = 3;
  select_cmd->add_option("--strategy", se_strategy, "diversity, surprise or contrast")
      ->required()
      ->check(CLI::IsMember({"diversity", "surprise", "contrast"}));
  select_cmd->add_option("--corpus", se_corpus, "CoNLL-U corpus")->check(CLI::ExistingFile);
  select_cmd->add_option("--candidates", se_cands, "Candidates JSONL")->check(CLI::ExistingFile);
  select_cmd->add_option("--pairs", se_pairs, "Labeled pairs JSONL (contrast)")->check(CLI::ExistingFile);
  select_cmd->add_option("--attribution", se_attr, "JSON object: sentence id -> token weights (surprise)")
      ->check(CLI::ExistingFile);
  select_cmd->add_option("-k", se_k, "Candidates per sentence (diversity)")->check(CLI::PositiveNumber);
  select_cmd->add_option("-o,--output", se_output, "Output JSONL (default stdout)");

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "Closeness and diversity report");
  std::string me_corpus, me_cands, me_texts, me_label = "deprel", me_json;
  metrics_cmd->add_option("--corpus", me_corpus, "CoNLL-U corpus")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--candidates", me_cands, "Candidates JSONL")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--texts", me_texts, "One text per line; prints their self-BLEU")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--tree-label", me_label, "deprel, upos or both")->check(CLI::IsMember({"deprel", "upos", "both"}));
  metrics_cmd->add_option("--json", me_json, "Also write the report as JSON");

  // templates
  auto* tpl_cmd = app.add_subcommand("templates", "Mine perturbation templates and flip rates (TSV)");
  std::string tp_corpus, tp_cands, tp_output, tp_json;
  double tp_budget = 0.9;
  tpl_cmd->add_option("corpus", tp_corpus, "CoNLL-U corpus")->required()->check(CLI::ExistingFile);
  tpl_cmd->add_option("candidates", tp_cands, "Candidates JSONL")->required()->check(CLI::ExistingFile);
  tpl_cmd->add_option("--budget", tp_budget, "Fraction of candidates to cover")->check(CLI::Range(0.0, 1.0));
  tpl_cmd->add_option("-o,--output", tp_output, "TSV output (default stdout)");
  tpl_cmd->add_option("--json", tp_json, "Also write the flip reports as JSON");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the analysis service");
  std::string sv_host = "127.0.0.1", sv_data;
  int sv_port = -1;
  serve_cmd->add_option("--host", sv_host, "Bind address");
  serve_cmd->add_option("--port", sv_port, "Port (default CFKIT_PORT or 8080; 0 picks a free port)");
  serve_cmd->add_option("--data-dir", sv_data, "Session directory (default CFKIT_DATA_DIR or ./cfkit-data)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const Settings st = load_settings(g);

    if (*classify_cmd) {
      std::ifstream in(cl_input);
      const auto pairs = parse_pairs_jsonl(in);
      std::optional<Dataset> parses;
      if (!cl_parses.empty()) parses = parse_conllu_file(cl_parses);
      Output out(cl_output);
      for (const SentencePair& p : pairs) {
        const Dataset* ps = parses ? &*parses : nullptr;
        Perturbation pt = make_perturbation(resolve(ps, p.id + ":x", p.original), resolve(ps, p.id + ":xhat", p.revised));
        json row = {{"id", p.id},
                    {"original", p.original},
                    {"revised", p.revised},
                    {"code", std::string(to_string(primary_code(pt, st.pipeline.classifier)))},
                    {"edits", edits_json(pt)}};
        out.stream() << row.dump() << '\n';
      }
      return 0;
    }

    if (*prompts_cmd) {
      const Dataset ds = parse_conllu_file(pr_corpus);
      Output out(pr_output);
      if (pr_mode == "training") {
        for (const auto& [oid, revs] : ds.pair_index) {
          const Sentence& x = lookup(ds, oid);
          for (const auto& rid : revs) {
            const Perturbation p = make_perturbation(x, lookup(ds, rid));
            if (p.edits.empty()) continue;
            const ControlCode code = primary_code(p, st.pipeline.classifier);
            for (const BlankSpec& spec : enumerate_blanks(x, &p.edits, BlankMode::training, st.pipeline.seed)) {
              out.stream() << render_prompt(make_training_prompt(p, spec, code)) << ' ' << kEndToken << '\n';
            }
          }
        }
      } else {
        std::vector<ControlCode> codes(kPerturbationCodes.begin(), kPerturbationCodes.end());
        if (!pr_codes.empty()) {
          codes.clear();
          for (const auto& c : pr_codes) {
            auto cc = parse_control_code(c);
            if (!cc) throw ValidationError("unknown control code '" + c + "'");
            codes.push_back(*cc);
          }
        }
        for (const Sentence* x : ds.originals()) {
          const auto specs = enumerate_blanks(*x, nullptr, BlankMode::generation, st.pipeline.seed, st.pipeline.blanks);
          for (ControlCode c : codes) {
            for (const BlankSpec& spec : specs) {
              out.stream() << render_prompt(Prompt{x->text(), c, blank_template(*x, spec), std::nullopt}) << '\n';
            }
          }
        }
      }
      return 0;
    }

    if (*gen_cmd) {
      const Dataset ds = parse_conllu_file(ge_corpus);
      const Backends b = make_backends(g, st);
      std::optional<std::vector<ControlCode>> codes;
      if (!ge_codes.empty()) {
        codes.emplace();
        for (const auto& c : ge_codes) {
          auto cc = parse_control_code(c);
          if (!cc) throw ValidationError("unknown control code '" + c + "'");
          codes->push_back(*cc);
        }
      }
      std::vector<const Sentence*> targets;
      if (ge_ids.empty()) targets = ds.originals();
      else for (const auto& id : ge_ids) targets.push_back(&lookup(ds, id));
      Output out(ge_output);
      for (const Sentence* x : targets) {
        GenerationResult r = generate_candidates(*x, codes, std::nullopt, b, st.pipeline);
        for (const auto& e : r.errors) std::cerr << x->id() << ": " << e << '\n';
        write_candidates_jsonl(out.stream(), r.candidates);
      }
      return 0;
    }

    if (*filter_cmd) {
      const Dataset ds = parse_conllu_file(fi_corpus);
      const Backends b = make_backends(g, st);
      Scorer& scorer = require(b.scorer, "scoring");
      const double threshold = fi_threshold >= 0 ? fi_threshold : st.threshold;
      Output out(fi_output);
      std::optional<Output> rej;
      if (!fi_rejected.empty()) rej.emplace(fi_rejected);
      for (auto& [oid, list] : group(read_candidates(fi_cands))) {
        FilterResult r = fluency_filter(lookup(ds, oid), std::move(list), scorer, threshold);
        write_candidates_jsonl(out.stream(), r.kept);
        if (rej) write_candidates_jsonl(rej->stream(), r.rejected);
      }
      return 0;
    }

    if (*select_cmd) {
      Output out(se_output);
      if (se_strategy == "contrast" && !se_pairs.empty()) {
        std::ifstream in(se_pairs);
        const auto pairs = parse_pairs_jsonl(in);
        std::vector<LabeledCandidate> items;
        for (const auto& p : pairs) items.push_back({p.id, p.label_revised, p.label_original});
        const ContrastPartition part = contrast_filter(items);
        for (std::size_t i : part.kept) {
          const auto& p = pairs[i];
          out.stream() << json({{"id", p.id}, {"original", p.original}, {"revised", p.revised},
                                {"label_original", *p.label_original}, {"label_revised", *p.label_revised}})
                              .dump()
                       << '\n';
        }
        return 0;
      }
      if (se_corpus.empty() || se_cands.empty()) throw ValidationError("--corpus and --candidates are required");
      const Dataset ds = parse_conllu_file(se_corpus);
      std::vector<Candidate> cands = read_candidates(se_cands);
      if (se_strategy == "diversity") {
        for (const auto& [oid, list] : group(cands)) {
          const Sentence& x = lookup(ds, oid);
          std::vector<SelectionSignature> sigs;
          for (const Candidate& c : list) sigs.push_back(signature_of(x, c));
          for (std::size_t i : diversity_select(sigs, se_k)) out.stream() << json(list[i]).dump() << '\n';
        }
        return 0;
      }
      const Backends b = make_backends(g, st);
      const auto originals = ensure_predictions(ds, cands, require(b.predictor, "prediction"));
      if (se_strategy == "contrast") {
        std::vector<LabeledCandidate> items;
        for (const Candidate& c : cands) {
          items.push_back({c.id, std::to_string(c.prediction->label), std::to_string(originals.at(c.original_id).label)});
        }
        for (std::size_t i : contrast_filter(items).kept) out.stream() << json(cands[i]).dump() << '\n';
        return 0;
      }
      if (se_attr.empty()) throw ValidationError("surprise selection needs an attribution map (--attribution)");
      const json attr = read_json_file(se_attr);
      for (const auto& [oid, list] : group(cands)) {
        if (!attr.contains(oid)) continue;
        const Sentence& x = lookup(ds, oid);
        AttributionMap am{attr[oid].get<std::vector<double>>()};
        if (am.weights.size() != x.size()) throw ValidationError("attribution for '" + oid + "' has the wrong length");
        const SurpriseResult r = surprise_select(x, am, originals.at(oid), list);
        json row = {{"sentence_id", oid}, {"surprise", r}};
        row["pick_low"] = r.pick_low ? json(list[*r.pick_low]) : json(nullptr);
        row["pick_high"] = r.pick_high ? json(list[*r.pick_high]) : json(nullptr);
        out.stream() << row.dump() << '\n';
      }
      return 0;
    }

    if (*metrics_cmd) {
      if (!me_texts.empty()) {
        std::ifstream in(me_texts);
        std::vector<std::string> texts;
        for (std::string line; std::getline(in, line);) {
          if (!text::trim(line).empty()) texts.push_back(line);
        }
        std::cout << json({{"self_bleu", self_bleu(texts)}}).dump() << '\n';
        return 0;
      }
      if (me_corpus.empty() || me_cands.empty()) throw ValidationError("--corpus and --candidates (or --texts) are required");
      const Dataset ds = parse_conllu_file(me_corpus);
      std::vector<std::pair<Sentence, std::vector<Sentence>>> groups;
      for (const auto& [oid, list] : group(read_candidates(me_cands))) {
        const Sentence& x = lookup(ds, oid);
        std::vector<Sentence> revs;
        for (const Candidate& c : list) revs.push_back(c.revised ? *c.revised : Sentence::from_text(c.id, c.revised_text));
        groups.push_back({x, std::move(revs)});
      }
      const TreeLabel label = me_label == "upos" ? TreeLabel::upos : me_label == "both" ? TreeLabel::deprel_upos : TreeLabel::deprel;
      const IntrinsicReport rep = intrinsic_report(groups, label);
      std::cout << format_report_table(rep);
      if (!me_json.empty()) Output(me_json).stream() << json(rep).dump(2) << '\n';
      return 0;
    }

    if (*tpl_cmd) {
      const Dataset ds = parse_conllu_file(tp_corpus);
      std::vector<Candidate> cands = read_candidates(tp_cands);
      const Backends b = make_backends(g, st);
      const auto originals = ensure_predictions(ds, cands, require(b.predictor, "prediction"));
      std::vector<TemplateSource> sources;
      PredictionPairs preds;
      std::set<std::string> universe;
      for (const Candidate& c : cands) {
        sources.push_back({c.id, c.original_id, candidate_perturbation(lookup(ds, c.original_id), c)});
        preds[c.id] = {originals.at(c.original_id), *c.prediction};
        universe.insert(c.id);
      }
      const auto sel = select_templates(extract_templates(sources), universe, tp_budget);
      const auto reports = flip_rates(sel.selected, preds);
      for (const auto& u : sel.uncovered) std::cerr << "uncovered: " << u << '\n';
      Output(tp_output).stream() << templates_tsv(reports);
      if (!tp_json.empty()) Output(tp_json).stream() << json(reports).dump(2) << '\n';
      return 0;
    }

    if (*serve_cmd) {
      ServiceConfig cfg;
      cfg.data_dir = !sv_data.empty() ? sv_data : !st.data_dir.empty() ? st.data_dir : "cfkit-data";
      cfg.backends = make_backends(g, st);
      cfg.pipeline = st.pipeline;
      cfg.fluency_threshold = st.threshold;
      AnalysisService service(cfg);
      httplib::Server server;
      service.register_routes(server);
      int port = sv_port >= 0 ? sv_port : st.port;
      if (port == 0) {
        port = server.bind_to_any_port(sv_host);
      } else if (!server.bind_to_port(sv_host, port)) {
        throw ValidationError("cannot bind " + sv_host + ":" + std::to_string(port));
      }
      if (port < 0) throw ValidationError("cannot bind " + sv_host);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on " << sv_host << ':' << port << std::endl;
      server.listen_after_bind();
      g_server = nullptr;
      return 0;
    }
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
