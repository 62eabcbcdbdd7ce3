#include "cfkit/service.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "httplib.h"

#include "cfkit/error.hpp"

namespace fs = std::filesystem;

namespace cfkit {

namespace {

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ControlCode code_or_throw(const std::string& s) {
  auto c = parse_control_code(s);
  if (!c) throw ValidationError("unknown control code '" + s + "'");
  return *c;
}

const Sentence& sentence_or_throw(const AnalysisSession& s, const std::string& sid) {
  const Sentence* x = s.dataset.find(sid);
  if (!x) throw NotFoundError("no sentence '" + sid + "' in session " + s.id);
  return *x;
}

std::string require_string(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) throw ValidationError(std::string("missing string field '") + key + "'");
  return body[key].get<std::string>();
}

json error_body(const std::string& code, const std::string& message, json detail = json::object()) {
  return {{"code", code}, {"message", message}, {"detail", std::move(detail)}};
}

}  // namespace

void to_json(json& j, const AnalysisSession& s) {
  json sentences = json::array();
  for (const Sentence& x : s.dataset.sentences) sentences.push_back(x);
  json cands = json::object();
  for (const auto& [sid, list] : s.candidates) cands[sid] = list;
  json preds = json::object();
  for (const auto& [sid, p] : s.original_predictions) preds[sid] = p;
  json sel = json::object();
  for (const auto& [name, r] : s.selections) sel[name] = r;
  j = {{"id", s.id},
       {"dataset_ref", s.dataset_ref},
       {"sentences", sentences},
       {"pair_index", s.dataset.pair_index},
       {"candidates", cands},
       {"original_predictions", preds},
       {"selections", sel},
       {"templates", s.templates},
       {"created", s.created},
       {"updated", s.updated}};
}

void from_json(const json& j, AnalysisSession& s) {
  s = AnalysisSession{};
  s.id = j.at("id").get<std::string>();
  s.dataset_ref = j.value("dataset_ref", "");
  for (const json& x : j.at("sentences")) s.dataset.sentences.push_back(x.get<Sentence>());
  if (j.contains("pair_index")) {
    s.dataset.pair_index = j["pair_index"].get<std::map<std::string, std::vector<std::string>>>();
  }
  for (const auto& [sid, list] : j.at("candidates").items()) s.candidates[sid] = list.get<std::vector<Candidate>>();
  for (const auto& [sid, p] : j.at("original_predictions").items()) s.original_predictions[sid] = p.get<PredictionRecord>();
  for (const auto& [name, r] : j.at("selections").items()) s.selections[name] = r;
  s.templates = j.at("templates").get<std::vector<FlipReport>>();
  s.created = j.value("created", "");
  s.updated = j.value("updated", "");
}

AnalysisService::AnalysisService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  fs::create_directories(cfg_.data_dir);
  for (const auto& entry : fs::directory_iterator(cfg_.data_dir)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    auto e = std::make_shared<Entry>();
    try {
      e->session = json::parse(in).get<AnalysisSession>();
    } catch (const std::exception& ex) {
      throw ValidationError("corrupt session file " + entry.path().string() + ": " + ex.what());
    }
    sessions_[e->session.id] = e;
  }
}

std::string AnalysisService::session_path(const std::string& id) const {
  return (fs::path(cfg_.data_dir) / (id + ".json")).string();
}

void AnalysisService::persist(const AnalysisSession& s) const {
  const std::string path = session_path(s.id);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << json(s).dump(1) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp);
  }
  // Atomic replace: a crash leaves either the old or the new document.
  fs::rename(tmp, path);
}

std::shared_ptr<AnalysisService::Entry> AnalysisService::find(const std::string& id) const {
  std::shared_lock lock(registry_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
  return it->second;
}

json AnalysisService::create_session(const json& body) {
  auto e = std::make_shared<Entry>();
  AnalysisSession& s = e->session;
  if (body.contains("conllu") && body["conllu"].is_string()) {
    std::istringstream in(body["conllu"].get<std::string>());
    s.dataset = parse_conllu(in);
    s.dataset_ref = "upload";
  } else if (body.contains("path") && body["path"].is_string()) {
    s.dataset_ref = body["path"].get<std::string>();
    s.dataset = parse_conllu_file(s.dataset_ref);
  } else if (body.contains("texts") && body["texts"].is_array()) {
    std::size_t n = 0;
    for (const json& t : body["texts"]) s.dataset.sentences.push_back(Sentence::from_text("s" + std::to_string(++n), t.get<std::string>()));
    s.dataset_ref = "upload";
  } else {
    throw ValidationError("session needs 'conllu', 'path' or 'texts'");
  }
  if (s.dataset.sentences.empty()) throw ValidationError("dataset has no sentences");
  s.created = s.updated = now_utc();

  std::unique_lock lock(registry_mutex_);
  if (body.contains("id")) {
    s.id = require_string(body, "id");
    if (s.id.empty() || s.id.find_first_of("/\\.") != std::string::npos) throw ValidationError("invalid session id");
    if (sessions_.count(s.id)) throw ValidationError("session '" + s.id + "' already exists");
  } else {
    std::size_t n = sessions_.size() + 1;
    do {
      char buf[32];
      std::snprintf(buf, sizeof buf, "session-%04zu", n++);
      s.id = buf;
    } while (sessions_.count(s.id));
  }
  persist(s);
  sessions_[s.id] = e;
  return {{"id", s.id}, {"sentences", s.dataset.sentences.size()}};
}

json AnalysisService::get_session(const std::string& id) const {
  auto e = find(id);
  std::shared_lock lock(e->mutex);
  return e->session;
}

std::vector<std::string> AnalysisService::list_sessions() const {
  std::shared_lock lock(registry_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, e] : sessions_) out.push_back(id);
  return out;
}

void AnalysisService::delete_session(const std::string& id) {
  std::unique_lock lock(registry_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
  std::unique_lock slock(it->second->mutex);
  fs::remove(session_path(id));
  sessions_.erase(it);
}

json AnalysisService::generate(const std::string& id, const json& body) {
  auto e = find(id);
  std::unique_lock lock(e->mutex);
  AnalysisSession& s = e->session;
  const std::string sid = require_string(body, "sentence_id");
  const Sentence& x = sentence_or_throw(s, sid);
  if (!cfg_.backends.generator) throw BackendError(BackendError::Kind::transport, "no generator backend configured");

  std::optional<std::vector<ControlCode>> codes;
  if (body.contains("codes") && !body["codes"].is_null()) {
    codes.emplace();
    for (const json& c : body["codes"]) codes->push_back(code_or_throw(c.get<std::string>()));
  }
  std::optional<std::vector<BlankSpec>> blanks;
  if (body.contains("blanks") && !body["blanks"].is_null()) {
    blanks.emplace();
    for (const json& b : body["blanks"]) {
      BlankSpec spec = b.get<BlankSpec>();
      validate_blank_spec(spec, x.size());
      blanks->push_back(std::move(spec));
    }
  }
  PipelineOptions opts = cfg_.pipeline;
  if (body.contains("seed")) {
    opts.seed = body["seed"].get<std::uint64_t>();
    opts.params.seed = opts.seed;
  }
  GenerationResult gen = generate_candidates(x, codes, blanks, cfg_.backends, opts);

  std::vector<Candidate> cands = std::move(gen.candidates);
  const bool filter = body.value("filter", true);
  if (filter && cfg_.backends.scorer) {
    std::vector<std::string> order;
    for (const Candidate& c : cands) order.push_back(c.id);
    FilterResult fr = fluency_filter(x, std::move(cands), *cfg_.backends.scorer, body.value("threshold", cfg_.fluency_threshold));
    std::map<std::string, Candidate> by_id;
    for (auto& c : fr.kept) by_id.emplace(c.id, std::move(c));
    for (auto& c : fr.rejected) by_id.emplace(c.id, std::move(c));
    cands.clear();
    for (const auto& cid : order) cands.push_back(std::move(by_id.at(cid)));
  } else {
    for (Candidate& c : cands) c.kept = true;
  }
  if (cfg_.backends.predictor) s.original_predictions[sid] = predict_candidates(x, cands, *cfg_.backends.predictor);
  s.candidates[sid] = cands;
  s.updated = now_utc();
  persist(s);
  return {{"sentence_id", sid}, {"candidates", cands}, {"errors", gen.errors}};
}

json AnalysisService::run_selection(const std::string& id, const json& body) {
  auto e = find(id);
  std::unique_lock lock(e->mutex);
  AnalysisSession& s = e->session;
  const std::string strategy = require_string(body, "strategy");
  const std::string sid = body.value("sentence_id", "");
  json result = {{"strategy", strategy}};

  auto kept_of = [&](const std::string& key) {
    std::vector<Candidate> out;
    auto it = s.candidates.find(key);
    if (it == s.candidates.end()) throw NotFoundError("no candidates for sentence '" + key + "'");
    for (const Candidate& c : it->second) {
      if (c.kept) out.push_back(c);
    }
    return out;
  };

  if (strategy == "diversity") {
    if (sid.empty()) throw ValidationError("diversity selection needs 'sentence_id'");
    const Sentence& x = sentence_or_throw(s, sid);
    const auto pool = kept_of(sid);
    DiversityWeights w;
    if (body.contains("weights")) {
      const json& jw = body["weights"];
      w.code = jw.value("code", w.code);
      w.removed = jw.value("removed", w.removed);
      w.added = jw.value("added", w.added);
    }
    std::vector<SelectionSignature> sigs;
    for (const Candidate& c : pool) sigs.push_back(signature_of(x, c));
    const auto picked = pool.empty() ? std::vector<std::size_t>{} : diversity_select(sigs, body.value("k", std::size_t{3}), w);
    json ids = json::array();
    for (std::size_t i : picked) ids.push_back(pool[i].id);
    result["sentence_id"] = sid;
    result["selected"] = ids;
  } else if (strategy == "surprise") {
    if (!body.contains("attribution") || !body["attribution"].is_array()) {
      throw ValidationError("surprise selection needs an attribution map");
    }
    if (sid.empty()) throw ValidationError("surprise selection needs 'sentence_id'");
    const Sentence& x = sentence_or_throw(s, sid);
    AttributionMap attr{body["attribution"].get<std::vector<double>>()};
    if (attr.weights.size() != x.size()) throw ValidationError("attribution length differs from sentence length");
    auto op = s.original_predictions.find(sid);
    if (op == s.original_predictions.end()) throw ValidationError("no prediction for sentence '" + sid + "'");
    const auto pool = kept_of(sid);
    SurpriseResult r = surprise_select(x, attr, op->second, pool);
    result["sentence_id"] = sid;
    result["surprise"] = r;
    result["pick_low"] = r.pick_low ? json(pool[*r.pick_low].id) : json(nullptr);
    result["pick_high"] = r.pick_high ? json(pool[*r.pick_high].id) : json(nullptr);
  } else if (strategy == "contrast") {
    std::vector<LabeledCandidate> items;
    for (const auto& [key, list] : s.candidates) {
      if (!sid.empty() && key != sid) continue;
      auto op = s.original_predictions.find(key);
      for (const Candidate& c : list) {
        if (!c.kept) continue;
        LabeledCandidate l{c.id, std::nullopt, std::nullopt};
        if (c.prediction) l.label = std::to_string(c.prediction->label);
        if (op != s.original_predictions.end()) l.original_label = std::to_string(op->second.label);
        items.push_back(std::move(l));
      }
    }
    ContrastPartition part = contrast_filter(items);
    json kept = json::array(), dropped = json::array();
    for (std::size_t i : part.kept) kept.push_back(items[i].id);
    for (std::size_t i : part.dropped) dropped.push_back(items[i].id);
    result["selected"] = kept;
    result["dropped"] = dropped;
  } else {
    throw ValidationError("unknown strategy '" + strategy + "'");
  }
  const std::string name = body.value("name", sid.empty() ? strategy : strategy + ":" + sid);
  result["name"] = name;
  s.selections[name] = result;
  s.updated = now_utc();
  persist(s);
  return result;
}

json AnalysisService::mine_templates(const std::string& id, const json& body) {
  auto e = find(id);
  std::unique_lock lock(e->mutex);
  AnalysisSession& s = e->session;
  std::set<std::string> slice;
  if (body.contains("sentence_ids")) slice = body["sentence_ids"].get<std::set<std::string>>();

  std::vector<TemplateSource> sources;
  PredictionPairs preds;
  for (const auto& [sid, list] : s.candidates) {
    if (!slice.empty() && !slice.count(sid)) continue;
    const Sentence& x = sentence_or_throw(s, sid);
    auto op = s.original_predictions.find(sid);
    for (const Candidate& c : list) {
      if (!c.kept) continue;
      sources.push_back({c.id, sid, candidate_perturbation(x, c)});
      if (op != s.original_predictions.end() && c.prediction) preds[c.id] = {op->second, *c.prediction};
    }
  }
  std::set<std::string> universe;
  for (const auto& src : sources) universe.insert(src.candidate_id);
  const auto rules = extract_templates(sources);
  const auto sel = select_templates(rules, universe, body.value("budget", 0.9));
  s.templates = flip_rates(sel.selected, preds);
  s.updated = now_utc();
  persist(s);
  return {{"templates", s.templates},
          {"uncovered", sel.uncovered},
          {"covered", sel.covered},
          {"universe", universe.size()},
          {"total_weight", sel.total_weight},
          {"tsv", templates_tsv(s.templates)}};
}

void AnalysisService::register_routes(httplib::Server& server) {
  using Handler = std::function<json(const httplib::Request&, httplib::Response&)>;
  auto wrap = [](Handler h) {
    return [h](const httplib::Request& req, httplib::Response& res) {
      json out;
      try {
        out = h(req, res);
      } catch (const NotFoundError& e) {
        res.status = 404;
        out = error_body("not_found", e.what());
      } catch (const BackendError& e) {
        res.status = e.kind() == BackendError::Kind::timeout ? 504 : 502;
        out = error_body("backend_unavailable", e.what(), {{"retryable", true}, {"attempts", e.attempts()}});
      } catch (const ValidationError& e) {
        res.status = 400;
        out = error_body("validation", e.what());
      } catch (const json::exception& e) {
        res.status = 400;
        out = error_body("validation", std::string("bad request body: ") + e.what());
      } catch (const std::exception& e) {
        res.status = 500;
        out = error_body("internal", e.what());
      }
      res.set_content(out.dump(), "application/json");
    };
  };
  auto body_of = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  };

  server.Get("/v1/health", wrap([this](const httplib::Request&, httplib::Response&) -> json {
               return {{"status", "ok"}, {"sessions", list_sessions().size()}};
             }));
  server.Get("/v1/sessions", wrap([this](const httplib::Request&, httplib::Response&) -> json {
               return {{"sessions", list_sessions()}};
             }));
  server.Post("/v1/sessions", wrap([this, body_of](const httplib::Request& req, httplib::Response& res) -> json {
                auto out = create_session(body_of(req));
                res.status = 201;
                return out;
              }));
  server.Get(R"(/v1/sessions/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response&) -> json {
               return get_session(req.matches[1]);
             }));
  server.Delete(R"(/v1/sessions/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response&) -> json {
                  delete_session(req.matches[1]);
                  return {{"deleted", std::string(req.matches[1])}};
                }));
  server.Post(R"(/v1/sessions/([^/]+)/generate)",
              wrap([this, body_of](const httplib::Request& req, httplib::Response&) -> json {
                return generate(req.matches[1], body_of(req));
              }));
  server.Post(R"(/v1/sessions/([^/]+)/selections)",
              wrap([this, body_of](const httplib::Request& req, httplib::Response&) -> json {
                return run_selection(req.matches[1], body_of(req));
              }));
  server.Post(R"(/v1/sessions/([^/]+)/templates)",
              wrap([this, body_of](const httplib::Request& req, httplib::Response&) -> json {
                return mine_templates(req.matches[1], body_of(req));
              }));
}

}  // namespace cfkit
