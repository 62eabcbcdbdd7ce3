#include "cfkit/jsonio.hpp"

#include <istream>
#include <ostream>

#include "cfkit/error.hpp"
#include "cfkit/text.hpp"

namespace cfkit {

namespace {

ControlCode code_from(const std::string& s) {
  auto c = parse_control_code(s);
  if (!c) throw ValidationError("unknown control code '" + s + "'");
  return *c;
}

}  // namespace

void to_json(json& j, const TokenRange& r) { j = json::array({r.begin, r.end}); }

void from_json(const json& j, TokenRange& r) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("range must be [begin, end]");
  r.begin = j.at(0).get<std::size_t>();
  r.end = j.at(1).get<std::size_t>();
  if (r.end < r.begin) throw ValidationError("range end before begin");
}

void to_json(json& j, const Sentence& s) {
  json toks = json::array();
  for (const Token& t : s.tokens()) {
    toks.push_back({{"form", t.surface}, {"lemma", t.lemma}, {"upos", t.upos}, {"xpos", t.xpos},
                    {"head", t.head}, {"deprel", t.deprel}, {"feats", t.feats}, {"deps", t.deps},
                    {"misc", t.misc}, {"space_before", t.space_before}});
  }
  json extra = json::array();
  for (const auto& e : s.extra_lines()) extra.push_back({{"before", e.before_token}, {"raw", e.raw}});
  j = {{"id", s.id()}, {"text", s.text()}, {"parsed", s.parsed()}, {"tokens", toks}, {"extra", extra}};
}

void from_json(const json& j, Sentence& s) {
  std::vector<Token> toks;
  for (const json& t : j.at("tokens")) {
    Token k;
    k.index = toks.size();
    k.surface = t.at("form").get<std::string>();
    k.lemma = t.value("lemma", "_");
    k.upos = t.value("upos", "_");
    k.xpos = t.value("xpos", "_");
    k.head = t.at("head").get<int>();
    k.deprel = t.value("deprel", "_");
    k.feats = t.value("feats", "_");
    k.deps = t.value("deps", "_");
    k.misc = t.value("misc", "_");
    k.space_before = t.value("space_before", false);
    toks.push_back(std::move(k));
  }
  std::vector<Sentence::ExtraLine> extra;
  if (j.contains("extra")) {
    for (const json& e : j.at("extra")) extra.push_back({e.at("before").get<std::size_t>(), e.at("raw").get<std::string>()});
  }
  s = Sentence(j.at("id").get<std::string>(), j.value("text", ""), std::move(toks), j.value("parsed", true),
               std::move(extra));
}

void to_json(json& j, const Prompt& p) {
  j = {{"original_text", p.original_text}};
  j["code"] = p.code ? json(std::string(to_string(*p.code))) : json(nullptr);
  j["template"] = p.blanked_template ? json(*p.blanked_template) : json(nullptr);
  j["answers"] = p.answers ? json(*p.answers) : json(nullptr);
}

void from_json(const json& j, Prompt& p) {
  p = Prompt{};
  p.original_text = j.at("original_text").get<std::string>();
  if (j.contains("code") && !j["code"].is_null()) p.code = code_from(j["code"].get<std::string>());
  if (j.contains("template") && !j["template"].is_null()) p.blanked_template = j["template"].get<std::string>();
  if (j.contains("answers") && !j["answers"].is_null()) p.answers = j["answers"].get<std::vector<std::string>>();
}

void to_json(json& j, const PredictionRecord& p) { j = {{"label", p.label}, {"probs", p.probs}}; }

void from_json(const json& j, PredictionRecord& p) {
  p.label = j.at("label").get<int>();
  p.probs = j.at("probs").get<std::vector<double>>();
}

void to_json(json& j, const Candidate& c) {
  j = json::object();
  j["id"] = c.id;
  j["original_id"] = c.original_id;
  j["revised_text"] = c.revised_text;
  j["code"] = std::string(to_string(c.code));
  j["fills"] = c.fills;
  j["prompt"] = c.prompt_used;
  j["prompt_index"] = c.prompt_index;
  j["beam_rank"] = c.beam_rank;
  j["fluency_delta_sentence"] = c.fluency_delta_sentence;
  j["fluency_delta_chunk"] = c.fluency_delta_chunk;
  j["prediction"] = c.prediction ? json(*c.prediction) : json(nullptr);
  j["kept"] = c.kept;
  j["undecided"] = c.undecided;
  j["revised"] = c.revised ? json(*c.revised) : json(nullptr);
}

void from_json(const json& j, Candidate& c) {
  c = Candidate{};
  c.id = j.at("id").get<std::string>();
  c.original_id = j.at("original_id").get<std::string>();
  c.revised_text = j.at("revised_text").get<std::string>();
  c.code = code_from(j.value("code", "global"));
  c.fills = j.value("fills", std::vector<std::string>{});
  if (j.contains("prompt")) c.prompt_used = j["prompt"].get<Prompt>();
  c.prompt_index = j.value("prompt_index", std::size_t{0});
  c.beam_rank = j.value("beam_rank", std::size_t{0});
  c.fluency_delta_sentence = j.value("fluency_delta_sentence", 0.0);
  c.fluency_delta_chunk = j.value("fluency_delta_chunk", 0.0);
  if (j.contains("prediction") && !j["prediction"].is_null()) c.prediction = j["prediction"].get<PredictionRecord>();
  c.kept = j.value("kept", false);
  c.undecided = j.value("undecided", false);
  if (j.contains("revised") && !j["revised"].is_null()) c.revised = j["revised"].get<Sentence>();
}

void to_json(json& j, const TemplateRule& t) {
  j = {{"before", t.before},
       {"after", t.after},
       {"granularity", std::string(to_string(t.level))},
       {"context_left", t.context_left},
       {"context_right", t.context_right},
       {"pattern", t.pattern()},
       {"covered", t.covered},
       {"originals", t.originals},
       {"sparsity_weight", t.sparsity_weight},
       {"weight", t.weight}};
}

void from_json(const json& j, TemplateRule& t) {
  t = TemplateRule{};
  t.before = j.at("before").get<std::vector<std::string>>();
  t.after = j.at("after").get<std::vector<std::string>>();
  const std::string g = j.at("granularity").get<std::string>();
  if (g == "text") t.level = Granularity::text;
  else if (g == "lemma") t.level = Granularity::lemma;
  else if (g == "xpos") t.level = Granularity::xpos;
  else if (g == "upos") t.level = Granularity::upos;
  else throw ValidationError("unknown granularity '" + g + "'");
  t.context_left = j.value("context_left", 0);
  t.context_right = j.value("context_right", 0);
  t.covered = j.at("covered").get<std::set<std::string>>();
  t.originals = j.at("originals").get<std::set<std::string>>();
  t.sparsity_weight = j.at("sparsity_weight").get<double>();
  t.weight = j.at("weight").get<double>();
}

void to_json(json& j, const FlipReport& f) {
  json to = json::object();
  for (const auto& [label, n] : f.to_labels) to[std::to_string(label)] = n;
  j = {{"template", f.rule},     {"from_label", f.from_label}, {"to_labels", to},
       {"flipped", f.flipped},   {"with_predictions", f.with_predictions},
       {"missing", f.missing},   {"flip_rate", f.flip_rate}};
}

void from_json(const json& j, FlipReport& f) {
  f = FlipReport{};
  f.rule = j.at("template").get<TemplateRule>();
  f.from_label = j.at("from_label").get<int>();
  for (const auto& [k, v] : j.at("to_labels").items()) f.to_labels[std::stoi(k)] = v.get<std::size_t>();
  f.flipped = j.at("flipped").get<std::size_t>();
  f.with_predictions = j.at("with_predictions").get<std::size_t>();
  f.missing = j.at("missing").get<std::size_t>();
  f.flip_rate = j.at("flip_rate").get<double>();
}

void to_json(json& j, const SurpriseResult& r) {
  json table = json::array();
  for (const auto& row : r.table) {
    table.push_back({{"attribution", row.attribution}, {"actual", row.actual}, {"gap", row.gap},
                     {"group_size", row.group_size}});
  }
  j = {{"t_low", r.t_low}, {"t_high", r.t_high}, {"table", table}};
  j["pick_low"] = r.pick_low ? json(*r.pick_low) : json(nullptr);
  j["pick_high"] = r.pick_high ? json(*r.pick_high) : json(nullptr);
}

void from_json(const json& j, SurpriseResult& r) {
  r = SurpriseResult{};
  r.t_low = j.at("t_low").get<std::size_t>();
  r.t_high = j.at("t_high").get<std::size_t>();
  if (!j.at("pick_low").is_null()) r.pick_low = j["pick_low"].get<std::size_t>();
  if (!j.at("pick_high").is_null()) r.pick_high = j["pick_high"].get<std::size_t>();
  for (const json& row : j.at("table")) {
    r.table.push_back({row.at("attribution").get<double>(), row.at("actual").get<double>(),
                       row.at("gap").get<double>(), row.at("group_size").get<std::size_t>()});
  }
}

void to_json(json& j, const IntrinsicReport& r) {
  json rows = json::array();
  for (const auto& s : r.per_sentence) {
    rows.push_back({{"id", s.id},
                    {"candidates", s.candidates},
                    {"self_bleu", s.self_bleu ? json(*s.self_bleu) : json(nullptr)},
                    {"levenshtein", s.mean_levenshtein},
                    {"tree_distance", s.mean_tree_distance}});
  }
  j = {{"self_bleu", r.self_bleu},
       {"levenshtein", r.mean_levenshtein},
       {"tree_distance", r.mean_tree_distance},
       {"per_sentence", rows}};
}

void to_json(json& j, const BlankSpec& b) { j = b.ranges; }

void from_json(const json& j, BlankSpec& b) {
  b = BlankSpec{};
  b.ranges = j.get<std::vector<TokenRange>>();
}

void write_candidates_jsonl(std::ostream& out, const std::vector<Candidate>& cands) {
  for (const Candidate& c : cands) out << json(c).dump() << '\n';
}

std::vector<json> read_jsonl(std::istream& in) {
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
  }
  return out;
}

std::vector<Candidate> read_candidates_jsonl(std::istream& in) {
  std::vector<Candidate> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line).get<Candidate>());
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("bad candidate: ") + e.what());
    } catch (const ValidationError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

}  // namespace cfkit
