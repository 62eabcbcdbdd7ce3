#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cfkit/corpus.hpp"
#include "cfkit/error.hpp"
#include "cfkit/text.hpp"

namespace cfkit {

namespace {

constexpr std::string_view kSentIdPrefix = "# sent_id = ";
constexpr std::string_view kTextPrefix = "# text = ";
constexpr std::string_view kRevisionPrefix = "# revision_of = ";

struct PendingToken {
  Token token;
  std::size_t line;
};

bool misc_has_no_space(const std::string& misc) {
  for (const auto& item : text::split(misc, '|')) {
    if (item == "SpaceAfter=No") return true;
  }
  return false;
}

// Whitespace flags from the sentence text when the surfaces can be located in
// it left to right; otherwise from the SpaceAfter=No MISC attribute.
void assign_spacing(std::vector<Token>& toks, const std::string& sent_text) {
  if (!sent_text.empty()) {
    std::size_t pos = 0;
    std::vector<bool> flags;
    bool ok = true;
    for (const Token& t : toks) {
      std::size_t skip = pos;
      while (skip < sent_text.size() && sent_text[skip] == ' ') ++skip;
      if (sent_text.compare(skip, t.surface.size(), t.surface) != 0) {
        ok = false;
        break;
      }
      flags.push_back(skip > pos);
      pos = skip + t.surface.size();
    }
    if (ok && pos == sent_text.size()) {
      for (std::size_t i = 0; i < toks.size(); ++i) toks[i].space_before = i > 0 && flags[i];
      return;
    }
  }
  for (std::size_t i = 0; i < toks.size(); ++i) {
    toks[i].space_before = i > 0 && !misc_has_no_space(toks[i - 1].misc);
  }
}

int parse_index(const std::string& s, std::size_t line, const char* what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, std::string("malformed ") + what + " '" + s + "'");
  }
}

class BlockBuilder {
 public:
  explicit BlockBuilder(Dataset& ds) : ds_(ds) {}

  void comment(const std::string& raw) {
    if (text::starts_with(raw, kSentIdPrefix)) id_ = raw.substr(kSentIdPrefix.size());
    if (text::starts_with(raw, kTextPrefix)) text_ = raw.substr(kTextPrefix.size());
    if (text::starts_with(raw, kRevisionPrefix)) revision_of_ = raw.substr(kRevisionPrefix.size());
    extra_.push_back({tokens_.size(), raw});
  }

  void line(const std::string& raw, std::size_t lineno) {
    if (tokens_.empty() && extra_.empty()) start_line_ = lineno;
    auto cols = text::split(raw, '\t');
    if (cols.size() != 10) {
      throw ParseError(lineno, "expected 10 tab-separated fields, got " + std::to_string(cols.size()));
    }
    const std::string& id = cols[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) {
      extra_.push_back({tokens_.size(), raw});  // multiword range or empty node
      return;
    }
    int idx = parse_index(id, lineno, "token id");
    if (idx != static_cast<int>(tokens_.size()) + 1) {
      throw ParseError(lineno, "token id " + id + " out of sequence");
    }
    Token t;
    t.surface = cols[1];
    t.lemma = cols[2];
    t.upos = cols[3];
    t.xpos = cols[4];
    t.feats = cols[5];
    t.head = parse_index(cols[6], lineno, "head") - 1;
    t.deprel = cols[7];
    t.deps = cols[8];
    t.misc = cols[9];
    if (t.surface.empty()) throw ParseError(lineno, "empty FORM");
    tokens_.push_back({std::move(t), lineno});
  }

  void finish() {
    if (tokens_.empty() && extra_.empty()) return;
    if (tokens_.empty()) throw ParseError(start_line_, "sentence block without tokens");
    const auto n = static_cast<int>(tokens_.size());
    std::vector<Token> toks;
    std::size_t roots = 0;
    for (auto& p : tokens_) {
      if (p.token.head < kRootHead || p.token.head >= n) {
        throw ParseError(p.line, "head index " + std::to_string(p.token.head + 1) + " out of range");
      }
      if (p.token.head == kRootHead && ++roots > 1) throw ParseError(p.line, "multiple roots");
      toks.push_back(p.token);
    }
    // Cycle detection with line attribution before Sentence re-validates.
    for (std::size_t i = 0; i < toks.size(); ++i) {
      int cur = static_cast<int>(i);
      std::size_t steps = 0;
      while (cur != kRootHead) {
        if (cur == static_cast<int>(i) && steps > 0) {
          throw ParseError(tokens_[i].line, "cyclic head links");
        }
        cur = toks[cur].head;
        if (++steps > toks.size()) throw ParseError(tokens_[i].line, "cyclic head links");
      }
    }
    if (roots == 0) throw ParseError(start_line_, "no root token");

    std::string sid = id_.empty() ? "s" + std::to_string(ds_.sentences.size() + 1) : id_;
    assign_spacing(toks, text_);
    try {
      ds_.sentences.emplace_back(sid, text_, std::move(toks), true, std::move(extra_));
    } catch (const ValidationError& e) {
      throw ParseError(start_line_, e.what());
    }
    if (!revision_of_.empty()) ds_.pair_index[revision_of_].push_back(sid);
    reset();
  }

 private:
  void reset() {
    tokens_.clear();
    extra_.clear();
    id_.clear();
    text_.clear();
    revision_of_.clear();
  }

  Dataset& ds_;
  std::vector<PendingToken> tokens_;
  std::vector<Sentence::ExtraLine> extra_;
  std::string id_, text_, revision_of_;
  std::size_t start_line_ = 0;
};

}  // namespace

Dataset parse_conllu(std::istream& in) {
  Dataset ds;
  BlockBuilder block(ds);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (text::trim(raw).empty()) {
      block.finish();
    } else if (raw[0] == '#') {
      block.comment(raw);
    } else {
      block.line(raw, lineno);
    }
  }
  block.finish();

  std::set<std::string> seen;
  for (const Sentence& s : ds.sentences) {
    if (!seen.insert(s.id()).second) throw ValidationError("duplicate sentence id '" + s.id() + "'");
  }
  return ds;
}

Dataset parse_conllu_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return parse_conllu(in);
}

std::string to_conllu(const Sentence& s) {
  std::ostringstream out;
  const auto& extra = s.extra_lines();
  std::size_t e = 0;
  for (const Token& t : s.tokens()) {
    while (e < extra.size() && extra[e].before_token <= t.index) out << extra[e++].raw << '\n';
    out << t.index + 1 << '\t' << t.surface << '\t' << t.lemma << '\t' << t.upos << '\t' << t.xpos
        << '\t' << t.feats << '\t' << t.head + 1 << '\t' << t.deprel << '\t' << t.deps << '\t'
        << t.misc << '\n';
  }
  while (e < extra.size()) out << extra[e++].raw << '\n';
  out << '\n';
  return out.str();
}

void write_conllu(std::ostream& out, const Dataset& ds) {
  for (const Sentence& s : ds.sentences) out << to_conllu(s);
}

std::vector<SentencePair> parse_pairs_jsonl(std::istream& in) {
  std::vector<SentencePair> out;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (text::trim(raw).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    auto str_field = [&](const char* key) -> std::string {
      if (!j.contains(key) || !j[key].is_string()) throw ParseError(lineno, std::string("missing string field '") + key + "'");
      return j[key].get<std::string>();
    };
    auto opt_label = [&](const char* key) -> std::optional<std::string> {
      if (!j.contains(key) || j[key].is_null()) return std::nullopt;
      return j[key].is_string() ? j[key].get<std::string>() : j[key].dump();
    };
    SentencePair p;
    p.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "pair" + std::to_string(out.size() + 1);
    p.original = str_field("original");
    p.revised = str_field("revised");
    p.label_original = opt_label("label_original");
    p.label_revised = opt_label("label_revised");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace cfkit
