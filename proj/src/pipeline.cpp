#include "cfkit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <thread>

#include "cfkit/error.hpp"
#include "cfkit/text.hpp"

namespace cfkit {

namespace {

struct Tags {
  const char* upos;
  const char* xpos;
  const char* deprel;
};

// Closed-class words plus the vocabulary the mock generator emits.
const std::map<std::string, Tags>& tag_lexicon() {
  static const std::map<std::string, Tags> lex{
      {"not", {"PART", "RB", "advmod"}},    {"n't", {"PART", "RB", "advmod"}},   {"never", {"ADV", "RB", "advmod"}},
      {"hardly", {"ADV", "RB", "advmod"}},  {"longer", {"ADV", "RBR", "advmod"}}, {"no", {"DET", "DT", "det"}},
      {"a", {"DET", "DT", "det"}},          {"an", {"DET", "DT", "det"}},         {"the", {"DET", "DT", "det"}},
      {"some", {"DET", "DT", "det"}},       {"many", {"ADJ", "JJ", "amod"}},      {"few", {"ADJ", "JJ", "amod"}},
      {"one", {"NUM", "CD", "nummod"}},     {"two", {"NUM", "CD", "nummod"}},     {"three", {"NUM", "CD", "nummod"}},
      {"four", {"NUM", "CD", "nummod"}},    {"five", {"NUM", "CD", "nummod"}},    {"in", {"ADP", "IN", "case"}},
      {"at", {"ADP", "IN", "case"}},        {"with", {"ADP", "IN", "case"}},      {"by", {"ADP", "IN", "case"}},
      {"for", {"ADP", "IN", "case"}},       {"very", {"ADV", "RB", "advmod"}},    {"quickly", {"ADV", "RB", "advmod"}},
      {"being", {"AUX", "VBG", "aux"}},     {"little", {"ADJ", "JJ", "amod"}},    {"big", {"ADJ", "JJ", "amod"}},
      {"old", {"ADJ", "JJ", "amod"}},       {"young", {"ADJ", "JJ", "amod"}},     {"terrible", {"ADJ", "JJ", "amod"}},
      {"awful", {"ADJ", "JJ", "amod"}},     {"boring", {"ADJ", "JJ", "amod"}},    {"bad", {"ADJ", "JJ", "amod"}},
      {"good", {"ADJ", "JJ", "amod"}},      {"great", {"ADJ", "JJ", "amod"}},     {"sad", {"ADJ", "JJ", "amod"}},
      {"happy", {"ADJ", "JJ", "amod"}},     {"small", {"ADJ", "JJ", "amod"}},     {"new", {"ADJ", "JJ", "amod"}},
      {"other", {"ADJ", "JJ", "amod"}},     {"fun", {"ADJ", "JJ", "amod"}},       {"park", {"NOUN", "NN", "obl"}},
      {"friend", {"NOUN", "NN", "obl"}},    {"home", {"NOUN", "NN", "obl"}},      {"adults", {"NOUN", "NNS", "obl"}},
      {"children", {"NOUN", "NNS", "obl"}}, {"kids", {"NOUN", "NNS", "obl"}},     {"man", {"NOUN", "NN", "nsubj"}},
      {"woman", {"NOUN", "NN", "nsubj"}},   {"boy", {"NOUN", "NN", "nsubj"}},     {"girl", {"NOUN", "NN", "nsubj"}},
      {"dog", {"NOUN", "NN", "nsubj"}},     {"cat", {"NOUN", "NN", "nsubj"}},     {"magazine", {"NOUN", "NN", "obj"}},
      {"letter", {"NOUN", "NN", "obj"}},    {"attacked", {"VERB", "VBN", "root"}}, {"chased", {"VERB", "VBN", "root"}},
      {"writing", {"VERB", "VBG", "root"}}, {"eating", {"VERB", "VBG", "root"}},  {"running", {"VERB", "VBG", "root"}},
      {"sitting", {"VERB", "VBG", "root"}}, {"hate", {"VERB", "VBP", "root"}},    {"love", {"VERB", "VBP", "root"}},
      {"worst", {"ADJ", "JJS", "amod"}},    {"best", {"ADJ", "JJS", "amod"}}};
  return lex;
}

Token fill_token(const std::string& word, const Sentence& x, TokenRange r, std::size_t pos_in_fill,
                 std::vector<bool>& used) {
  Token t;
  t.surface = word;
  const std::string folded = text::casefold(word);
  for (std::size_t i = r.begin; i < r.end; ++i) {
    if (!used[i - r.begin] && text::casefold(x[i].surface) == folded) {
      used[i - r.begin] = true;
      t = x[i];
      t.surface = word;
      return t;
    }
  }
  t.lemma = folded;
  if (auto it = tag_lexicon().find(folded); it != tag_lexicon().end()) {
    t.upos = it->second.upos;
    t.xpos = it->second.xpos;
    t.deprel = it->second.deprel;
  } else if (text::is_punct(word)) {
    t.upos = "PUNCT";
    t.xpos = word;
    t.deprel = "punct";
  } else if (r.begin + pos_in_fill < r.end) {
    const Token& same = x[r.begin + pos_in_fill];
    t.upos = same.upos;
    t.xpos = same.xpos;
    t.deprel = same.deprel;
  } else {
    t.upos = "X";
    t.xpos = "_";
    t.deprel = "dep";
  }
  return t;
}

void locate_spacing(std::vector<Token>& toks, const std::string& text) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::size_t found = text.find(toks[i].surface, pos);
    if (found == std::string::npos) found = pos;
    toks[i].space_before = i > 0 && found > pos;
    pos = found + toks[i].surface.size();
  }
}

std::string normalize_ws(const std::string& s) { return text::collapse_spaces(s); }

}  // namespace

Sentence project_revision(const Sentence& x, const BlankSpec& spec, const std::vector<std::string>& fills,
                          const std::string& revised_text, const std::string& id) {
  validate_blank_spec(spec, x.size());
  if (fills.size() != spec.ranges.size()) throw ValidationError("fill count does not match blank count");

  constexpr int kUnset = -2;
  std::vector<Token> out;
  std::vector<int> old_to_new(x.size(), kUnset);
  // Per blank: new index of the token that takes over the blanked subtree's role.
  std::vector<int> blank_root_new(spec.ranges.size(), kUnset);
  std::vector<int> blank_ext_head(spec.ranges.size(), kRootHead);
  std::vector<int> blank_of_old(x.size(), -1);
  std::vector<std::vector<std::size_t>> fill_members(spec.ranges.size());

  std::size_t pos = 0;
  for (std::size_t k = 0; k <= spec.ranges.size(); ++k) {
    const std::size_t stop = k < spec.ranges.size() ? spec.ranges[k].begin : x.size();
    for (; pos < stop; ++pos) {
      old_to_new[pos] = static_cast<int>(out.size());
      out.push_back(x[pos]);
    }
    if (k == spec.ranges.size()) break;
    const TokenRange r = spec.ranges[k];
    std::size_t range_root = r.begin;
    bool found_root = false;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      blank_of_old[i] = static_cast<int>(k);
      if (!found_root && (x[i].is_root() || !r.contains(static_cast<std::size_t>(x[i].head)))) {
        range_root = i;
        found_root = true;
      }
    }
    if (!r.empty()) blank_ext_head[k] = x[range_root].head;
    else if (r.begin < x.size()) blank_ext_head[k] = static_cast<int>(r.begin);  // attach insertions to the next token
    else if (!x.empty()) blank_ext_head[k] = static_cast<int>(x.size() - 1);

    std::vector<bool> used(r.size(), false);
    auto words = text::simple_tokenize(fills[k]);
    for (std::size_t w = 0; w < words.size(); ++w) {
      Token t = fill_token(words[w], x, r, w, used);
      const bool is_range_root = !r.empty() && found_root && t.surface == x[range_root].surface && t.head == x[range_root].head;
      if (is_range_root && blank_root_new[k] == kUnset) blank_root_new[k] = static_cast<int>(out.size());
      fill_members[k].push_back(out.size());
      out.push_back(std::move(t));
    }
    if (blank_root_new[k] == kUnset && !fill_members[k].empty()) {
      // Prefer a content word as the head of the fill.
      std::size_t pick = fill_members[k].front();
      for (std::size_t m : fill_members[k]) {
        const std::string& u = out[m].upos;
        if (u == "NOUN" || u == "VERB" || u == "ADJ" || u == "PROPN" || u == "PRON") {
          pick = m;
          break;
        }
      }
      blank_root_new[k] = static_cast<int>(pick);
    }
    pos = r.end;
  }

  // Resolves an original head index to the new sentence.
  auto resolve_old = [&](int old_head) -> int {
    for (std::size_t guard = 0; guard <= x.size(); ++guard) {
      if (old_head == kRootHead) return kRootHead;
      if (old_to_new[old_head] != kUnset) return old_to_new[old_head];
      const int k = blank_of_old[old_head];
      if (blank_root_new[k] != kUnset) return blank_root_new[k];
      old_head = blank_ext_head[k];
    }
    return kRootHead;
  };

  // Heads for kept tokens.
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (old_to_new[i] == kUnset) continue;
    out[old_to_new[i]].head = resolve_old(x[i].head);
  }
  // Heads for fill tokens.
  for (std::size_t k = 0; k < spec.ranges.size(); ++k) {
    for (std::size_t m : fill_members[k]) {
      if (static_cast<int>(m) == blank_root_new[k]) {
        out[m].head = resolve_old(blank_ext_head[k]);
        if (!spec.ranges[k].empty()) {
          std::size_t rr = spec.ranges[k].begin;
          for (std::size_t i = spec.ranges[k].begin; i < spec.ranges[k].end; ++i) {
            if (x[i].is_root() || !spec.ranges[k].contains(static_cast<std::size_t>(x[i].head))) {
              rr = i;
              break;
            }
          }
          out[m].deprel = x[rr].deprel;
        }
      } else {
        out[m].head = blank_root_new[k];
      }
    }
  }

  // Exactly one root, no self loops: demote extra roots under the first one.
  int root = -1;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].head == static_cast<int>(i)) out[i].head = kRootHead;
    if (out[i].head == kRootHead) {
      if (root < 0) {
        root = static_cast<int>(i);
        out[i].deprel = "root";
      } else {
        out[i].head = root;
        if (out[i].deprel == "root") out[i].deprel = "dep";
      }
    }
  }
  if (root < 0 && !out.empty()) {
    out[0].head = kRootHead;
    out[0].deprel = "root";
  }
  // Break any cycle introduced by re-attachment.
  for (std::size_t i = 0; i < out.size(); ++i) {
    int cur = static_cast<int>(i);
    for (std::size_t steps = 0; cur != kRootHead; ++steps) {
      if (steps > out.size()) {
        out[i].head = root >= 0 ? root : 0;
        break;
      }
      cur = out[cur].head;
    }
  }
  locate_spacing(out, revised_text);
  return Sentence(id, revised_text, std::move(out), x.parsed());
}

GenerationResult generate_candidates(const Sentence& x, const std::optional<std::vector<ControlCode>>& codes,
                                     const std::optional<std::vector<BlankSpec>>& blanks, const Backends& backends,
                                     const PipelineOptions& opts) {
  if (!backends.generator) throw ValidationError("no generation backend configured");
  opts.params.validate();
  const std::vector<ControlCode> code_list =
      codes ? *codes : std::vector<ControlCode>(kPerturbationCodes.begin(), kPerturbationCodes.end());
  const std::vector<BlankSpec> specs = blanks ? *blanks : enumerate_blanks(x, nullptr, BlankMode::generation, opts.seed, opts.blanks);

  struct Job {
    Prompt prompt;
    std::string wire;
    const BlankSpec* spec;
  };
  std::vector<Job> jobs;
  for (ControlCode code : code_list) {
    for (const BlankSpec& spec : specs) {
      Prompt p;
      p.original_text = x.text();
      p.code = code;
      p.blanked_template = blank_template(x, spec);
      std::string wire = render_prompt(p);
      jobs.push_back({std::move(p), std::move(wire), &spec});
    }
  }

  struct Outcome {
    std::vector<std::string> outputs;
    std::optional<std::string> error;
  };
  std::vector<Outcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        outcomes[i].outputs = backends.generator->generate(jobs[i].wire, opts.params);
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  const std::size_t n_workers = std::min<std::size_t>(std::max<std::size_t>(backends.max_in_flight, 1), jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  if (n_workers > 0) worker();
  for (auto& t : pool) t.join();

  GenerationResult result;
  std::set<std::string> seen{normalize_ws(x.text())};
  std::size_t failed = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (outcomes[i].error) {
      ++failed;
      result.errors.push_back("prompt " + std::to_string(i) + ": " + *outcomes[i].error);
      continue;
    }
    const Job& job = jobs[i];
    for (std::size_t rank = 0; rank < outcomes[i].outputs.size(); ++rank) {
      const std::string& raw = outcomes[i].outputs[rank];
      std::string revised_text;
      try {
        revised_text = parse_generation(*job.prompt.blanked_template, raw);
      } catch (const GenerationParseError& e) {
        result.errors.push_back("prompt " + std::to_string(i) + " beam " + std::to_string(rank) + ": " + e.what());
        continue;
      }
      if (!seen.insert(normalize_ws(revised_text)).second) continue;

      Candidate c;
      c.original_id = x.id();
      c.id = x.id() + "#" + std::to_string(result.candidates.size());
      c.revised_text = revised_text;
      c.prompt_used = job.prompt;
      c.prompt_index = i;
      c.beam_rank = rank;
      c.fills = split_answers(raw);
      try {
        c.revised = project_revision(x, *job.spec, c.fills, revised_text, c.id);
      } catch (const ValidationError&) {
        c.revised = Sentence::from_text(c.id, revised_text);
      }
      const Perturbation pert = make_perturbation(x, *c.revised);
      // Case-only rewrites align to nothing; they are copies of x.
      if (pert.edits.empty()) continue;
      c.code = primary_code(pert, opts.classifier);
      result.candidates.push_back(std::move(c));
    }
  }
  if (!jobs.empty() && failed == jobs.size()) {
    throw BackendError(BackendError::Kind::transport,
                       "all " + std::to_string(jobs.size()) + " prompts failed; first error: " + result.errors.front());
  }
  return result;
}

std::vector<double> word_logprobs(const Sentence& s, const FluencyScore& score) {
  const std::string text = s.detokenize();
  const auto offsets = s.char_offsets();
  std::vector<double> out(s.size(), 0.0);
  std::size_t pos = 0;
  for (const auto& [raw_piece, lp] : score.token_logprobs) {
    std::string piece = raw_piece;
    // Byte-level BPE / sentencepiece word-boundary markers.
    for (const std::string marker : {"\xC4\xA0", "\xE2\x96\x81"}) {
      if (text::starts_with(piece, marker)) piece = piece.substr(marker.size());
    }
    piece = text::trim(piece);
    if (piece.empty()) continue;
    const std::size_t at = text.find(piece, pos);
    if (at == std::string::npos) continue;
    pos = at + piece.size();
    auto it = std::upper_bound(offsets.begin(), offsets.end(), at);
    if (it == offsets.begin()) continue;
    out[static_cast<std::size_t>(std::distance(offsets.begin(), it) - 1)] += lp;
  }
  return out;
}

bool passes_fluency(double delta_sentence, double delta_chunk, double threshold) {
  return !(std::min(delta_sentence, delta_chunk) < -threshold);
}

Perturbation candidate_perturbation(const Sentence& x, const Candidate& c) {
  Sentence rev = c.revised ? *c.revised : Sentence::from_text(c.id, c.revised_text);
  return make_perturbation(x, std::move(rev));
}

FilterResult fluency_filter(const Sentence& x, std::vector<Candidate> cands, Scorer& scorer, double threshold) {
  FilterResult result;
  std::vector<std::string> texts{x.detokenize()};
  for (const Candidate& c : cands) texts.push_back(c.revised ? c.revised->detokenize() : c.revised_text);

  std::vector<FluencyScore> scores;
  try {
    scores = scorer.score(texts);
    if (scores.size() != texts.size()) throw BackendError(BackendError::Kind::protocol, "score count mismatch");
  } catch (const std::exception&) {
    for (Candidate& c : cands) {
      c.kept = false;
      c.undecided = true;
      result.rejected.push_back(std::move(c));
    }
    return result;
  }

  const auto x_words = word_logprobs(x, scores[0]);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    Candidate& c = cands[i];
    const Perturbation p = candidate_perturbation(x, c);
    const auto y_words = word_logprobs(p.revised, scores[i + 1]);
    double chunk_x = 0.0, chunk_y = 0.0;
    for (const EditSpan& e : p.edits) {
      for (std::size_t k = e.x.begin; k < e.x.end; ++k) chunk_x += x_words[k];
      for (std::size_t k = e.xhat.begin; k < e.xhat.end; ++k) chunk_y += y_words[k];
    }
    c.fluency_delta_sentence = scores[i + 1].total - scores[0].total;
    c.fluency_delta_chunk = chunk_y - chunk_x;
    c.undecided = false;
    c.kept = passes_fluency(c.fluency_delta_sentence, c.fluency_delta_chunk, threshold);
    (c.kept ? result.kept : result.rejected).push_back(std::move(c));
  }
  return result;
}

}  // namespace cfkit

namespace cfkit {

PredictionRecord predict_candidates(const Sentence& x, std::vector<Candidate>& cands, Predictor& predictor) {
  std::vector<TaskInput> inputs{{x.text(), std::nullopt}};
  for (const Candidate& c : cands) inputs.push_back({c.revised_text, std::nullopt});
  auto preds = predictor.predict(inputs);
  if (preds.size() != inputs.size()) {
    throw BackendError(BackendError::Kind::protocol, "predictor returned " + std::to_string(preds.size()) +
                                                         " records for " + std::to_string(inputs.size()) + " inputs");
  }
  for (std::size_t i = 0; i < cands.size(); ++i) cands[i].prediction = preds[i + 1];
  return preds[0];
}

}  // namespace cfkit
