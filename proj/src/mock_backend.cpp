#include "cfkit/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "cfkit/error.hpp"
#include "cfkit/prompting.hpp"
#include "cfkit/text.hpp"

namespace cfkit {

namespace {

// Relative counts per million words, rounded; enough to make common words
// cheaper than rare ones.
const std::map<std::string, double>& frequency_table() {
  static const std::map<std::string, double> table{
      {"the", 60000}, {",", 50000}, {".", 48000}, {"a", 25000},   {"of", 30000},   {"and", 28000},
      {"to", 26000},  {"in", 20000}, {"is", 12000}, {"it", 10000}, {"for", 9000},   {"that", 9000},
      {"was", 8000},  {"on", 7000},  {"are", 5000}, {"with", 6500}, {"by", 5000},   {"not", 4500},
      {"n't", 3000},  {"be", 6000},  {"this", 5000}, {"at", 4500},  {"from", 4000}, {"an", 3500},
      {"he", 5000},   {"she", 3000}, {"they", 3500}, {"we", 3000},  {"you", 4500},  {"i", 5000},
      {"his", 3500},  {"her", 3000}, {"their", 2500}, {"has", 3000}, {"have", 4000}, {"do", 3000},
      {"no", 2200},   {"never", 900}, {"all", 2800}, {"some", 1800}, {"many", 1200}, {"few", 500},
      {"more", 2000}, {"most", 1100}, {"only", 1500}, {"every", 600}, {"each", 700}, {"one", 3000},
      {"two", 1500},  {"three", 900}, {"four", 500}, {"five", 400},  {"man", 800},   {"woman", 600},
      {"men", 500},   {"women", 450}, {"dog", 300},  {"dogs", 150},  {"cat", 250},   {"cats", 120},
      {"kids", 200},  {"children", 400}, {"child", 300}, {"boy", 300}, {"girl", 300}, {"people", 1200},
      {"book", 350},  {"books", 200}, {"car", 400},  {"park", 250},  {"house", 500}, {"street", 300},
      {"ball", 150},  {"table", 200}, {"movie", 300}, {"film", 300}, {"game", 350},  {"friend", 300},
      {"great", 700}, {"good", 1200}, {"bad", 400},  {"terrible", 80}, {"little", 700}, {"big", 500},
      {"small", 500}, {"old", 700},  {"new", 1300}, {"young", 400}, {"happy", 250},  {"sad", 100},
      {"fun", 150},   {"nice", 250}, {"boring", 60}, {"awful", 50},  {"wonderful", 90}, {"beautiful", 150},
      {"reading", 120}, {"playing", 150}, {"running", 120}, {"eating", 90}, {"walking", 100}, {"sitting", 90},
      {"embraced", 10}, {"attacked", 40}, {"hugging", 12}, {"wrapped", 25}, {"blanket", 20}, {"chased", 15},
      {"read", 300},  {"play", 250}, {"run", 250},  {"eat", 150},   {"walk", 200},  {"see", 600},
      {"very", 1300}, {"really", 800}, {"quite", 400}, {"hardly", 60}, {"longer", 200}, {"being", 900},
      {"exactly", 120}, {"other", 1400}, {"friends", 250}, {"quickly", 100}, {"outside", 200},
      {"love", 500},  {"like", 1800}, {"enjoy", 150}, {"hate", 100}, {"best", 600}, {"worst", 100},
      {"excellent", 80}, {"horrible", 40}};
  return table;
}

double quantize(double v) { return std::round(v * 1024.0) / 1024.0; }

const std::map<std::string, double>& logprob_table() {
  static const std::map<std::string, double> table = [] {
    double total = 0.0;
    for (const auto& [w, c] : frequency_table()) total += c;
    std::map<std::string, double> out;
    for (const auto& [w, c] : frequency_table()) out[w] = quantize(std::log(c / total));
    return out;
  }();
  return table;
}

const std::vector<std::string> kNegators{"not", "never", "no longer", "hardly"};
const std::vector<std::string> kPluralQuantities{"two", "three", "some", "many", "few"};
const std::vector<std::string> kSingularQuantities{"every", "one", "each", "no"};
const std::vector<std::string> kIntensifiers{"really", "very", "quite"};
const std::set<std::string> kAuxiliaries{"is", "are", "was", "were", "am", "be", "can", "will", "would", "should",
                                         "could", "must", "do", "does", "did", "has", "have", "had"};
const std::vector<std::string> kAdjectives{"little", "big", "old", "young"};
const std::vector<std::string> kPhrases{"in the park", "with a friend", "very quickly", "at home"};
const std::vector<std::string> kFallbackWords{"other", "new", "good"};

const std::map<std::string, std::vector<std::string>>& antonyms() {
  static const std::map<std::string, std::vector<std::string>> table{
      {"great", {"terrible", "awful", "boring"}}, {"good", {"bad", "awful"}},      {"bad", {"good", "great"}},
      {"happy", {"sad"}},                          {"sad", {"happy"}},              {"big", {"small", "little"}},
      {"small", {"big"}},                          {"little", {"big"}},             {"old", {"young", "new"}},
      {"young", {"old"}},                          {"embraced", {"attacked", "chased"}},
      {"man", {"woman", "boy"}},                   {"woman", {"man", "girl"}},      {"dog", {"cat"}},
      {"cat", {"dog"}},                            {"kids", {"children", "adults"}}, {"children", {"kids", "adults"}},
      {"reading", {"writing", "eating"}},          {"playing", {"running", "sitting"}},
      {"love", {"hate"}},                          {"hate", {"love"}},              {"best", {"worst"}},
      {"fun", {"boring"}},                         {"boring", {"fun"}},             {"book", {"magazine", "letter"}}};
  return table;
}

const std::set<std::string> kDeterminers{"a", "an", "the", "one", "some", "this", "that"};
const std::set<std::string> kNumbers{"one", "two", "three", "four", "five", "six", "seven", "ten"};

const std::set<std::string> kPositive{"great", "good", "happy", "love", "wonderful", "fun", "best", "excellent",
                                      "nice", "enjoy", "like", "beautiful", "embraced", "hugging", "fantastic"};
const std::set<std::string> kNegative{"bad", "terrible", "awful", "sad", "hate", "worst", "boring",
                                      "attacked", "horrible", "poor"};
const std::set<std::string> kNegationWords{"not", "n't", "never", "no", "hardly", "nobody", "nothing"};

std::vector<std::string> words_of(const std::string& s) { return text::simple_tokenize(s); }

// Joins words, attaching punctuation and clitics to the word before.
std::string join_words(const std::vector<std::string>& w) {
  std::string out;
  for (const auto& word : w) {
    const bool attach = text::is_punct(word) || text::starts_with(word, "'") || word == "n't";
    if (!out.empty() && !attach) out += ' ';
    out += word;
  }
  return out;
}

// Texts of each blank, recovered by matching the template's literal segments
// against the original sentence.
std::vector<std::string> recover_blanks(const std::string& original, const std::string& templ) {
  std::vector<std::string> segments;
  std::size_t pos = 0;
  for (std::size_t at = templ.find(kBlankToken); at != std::string::npos; at = templ.find(kBlankToken, pos)) {
    segments.push_back(templ.substr(pos, at - pos));
    pos = at + kBlankToken.size();
  }
  segments.push_back(templ.substr(pos));

  std::vector<std::string> blanks;
  std::size_t cursor = segments[0].size();
  if (original.compare(0, segments[0].size(), segments[0]) != 0) cursor = 0;
  for (std::size_t k = 1; k < segments.size(); ++k) {
    const std::string& next = segments[k];
    std::size_t end;
    if (k + 1 == segments.size()) {
      end = original.size() >= next.size() && original.compare(original.size() - next.size(), next.size(), next) == 0
                ? original.size() - next.size()
                : original.size();
    } else {
      end = next.empty() ? cursor : original.find(next, cursor);
    }
    if (end == std::string::npos || end < cursor) end = cursor;
    blanks.push_back(text::trim(original.substr(cursor, end - cursor)));
    cursor = end + next.size();
  }
  return blanks;
}

bool has_word(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalpha(c); });
}

bool starts_with_determiner(const std::vector<std::string>& words) {
  return !words.empty() && (kDeterminers.count(text::casefold(words[0])) || kNumbers.count(text::casefold(words[0])));
}

struct BlankContext {
  std::string before;  // last word of the text preceding the blank
  bool at_start = false;
};

std::vector<BlankContext> blank_contexts(const std::string& templ) {
  std::vector<BlankContext> out;
  std::size_t pos = 0;
  for (std::size_t at = templ.find(kBlankToken); at != std::string::npos; at = templ.find(kBlankToken, pos)) {
    const auto words = words_of(templ.substr(0, at));
    out.push_back({words.empty() ? "" : text::casefold(words.back()), text::trim(templ.substr(0, at)).empty()});
    pos = at + kBlankToken.size();
  }
  return out;
}

bool is_aux(const std::string& w) { return kAuxiliaries.count(text::casefold(w)) > 0; }

bool is_modifier(const std::string& w) {
  const std::string f = text::casefold(w);
  return antonyms().count(f) || kPositive.count(f) || kNegative.count(f) ||
         std::find(kIntensifiers.begin(), kIntensifiers.end(), f) != kIntensifiers.end();
}

// Rewrites one blank (the first holding a word, else the first insertion
// point) according to `code`. When a rule has nothing sensible to do the
// blank is left alone, which makes the output a copy of x that the pipeline
// drops.
std::vector<std::string> rewrite(ControlCode code, const std::vector<std::string>& blanks,
                                 const std::vector<BlankContext>& ctx, std::size_t v) {
  std::vector<std::string> fills = blanks;
  std::size_t target = fills.size();
  for (std::size_t i = 0; i < fills.size() && target == fills.size(); ++i) {
    if (has_word(fills[i])) target = i;
  }
  for (std::size_t i = 0; i < fills.size() && target == fills.size(); ++i) {
    if (fills[i].empty() && !ctx[i].at_start) target = i;
  }
  if (target == fills.size()) return fills;
  std::string& fill = fills[target];
  const BlankContext& where = ctx[target];
  auto words = words_of(fill);
  auto pick = [&](const std::vector<std::string>& list) { return list[v % list.size()]; };
  const bool det_before = kDeterminers.count(where.before) > 0;

  switch (code) {
    case ControlCode::negation: {
      if (words.empty()) {
        if (is_aux(where.before)) fill = pick(kNegators);
      } else if (starts_with_determiner(words)) {
        words[0] = "no";
        fill = join_words(words);
      } else if (is_aux(words[0])) {
        words.insert(words.begin() + 1, pick(kNegators));
        fill = join_words(words);
      } else if (is_aux(where.before)) {
        fill = pick(kNegators) + " " + fill;
      }
      break;
    }
    case ControlCode::quantifier: {
      std::string noun;
      for (const auto& w : words) {
        if (has_word(w)) noun = w;
      }
      const bool plural = noun.size() > 1 && noun.back() == 's';
      if (words.size() >= 2 && starts_with_determiner(words)) {
        words[0] = pick(plural ? kPluralQuantities : kSingularQuantities);
        fill = join_words(words);
      }
      break;
    }
    case ControlCode::lexical: {
      for (auto& w : words) {
        auto it = antonyms().find(text::casefold(w));
        if (it != antonyms().end()) {
          w = it->second[v % it->second.size()];
          fill = join_words(words);
          break;
        }
      }
      break;
    }
    case ControlCode::resemantic:
    case ControlCode::global:
      if (words.size() >= 2 && !where.at_start) fill = pick(kPhrases);
      break;
    case ControlCode::insert: {
      if (words.empty()) {
        if (det_before) fill = pick(kAdjectives);
        else if (is_aux(where.before)) fill = pick(kIntensifiers);
      } else if (words.size() >= 2 && starts_with_determiner(words) && has_word(words[1])) {
        std::string adj = pick(kAdjectives);
        if (text::casefold(words[1]) == adj) adj = kAdjectives[(v + 1) % kAdjectives.size()];
        words.insert(words.begin() + 1, adj);
        fill = join_words(words);
      } else if (words.size() == 1 && is_modifier(words[0])) {
        fill = pick(kIntensifiers) + " " + fill;
      }
      break;
    }
    case ControlCode::remove:
      if (words.size() >= 3 && words.size() <= 4 && starts_with_determiner(words) && has_word(words.back())) {
        fill = join_words({words.front(), words.back()});
      } else if (!where.at_start && words.size() >= 2 && !is_aux(words[0])) {
        fill = "";
      } else if (words.size() == 1 && is_modifier(words[0])) {
        fill = "";
      }
      break;
    case ControlCode::restructure:
      if (is_aux(where.before) && !words.empty() && text::casefold(words[0]).ends_with("ed")) fill = "being " + fill;
      break;
    case ControlCode::shuffle: {
      // Swap two noun-phrase-like blanks; anything else stays as it is.
      std::vector<std::size_t> phrases;
      for (std::size_t i = 0; i < fills.size(); ++i) {
        const auto w = words_of(fills[i]);
        if (w.size() >= 2 && starts_with_determiner(w)) phrases.push_back(i);
      }
      if (phrases.size() >= 2) std::swap(fills[phrases[0]], fills[phrases[1 + v % (phrases.size() - 1)]]);
      break;
    }
  }
  return fills;
}

// Keeps sentence-initial capitalization with the first position.
void fix_case(std::vector<std::string>& fills, const std::vector<std::string>& blanks, const std::string& templ) {
  if (fills.empty() || templ.rfind(kBlankToken, 0) != 0) return;
  const std::string& was = blanks[0];
  std::string& now = fills[0];
  if (was.empty() || now.empty() || !std::isupper(static_cast<unsigned char>(was[0]))) return;
  now[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(now[0])));
  for (std::size_t i = 1; i < fills.size(); ++i) {
    std::string& f = fills[i];
    if (f.size() > 1 && f.compare(0, was.size(), was) == 0 && std::isupper(static_cast<unsigned char>(f[0]))) {
      f[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(f[0])));
    }
  }
}

std::string to_output(const std::vector<std::string>& fills) {
  std::string out;
  for (std::size_t i = 0; i < fills.size(); ++i) {
    if (i) out += ' ';
    if (!fills[i].empty()) {
      out += fills[i];
      out += ' ';
    }
    out += kAnswerToken;
  }
  return out;
}

double prob_quantize(double p) { return std::round(p * 1048576.0) / 1048576.0; }

}  // namespace

double MockBackend::unigram_logprob(const std::string& token) {
  const auto& table = logprob_table();
  auto it = table.find(text::casefold(token));
  return it == table.end() ? kUnknownLogprob : it->second;
}

std::vector<std::string> MockBackend::generate(const std::string& wire, const GenerationParams& params) {
  params.validate();
  Prompt prompt = parse_prompt(wire);
  const std::string templ = prompt.blanked_template.value_or(std::string(kBlankToken));
  const auto blanks = recover_blanks(prompt.original_text, templ);
  const auto contexts = blank_contexts(templ);
  const std::size_t width = params.strategy == GenerationParams::Strategy::beam ? params.beam_width : params.num_return;

  std::mt19937_64 rng(params.seed);
  std::vector<std::string> outputs;
  for (std::size_t rank = 0; rank < width && outputs.size() < params.num_return; ++rank) {
    std::size_t variant = params.strategy == GenerationParams::Strategy::beam
                              ? rank + static_cast<std::size_t>(params.seed % 7)
                              : static_cast<std::size_t>(rng() % 97);
    const ControlCode code = prompt.code.value_or(kPerturbationCodes[variant % kPerturbationCodes.size()]);
    auto fills = rewrite(code, blanks, contexts, variant);
    fix_case(fills, blanks, templ);
    std::string out = to_output(fills);
    if (std::find(outputs.begin(), outputs.end(), out) == outputs.end()) outputs.push_back(std::move(out));
  }
  return outputs;
}

std::vector<FluencyScore> MockBackend::score(const std::vector<std::string>& texts) {
  std::vector<FluencyScore> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) {
    FluencyScore s;
    for (const std::string& tok : text::simple_tokenize(t)) {
      const double lp = unigram_logprob(tok);
      s.token_logprobs.emplace_back(tok, lp);
      s.total += lp;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<PredictionRecord> MockBackend::predict(const std::vector<TaskInput>& inputs) {
  std::vector<PredictionRecord> out;
  out.reserve(inputs.size());
  for (const TaskInput& in : inputs) {
    if (in.shape() != shape_) throw ValidationError("task input shape does not match the configured task");
    if (shape_ == TaskShape::single) {
      auto toks = text::simple_tokenize(text::casefold(in.text));
      double score = 0.0;
      for (std::size_t i = 0; i < toks.size(); ++i) {
        double polarity = kPositive.count(toks[i]) ? 1.0 : kNegative.count(toks[i]) ? -1.0 : 0.0;
        if (polarity == 0.0) continue;
        for (std::size_t back = 1; back <= 3 && back <= i; ++back) {
          if (kNegationWords.count(toks[i - back])) {
            polarity = -polarity;
            break;
          }
        }
        score += polarity;
      }
      const double p_pos = prob_quantize(1.0 / (1.0 + std::exp(-2.0 * score)));
      out.push_back(make_prediction({1.0 - p_pos, p_pos}));
    } else {
      auto premise = text::simple_tokenize(text::casefold(in.text));
      auto hyp = text::simple_tokenize(text::casefold(*in.second));
      std::set<std::string> prem_set(premise.begin(), premise.end());
      bool hyp_neg = false, prem_neg = false, covered = true;
      for (const auto& w : premise) prem_neg = prem_neg || kNegationWords.count(w);
      for (const auto& w : hyp) {
        hyp_neg = hyp_neg || kNegationWords.count(w);
        if (!text::is_punct(w) && !prem_set.count(w)) covered = false;
      }
      // classes: 0 entailment, 1 neutral, 2 contradiction
      if (hyp_neg != prem_neg) {
        out.push_back(make_prediction({0.125, 0.25, 0.625}));
      } else if (covered) {
        out.push_back(make_prediction({0.75, 0.125, 0.125}));
      } else {
        out.push_back(make_prediction({0.25, 0.5, 0.25}));
      }
    }
  }
  return out;
}

Backends make_mock_backends(TaskShape shape) {
  auto mock = std::make_shared<MockBackend>(shape);
  return Backends{mock, mock, mock, 8};
}

}  // namespace cfkit
