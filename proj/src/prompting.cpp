#include "cfkit/prompting.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "cfkit/error.hpp"
#include "cfkit/text.hpp"

namespace cfkit {

namespace {

bool punct_only(const Sentence& s, const std::vector<TokenRange>& ranges) {
  bool any = false;
  for (const TokenRange& r : ranges) {
    for (std::size_t i = r.begin; i < r.end; ++i) {
      if (!text::is_punct(s[i].surface)) return false;
      any = true;
    }
  }
  return any;
}

std::size_t lowest_common_ancestor(const Sentence& s, std::size_t a, std::size_t b) {
  std::set<std::size_t> ancestors;
  for (int cur = static_cast<int>(a); cur != kRootHead; cur = s[cur].head) ancestors.insert(cur);
  for (int cur = static_cast<int>(b); cur != kRootHead; cur = s[cur].head) {
    if (ancestors.count(cur)) return static_cast<std::size_t>(cur);
  }
  return s.root();
}

// Contiguous range of the subtree rooted at `head`, or nullopt when the
// subtree is non-projective and that is not allowed.
std::optional<TokenRange> subtree_range(const Sentence& s, std::size_t head, bool allow_nonprojective) {
  auto idx = subtree_indices(s, head);
  if (!is_contiguous(idx) && !allow_nonprojective) return std::nullopt;
  return TokenRange{idx.front(), idx.back() + 1};
}

std::optional<TokenRange> covering_subtree(const Sentence& s, const EditSpan& e, bool allow_nonprojective) {
  std::size_t anchor;
  if (e.x.empty()) {
    if (s.empty()) return std::nullopt;
    std::size_t left = e.x.begin > 0 ? e.x.begin - 1 : 0;
    std::size_t right = std::min(e.x.begin, s.size() - 1);
    anchor = lowest_common_ancestor(s, left, right);
  } else {
    anchor = e.x.begin;
    for (std::size_t i = e.x.begin + 1; i < e.x.end; ++i) anchor = lowest_common_ancestor(s, anchor, i);
  }
  return subtree_range(s, anchor, allow_nonprojective);
}

bool touches(const TokenRange& a, const TokenRange& b) { return a.begin <= b.end && b.begin <= a.end; }

// Grows ranges until no edit span is split, then merges touching ranges.
std::vector<TokenRange> close_over_edits(std::vector<TokenRange> ranges, const std::vector<EditSpan>& edits) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (TokenRange& r : ranges) {
      for (const EditSpan& e : edits) {
        const bool overlap = e.x.empty() ? (e.x.begin > r.begin && e.x.begin < r.end)
                                         : (e.x.begin < r.end && r.begin < e.x.end);
        if (overlap && (e.x.begin < r.begin || e.x.end > r.end)) {
          r.begin = std::min(r.begin, e.x.begin);
          r.end = std::max(r.end, e.x.end);
          changed = true;
        }
      }
    }
    std::sort(ranges.begin(), ranges.end());
    std::vector<TokenRange> merged;
    for (const TokenRange& r : ranges) {
      if (!merged.empty() && touches(merged.back(), r)) {
        merged.back().end = std::max(merged.back().end, r.end);
        changed = changed || false;
      } else {
        merged.push_back(r);
      }
    }
    if (merged.size() != ranges.size()) changed = true;
    ranges = std::move(merged);
  }
  return ranges;
}

void push_unique(std::vector<BlankSpec>& out, const Sentence& s, std::vector<TokenRange> ranges) {
  if (ranges.empty() || ranges.size() > kMaxBlanks) return;
  BlankSpec spec{std::move(ranges), false};
  spec.punctuation_only = punct_only(s, spec.ranges);
  if (std::find(out.begin(), out.end(), spec) == out.end()) out.push_back(std::move(spec));
}

std::vector<BlankSpec> training_blanks(const Sentence& s, const std::vector<EditSpan>& edits, const BlankOptions& opts) {
  std::vector<BlankSpec> out;
  const TokenRange whole{0, s.size()};
  if (!edits.empty()) {
    std::vector<TokenRange> tokens_only;
    for (const EditSpan& e : edits) tokens_only.push_back(e.x);
    push_unique(out, s, close_over_edits(tokens_only, edits));

    std::vector<TokenRange> structures;
    bool ok = true;
    for (const EditSpan& e : edits) {
      auto r = covering_subtree(s, e, opts.allow_nonprojective);
      if (!r) {
        ok = false;
        break;
      }
      structures.push_back(*r);
    }
    if (ok) push_unique(out, s, close_over_edits(structures, edits));

    TokenRange hull{edits.front().x.begin, edits.back().x.end};
    for (const EditSpan& e : edits) {
      hull.begin = std::min(hull.begin, e.x.begin);
      hull.end = std::max(hull.end, e.x.end);
    }
    push_unique(out, s, {hull});
  }
  push_unique(out, s, {whole});
  return out;
}

std::vector<BlankSpec> generation_blanks(const Sentence& s, std::uint64_t seed, const BlankOptions& opts) {
  std::vector<BlankSpec> out;
  std::mt19937_64 rng(seed);
  auto draw = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const std::size_t attempts = std::max<std::size_t>(opts.max_specs * 20, 20);
  for (std::size_t a = 0; a < attempts && out.size() < opts.max_specs; ++a) {
    const std::size_t want = 1 + draw(kMaxBlanks);
    std::vector<TokenRange> ranges;
    for (std::size_t b = 0; b < want; ++b) {
      auto r = subtree_range(s, draw(s.size()), opts.allow_nonprojective);
      if (!r) continue;
      bool clash = std::any_of(ranges.begin(), ranges.end(), [&](const TokenRange& o) { return touches(o, *r); });
      if (!clash) ranges.push_back(*r);
    }
    if (ranges.empty()) continue;
    std::sort(ranges.begin(), ranges.end());
    push_unique(out, s, std::move(ranges));
  }
  return out;
}

// Character interval in `s` covered by token range r. Empty ranges anchor at
// the end of the preceding token.
std::pair<std::size_t, std::size_t> char_interval(const Sentence& s, const std::vector<std::size_t>& offsets,
                                                  TokenRange r) {
  if (!r.empty()) {
    return {offsets[r.begin], offsets[r.end - 1] + s[r.end - 1].surface.size()};
  }
  if (r.begin == 0) return {0, 0};
  std::size_t end = offsets[r.begin - 1] + s[r.begin - 1].surface.size();
  return {end, end};
}

std::string substitute(const std::string& text, const std::vector<std::pair<std::size_t, std::size_t>>& spans,
                       std::vector<std::string>* answers) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& [b, e] : spans) {
    out.append(text, pos, b - pos);
    // An empty span sits between tokens; keep the blank a separate word.
    const bool empty = b == e;
    if (empty && b > 0 && text[b - 1] != ' ') out += ' ';
    out += kBlankToken;
    if (empty && b == 0 && !text.empty()) out += ' ';
    if (answers) answers->push_back(text.substr(b, e - b));
    pos = e;
  }
  out.append(text, pos, std::string::npos);
  return out;
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace

void validate_blank_spec(const BlankSpec& spec, std::size_t n) {
  if (spec.ranges.empty()) throw ValidationError("blank spec has no ranges");
  if (spec.ranges.size() > kMaxBlanks) throw ValidationError("at most 3 blanks are allowed");
  for (std::size_t k = 0; k < spec.ranges.size(); ++k) {
    const TokenRange& r = spec.ranges[k];
    if (r.begin > r.end || r.end > n) throw ValidationError("blank range out of bounds");
    if (k > 0 && spec.ranges[k - 1].end > r.begin) throw ValidationError("blank ranges overlap or are unordered");
  }
}

std::vector<BlankSpec> enumerate_blanks(const Sentence& s, const std::vector<EditSpan>* edits, BlankMode mode,
                                        std::uint64_t seed, const BlankOptions& opts) {
  if (s.empty()) throw ValidationError("cannot place blanks on an empty sentence");
  if (mode == BlankMode::training) {
    if (!edits) throw ValidationError("training-mode blanks require edit spans");
    return training_blanks(s, *edits, opts);
  }
  return generation_blanks(s, seed, opts);
}

std::string render_prompt(const Prompt& p) {
  if (p.answers && !p.blanked_template) throw ValidationError("prompt has answers but no template");
  if (p.answers && count_blanks(*p.blanked_template) != p.answers->size()) {
    throw ValidationError("blank count does not match answer count");
  }
  std::string out = p.original_text;
  out += ' ';
  out += kPerturbToken;
  if (p.code) {
    out += " [";
    out += to_string(*p.code);
    out += ']';
  }
  if (p.blanked_template) {
    out += ' ';
    out += *p.blanked_template;
  }
  if (p.answers) {
    out += ' ';
    out += kSepToken;
    for (const std::string& a : *p.answers) {
      out += ' ';
      out += a;
      out += ' ';
      out += kAnswerToken;
    }
  }
  return out;
}

Prompt parse_prompt(std::string_view wire) {
  const std::string marker = std::string(" ") + std::string(kPerturbToken);
  const std::size_t at = wire.find(marker);
  if (at == std::string_view::npos) throw ValidationError("prompt lacks the perturb marker");
  Prompt p;
  p.original_text = std::string(wire.substr(0, at));
  std::string_view rest = wire.substr(at + marker.size());

  const std::string sep = std::string(" ") + std::string(kSepToken);
  std::optional<std::string_view> answer_part;
  if (auto s = rest.find(sep); s != std::string_view::npos) {
    answer_part = rest.substr(s + sep.size());
    rest = rest.substr(0, s);
  }
  if (text::starts_with(rest, " [")) {
    const std::size_t close = rest.find(']');
    if (close != std::string_view::npos) {
      if (auto code = parse_control_code(rest.substr(2, close - 2))) {
        p.code = code;
        rest = rest.substr(close + 1);
      }
    }
  }
  if (!rest.empty()) {
    if (rest[0] != ' ') throw ValidationError("malformed prompt after control code");
    p.blanked_template = std::string(rest.substr(1));
  }
  if (answer_part) {
    std::vector<std::string> answers;
    std::string_view a = *answer_part;
    const std::string delim = std::string(" ") + std::string(kAnswerToken);
    while (!a.empty()) {
      if (a[0] != ' ') throw ValidationError("malformed answer list");
      a.remove_prefix(1);
      const std::size_t end = a.find(delim);
      if (end == std::string_view::npos) throw ValidationError("answer without terminator");
      answers.emplace_back(a.substr(0, end));
      a.remove_prefix(end + delim.size());
    }
    if (!p.blanked_template) throw ValidationError("prompt has answers but no template");
    p.answers = std::move(answers);
  }
  return p;
}

std::size_t count_blanks(std::string_view templ) { return count_occurrences(templ, kBlankToken); }

std::string blank_template(const Sentence& s, const BlankSpec& spec) {
  validate_blank_spec(spec, s.size());
  const std::string text = s.detokenize();
  const auto offsets = s.char_offsets();
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const TokenRange& r : spec.ranges) spans.push_back(char_interval(s, offsets, r));
  return substitute(text, spans, nullptr);
}

Prompt make_training_prompt(const Perturbation& p, const BlankSpec& spec, std::optional<ControlCode> code) {
  validate_blank_spec(spec, p.original.size());
  auto lo = [&](std::size_t b) {
    long long off = 0;
    for (const EditSpan& e : p.edits) {
      if (e.x.end < b || (e.x.end == b && !e.x.empty())) off += static_cast<long long>(e.xhat.size()) - static_cast<long long>(e.x.size());
    }
    return static_cast<std::size_t>(static_cast<long long>(b) + off);
  };
  auto hi = [&](std::size_t b) {
    long long off = 0;
    for (const EditSpan& e : p.edits) {
      if (e.x.end <= b) off += static_cast<long long>(e.xhat.size()) - static_cast<long long>(e.x.size());
    }
    return static_cast<std::size_t>(static_cast<long long>(b) + off);
  };
  const Sentence& y = p.revised;
  const std::string text = y.detokenize();
  const auto offsets = y.char_offsets();
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const TokenRange& r : spec.ranges) spans.push_back(char_interval(y, offsets, TokenRange{lo(r.begin), hi(r.end)}));

  Prompt out;
  out.original_text = p.original.text();
  out.code = code;
  std::vector<std::string> answers;
  out.blanked_template = substitute(text, spans, &answers);
  out.answers = std::move(answers);
  return out;
}

std::vector<std::string> split_answers(std::string_view output) {
  std::string s = text::trim(output);
  if (auto end = s.find(kEndToken); end != std::string::npos) s = text::trim(s.substr(0, end));
  std::vector<std::string> fills;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t at = s.find(kAnswerToken, pos);
    if (at == std::string::npos) break;
    fills.push_back(text::trim(std::string_view(s).substr(pos, at - pos)));
    pos = at + kAnswerToken.size();
  }
  std::string tail = text::trim(std::string_view(s).substr(std::min(pos, s.size())));
  if (!tail.empty()) fills.push_back(tail);
  return fills;
}

std::string parse_generation(std::string_view templ, std::string_view output) {
  const std::size_t blanks = count_blanks(templ);
  const std::string trimmed = text::trim(output);
  if (trimmed.find(kPerturbToken) != std::string::npos || trimmed.find(kBlankToken) != std::string::npos) {
    throw GenerationParseError("backend output contains prompt markers", std::string(output));
  }
  if (blanks > 0 && trimmed.find(kAnswerToken) == std::string::npos) {
    throw GenerationParseError("backend output has no answer separator", std::string(output));
  }
  auto fills = split_answers(output);
  if (fills.size() != blanks) {
    throw GenerationParseError("expected " + std::to_string(blanks) + " fills, got " + std::to_string(fills.size()),
                               std::string(output));
  }
  std::string out;
  std::size_t pos = 0, k = 0;
  for (std::size_t at = templ.find(kBlankToken); at != std::string_view::npos; at = templ.find(kBlankToken, pos)) {
    out.append(templ.substr(pos, at - pos));
    const std::string& fill = fills[k++];
    // A dropped span takes its separating space with it ("fun [BLANK]." -> "fun.").
    if (fill.empty() && !out.empty() && out.back() == ' ') out.pop_back();
    out += fill;
    pos = at + kBlankToken.size();
  }
  out.append(templ.substr(pos));
  return text::trim(text::collapse_spaces(out));
}

}  // namespace cfkit
