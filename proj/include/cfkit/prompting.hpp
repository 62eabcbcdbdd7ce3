#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cfkit/control_code.hpp"
#include "cfkit/corpus.hpp"
#include "cfkit/diff.hpp"

namespace cfkit {

inline constexpr std::string_view kPerturbToken = "<|perturb|>";
inline constexpr std::string_view kBlankToken = "[BLANK]";
inline constexpr std::string_view kAnswerToken = "[ANSWER]";
inline constexpr std::string_view kSepToken = "<|sep|>";
inline constexpr std::string_view kEndToken = "<|endoftext|>";

inline constexpr std::size_t kMaxBlanks = 3;

/// Up to three disjoint, surface-ordered token ranges of the original
/// sentence. An empty range marks an insertion point.
struct BlankSpec {
  std::vector<TokenRange> ranges;
  /// Set when every blanked token is punctuation.
  bool punctuation_only = false;

  friend bool operator==(const BlankSpec& a, const BlankSpec& b) { return a.ranges == b.ranges; }
};

/// Checks the BlankSpec invariants against a sentence of n tokens.
void validate_blank_spec(const BlankSpec& spec, std::size_t n);

enum class BlankMode { training, generation };

struct BlankOptions {
  /// Generation mode: distinct specs per sentence.
  std::size_t max_specs = 10;
  /// Allow blanks over non-projective subtrees (their surface hull is used).
  bool allow_nonprojective = false;
};

/// Training mode: the changed tokens, the covering subtrees, the merged
/// changes, and the whole sentence (deduplicated). Generation mode:
/// seeded-random placements of 1-3 blanks over dependency subtrees.
std::vector<BlankSpec> enumerate_blanks(const Sentence& s, const std::vector<EditSpan>* edits, BlankMode mode,
                                        std::uint64_t seed, const BlankOptions& opts = {});

struct Prompt {
  std::string original_text;
  std::optional<ControlCode> code;
  std::optional<std::string> blanked_template;
  std::optional<std::vector<std::string>> answers;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

std::string render_prompt(const Prompt& p);
Prompt parse_prompt(std::string_view wire);

std::size_t count_blanks(std::string_view templ);

/// Text of `s` with each blank range replaced by the blank marker.
std::string blank_template(const Sentence& s, const BlankSpec& spec);

/// Training prompt for the pair: the template is the revision with the
/// spans corresponding to `spec` blanked, and the answers are their text.
Prompt make_training_prompt(const Perturbation& p, const BlankSpec& spec, std::optional<ControlCode> code);

/// Raised by parse_generation. Carries the raw backend output.
class GenerationParseError : public std::runtime_error {
 public:
  GenerationParseError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw_output() const { return raw_; }

 private:
  std::string raw_;
};

/// Splits backend output on the answer separator and substitutes the fills
/// into the template's blanks left to right.
std::string parse_generation(std::string_view templ, std::string_view backend_output);

/// The fills of a backend output, in order.
std::vector<std::string> split_answers(std::string_view backend_output);

}  // namespace cfkit
