#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cfkit/backends.hpp"
#include "cfkit/ctrlcode.hpp"
#include "cfkit/prompting.hpp"

namespace cfkit {

struct Candidate {
  std::string id;
  std::string original_id;
  std::string revised_text;
  /// Annotated revision; projected from the original when generated here.
  std::optional<Sentence> revised;
  Prompt prompt_used;
  std::size_t prompt_index = 0;
  std::size_t beam_rank = 0;
  ControlCode code = ControlCode::global;
  std::vector<std::string> fills;
  double fluency_delta_sentence = 0.0;
  double fluency_delta_chunk = 0.0;
  std::optional<PredictionRecord> prediction;
  bool kept = false;
  /// Scoring failed; the candidate is neither kept nor judged disfluent.
  bool undecided = false;
};

struct PipelineOptions {
  GenerationParams params;
  ClassifierConfig classifier;
  BlankOptions blanks;
  std::uint64_t seed = 0;
};

struct GenerationResult {
  std::vector<Candidate> candidates;
  /// One message per prompt whose request or output failed.
  std::vector<std::string> errors;
};

/// Renders (codes x blank specs) prompts, queries the generator with at most
/// backends.max_in_flight requests in flight, parses the outputs, drops
/// copies of x and duplicate texts, and classifies each revision. Output
/// order is (prompt index, beam rank) regardless of completion order.
/// Throws BackendError when every prompt fails.
GenerationResult generate_candidates(const Sentence& x, const std::optional<std::vector<ControlCode>>& codes,
                                     const std::optional<std::vector<BlankSpec>>& blanks, const Backends& backends,
                                     const PipelineOptions& opts);

/// Annotated revision of x: tokens outside the blanks keep their parse, fill
/// tokens inherit tags from matching or same-position original tokens and
/// attach where the blanked subtree attached.
Sentence project_revision(const Sentence& x, const BlankSpec& spec, const std::vector<std::string>& fills,
                          const std::string& revised_text, const std::string& id);

struct FilterResult {
  std::vector<Candidate> kept;
  std::vector<Candidate> rejected;
};

/// Word-level log-probabilities of `s`, summing backend pieces that start
/// inside each word's character span.
std::vector<double> word_logprobs(const Sentence& s, const FluencyScore& score);

/// The filter rule: false iff min(delta_sentence, delta_chunk) < -threshold.
bool passes_fluency(double delta_sentence, double delta_chunk, double threshold);

/// Rejects a candidate iff min(sentence delta, chunk delta) < -threshold.
/// Candidates whose scoring fails are returned as rejected and undecided.
FilterResult fluency_filter(const Sentence& x, std::vector<Candidate> cands, Scorer& scorer, double threshold = 10.0);

/// The (x, revision) pair for a candidate, parsing its text if needed.
Perturbation candidate_perturbation(const Sentence& x, const Candidate& c);

}  // namespace cfkit

namespace cfkit {

/// Predicts x and every candidate in one batch, storing candidate
/// predictions in place. Returns the prediction for x.
PredictionRecord predict_candidates(const Sentence& x, std::vector<Candidate>& cands, Predictor& predictor);

}  // namespace cfkit
