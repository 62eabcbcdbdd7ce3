#pragma once

#include "cfkit/backends.hpp"

namespace cfkit {

/// Deterministic offline stand-in for all three model capabilities.
///
/// Generation recovers the blanked spans of the prompt and rewrites them with
/// a small rule set keyed by control code (negation words, antonyms, numerals,
/// ...). Scoring sums log unigram frequencies from a bundled table, with a
/// fixed -10 for unknown words; values are multiples of 1/1024 so sums are
/// exact. Prediction is a lexicon sentiment rule for single inputs and a
/// word-overlap NLI rule for pairs.
class MockBackend : public Generator, public Scorer, public Predictor {
 public:
  explicit MockBackend(TaskShape shape = TaskShape::single) : shape_(shape) {}

  std::vector<std::string> generate(const std::string& prompt, const GenerationParams& params) override;
  std::vector<FluencyScore> score(const std::vector<std::string>& texts) override;
  std::vector<PredictionRecord> predict(const std::vector<TaskInput>& inputs) override;

  TaskShape shape() const { return shape_; }

  static constexpr double kUnknownLogprob = -10.0;
  static double unigram_logprob(const std::string& token);

 private:
  TaskShape shape_;
};

/// Mock-backed Backends bundle.
Backends make_mock_backends(TaskShape shape = TaskShape::single);

}  // namespace cfkit
