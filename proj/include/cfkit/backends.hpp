#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cfkit {

struct GenerationParams {
  enum class Strategy { beam, sample };

  std::size_t num_return = 5;
  Strategy strategy = Strategy::beam;
  std::size_t beam_width = 5;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Log-probabilities in natural-log units.
struct FluencyScore {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> token_logprobs;
};

struct PredictionRecord {
  int label = 0;
  std::vector<double> probs;

  /// Probabilities sum to 1 and label is their argmax.
  void validate() const;
  double prob(int cls) const { return probs.at(static_cast<std::size_t>(cls)); }
  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// Builds a record from a distribution, taking the first maximum as label.
PredictionRecord make_prediction(std::vector<double> probs);

/// Signed per-token importance weights for one sentence.
struct AttributionMap {
  std::vector<double> weights;
};

enum class TaskShape { single, pair };

struct TaskInput {
  std::string text;
  std::optional<std::string> second;  // hypothesis / second question

  TaskShape shape() const { return second ? TaskShape::pair : TaskShape::single; }
};

/// Failure talking to a model backend.
class BackendError : public std::runtime_error {
 public:
  enum class Kind { transport, timeout, backend, protocol };
  BackendError(Kind kind, const std::string& what, int attempts = 1)
      : std::runtime_error(what), kind_(kind), attempts_(attempts) {}
  Kind kind() const { return kind_; }
  int attempts() const { return attempts_; }
  bool retryable() const { return kind_ == Kind::transport || kind_ == Kind::timeout; }

 private:
  Kind kind_;
  int attempts_;
};

class Generator {
 public:
  virtual ~Generator() = default;
  /// Raw continuations (answer-separated fills), at most num_return.
  virtual std::vector<std::string> generate(const std::string& prompt, const GenerationParams& params) = 0;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<FluencyScore> score(const std::vector<std::string>& texts) = 0;
};

class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<PredictionRecord> predict(const std::vector<TaskInput>& inputs) = 0;
};

/// The three capabilities a pipeline needs. Clients are shareable across
/// threads; max_in_flight bounds concurrent generation requests.
struct Backends {
  std::shared_ptr<Generator> generator;
  std::shared_ptr<Scorer> scorer;
  std::shared_ptr<Predictor> predictor;
  std::size_t max_in_flight = 8;
};

}  // namespace cfkit
