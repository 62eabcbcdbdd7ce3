#include "cfkit/backends.hpp"

#include <cmath>

#include "cfkit/error.hpp"

namespace cfkit {

void GenerationParams::validate() const {
  if (num_return < 1) throw ValidationError("num_return must be at least 1");
  if (strategy == Strategy::beam && beam_width < num_return) {
    throw ValidationError("beam_width must be >= num_return");
  }
  if (strategy == Strategy::sample && !(temperature > 0.0)) throw ValidationError("temperature must be positive");
}

void PredictionRecord::validate() const {
  if (probs.empty()) throw ValidationError("prediction has no probabilities");
  double sum = 0.0;
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!std::isfinite(probs[i]) || probs[i] < 0.0) throw ValidationError("prediction probability out of range");
    sum += probs[i];
    if (probs[i] > probs[argmax]) argmax = i;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("prediction probabilities do not sum to 1");
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size() || probs[label] != probs[argmax]) {
    throw ValidationError("prediction label is not the argmax");
  }
}

PredictionRecord make_prediction(std::vector<double> probs) {
  PredictionRecord r;
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[argmax]) argmax = i;
  }
  r.label = static_cast<int>(argmax);
  r.probs = std::move(probs);
  return r;
}

}  // namespace cfkit
