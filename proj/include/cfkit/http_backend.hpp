#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "cfkit/backends.hpp"

namespace httplib {
class Server;
}

namespace cfkit {

struct HttpClientConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8000
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff{100};  // doubled after each failed attempt
};

/// POST /generate {prompt, num_return, strategy, beam_width?, temperature?, seed?} -> {outputs}
class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(HttpClientConfig cfg) : cfg_(std::move(cfg)) {}
  std::vector<std::string> generate(const std::string& prompt, const GenerationParams& params) override;

 private:
  HttpClientConfig cfg_;
};

/// POST /score {texts} -> {scores: [{total, tokens: [[tok, lp]]}]}
class HttpScorer : public Scorer {
 public:
  explicit HttpScorer(HttpClientConfig cfg) : cfg_(std::move(cfg)) {}
  std::vector<FluencyScore> score(const std::vector<std::string>& texts) override;

 private:
  HttpClientConfig cfg_;
};

/// POST /predict {inputs} -> {predictions: [{label, probs}]}. Inputs are
/// strings, or [first, second] pairs for pair tasks.
class HttpPredictor : public Predictor {
 public:
  explicit HttpPredictor(HttpClientConfig cfg) : cfg_(std::move(cfg)) {}
  std::vector<PredictionRecord> predict(const std::vector<TaskInput>& inputs) override;

 private:
  HttpClientConfig cfg_;
};

/// POST /embed {texts} -> {embeddings: [[...]]}; feeds EmbeddingShiftScorer.
class HttpEmbedder {
 public:
  explicit HttpEmbedder(HttpClientConfig cfg) : cfg_(std::move(cfg)) {}
  std::vector<std::vector<double>> operator()(const std::vector<std::string>& texts) const;

 private:
  HttpClientConfig cfg_;
};

struct BackendUrls {
  std::string generate;
  std::string score;
  std::string predict;
  std::chrono::milliseconds timeout{30000};

  bool any() const { return !generate.empty() || !score.empty() || !predict.empty(); }
};

/// CFKIT_GEN_URL / CFKIT_SCORE_URL / CFKIT_PREDICT_URL / CFKIT_TIMEOUT_MS.
BackendUrls backend_urls_from_env();

/// HTTP clients for every configured URL; unset capabilities stay null.
Backends make_http_backends(const BackendUrls& urls, std::size_t max_in_flight = 8);

/// Registers /generate, /score and /predict handlers that serve `backends`
/// using the same wire protocol the HTTP clients speak.
void register_backend_routes(httplib::Server& server, Backends backends);

}  // namespace cfkit
