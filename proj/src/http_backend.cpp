#include "cfkit/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "cfkit/error.hpp"

namespace cfkit {

namespace {

using nlohmann::json;

struct Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

json post_json(const HttpClientConfig& cfg, const std::string& route, const json& body) {
  if (cfg.base_url.empty()) throw BackendError(BackendError::Kind::transport, "no endpoint configured for " + route);
  const Endpoint ep = split_url(cfg.base_url);
  const std::string path = ep.path_prefix + route;
  const std::string payload = body.dump();
  auto delay = cfg.backoff;
  std::string last_error;
  BackendError::Kind last_kind = BackendError::Kind::transport;

  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    httplib::Client client(ep.scheme_host_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      last_kind = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout
                      ? BackendError::Kind::timeout
                      : BackendError::Kind::transport;
      last_error = route + ": " + httplib::to_string(err);
    } else if (res->status >= 500 || res->status == 429) {
      last_kind = BackendError::Kind::transport;
      last_error = route + ": HTTP " + std::to_string(res->status) + " " + res->body;
    } else if (res->status >= 400) {
      throw BackendError(BackendError::Kind::backend, route + ": HTTP " + std::to_string(res->status) + " " + res->body,
                         attempt);
    } else {
      try {
        json out = json::parse(res->body);
        if (out.contains("error")) {
          throw BackendError(BackendError::Kind::backend, route + ": " + out["error"].dump(), attempt);
        }
        return out;
      } catch (const json::exception& e) {
        throw BackendError(BackendError::Kind::protocol, route + ": invalid JSON response: " + e.what(), attempt);
      }
    }
    if (attempt < cfg.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw BackendError(last_kind, last_error, cfg.max_attempts);
}

template <class Fn>
auto decode(const std::string& route, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw BackendError(BackendError::Kind::protocol, route + ": unexpected response shape: " + e.what());
  }
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

json task_input_json(const TaskInput& in) {
  if (in.second) return json::array({in.text, *in.second});
  return in.text;
}

TaskInput task_input_from_json(const json& j) {
  if (j.is_array()) return TaskInput{j.at(0).get<std::string>(), j.at(1).get<std::string>()};
  return TaskInput{j.get<std::string>(), std::nullopt};
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

}  // namespace

std::vector<std::string> HttpGenerator::generate(const std::string& prompt, const GenerationParams& params) {
  params.validate();
  json body{{"prompt", prompt},
            {"num_return", params.num_return},
            {"strategy", params.strategy == GenerationParams::Strategy::beam ? "beam" : "sample"},
            {"seed", params.seed}};
  if (params.strategy == GenerationParams::Strategy::beam) {
    body["beam_width"] = params.beam_width;
  } else {
    body["temperature"] = params.temperature;
  }
  json res = post_json(cfg_, "/generate", body);
  auto outputs = decode("/generate", [&] { return res.at("outputs").get<std::vector<std::string>>(); });
  if (outputs.size() > params.num_return) outputs.resize(params.num_return);
  return outputs;
}

std::vector<FluencyScore> HttpScorer::score(const std::vector<std::string>& texts) {
  if (texts.empty()) return {};
  json res = post_json(cfg_, "/score", json{{"texts", texts}});
  return decode("/score", [&] {
    std::vector<FluencyScore> out;
    for (const json& s : res.at("scores")) {
      FluencyScore fs;
      fs.total = s.at("total").get<double>();
      for (const json& t : s.at("tokens")) fs.token_logprobs.emplace_back(t.at(0).get<std::string>(), t.at(1).get<double>());
      out.push_back(std::move(fs));
    }
    if (out.size() != texts.size()) throw BackendError(BackendError::Kind::protocol, "/score: wrong number of scores");
    return out;
  });
}

std::vector<PredictionRecord> HttpPredictor::predict(const std::vector<TaskInput>& inputs) {
  if (inputs.empty()) return {};
  json arr = json::array();
  for (const TaskInput& in : inputs) arr.push_back(task_input_json(in));
  json res = post_json(cfg_, "/predict", json{{"inputs", arr}});
  return decode("/predict", [&] {
    std::vector<PredictionRecord> out;
    for (const json& p : res.at("predictions")) {
      PredictionRecord r;
      r.label = p.at("label").get<int>();
      r.probs = p.at("probs").get<std::vector<double>>();
      out.push_back(std::move(r));
    }
    if (out.size() != inputs.size()) throw BackendError(BackendError::Kind::protocol, "/predict: wrong number of predictions");
    return out;
  });
}

std::vector<std::vector<double>> HttpEmbedder::operator()(const std::vector<std::string>& texts) const {
  json res = post_json(cfg_, "/embed", json{{"texts", texts}});
  return decode("/embed", [&] { return res.at("embeddings").get<std::vector<std::vector<double>>>(); });
}

BackendUrls backend_urls_from_env() {
  BackendUrls urls;
  urls.generate = env_or_empty("CFKIT_GEN_URL");
  urls.score = env_or_empty("CFKIT_SCORE_URL");
  urls.predict = env_or_empty("CFKIT_PREDICT_URL");
  if (auto t = env_or_empty("CFKIT_TIMEOUT_MS"); !t.empty()) urls.timeout = std::chrono::milliseconds(std::stol(t));
  return urls;
}

Backends make_http_backends(const BackendUrls& urls, std::size_t max_in_flight) {
  auto cfg = [&](const std::string& u) {
    HttpClientConfig c;
    c.base_url = u;
    c.timeout = urls.timeout;
    return c;
  };
  Backends b;
  if (!urls.generate.empty()) b.generator = std::make_shared<HttpGenerator>(cfg(urls.generate));
  if (!urls.score.empty()) b.scorer = std::make_shared<HttpScorer>(cfg(urls.score));
  if (!urls.predict.empty()) b.predictor = std::make_shared<HttpPredictor>(cfg(urls.predict));
  b.max_in_flight = max_in_flight;
  return b;
}

void register_backend_routes(httplib::Server& server, Backends backends) {
  server.Post("/generate", [backends](const httplib::Request& req, httplib::Response& res) {
    try {
      json body = json::parse(req.body);
      GenerationParams p;
      p.num_return = body.at("num_return").get<std::size_t>();
      p.strategy = body.value("strategy", "beam") == "sample" ? GenerationParams::Strategy::sample
                                                               : GenerationParams::Strategy::beam;
      p.beam_width = body.value("beam_width", p.num_return);
      p.temperature = body.value("temperature", 1.0);
      p.seed = body.value("seed", std::uint64_t{0});
      auto outputs = backends.generator->generate(body.at("prompt").get<std::string>(), p);
      res.set_content(json{{"outputs", outputs}}.dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });
  server.Post("/score", [backends](const httplib::Request& req, httplib::Response& res) {
    try {
      json body = json::parse(req.body);
      auto scores = backends.scorer->score(body.at("texts").get<std::vector<std::string>>());
      json arr = json::array();
      for (const FluencyScore& s : scores) {
        json toks = json::array();
        for (const auto& [t, lp] : s.token_logprobs) toks.push_back(json::array({t, lp}));
        arr.push_back(json{{"total", s.total}, {"tokens", toks}});
      }
      res.set_content(json{{"scores", arr}}.dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });
  server.Post("/predict", [backends](const httplib::Request& req, httplib::Response& res) {
    try {
      json body = json::parse(req.body);
      std::vector<TaskInput> inputs;
      for (const json& j : body.at("inputs")) inputs.push_back(task_input_from_json(j));
      auto preds = backends.predictor->predict(inputs);
      json arr = json::array();
      for (const PredictionRecord& p : preds) arr.push_back(json{{"label", p.label}, {"probs", p.probs}});
      res.set_content(json{{"predictions", arr}}.dump(), "application/json");
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });
}

}  // namespace cfkit
