#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cfkit/jsonio.hpp"

namespace httplib {
class Server;
}

namespace cfkit {

struct AnalysisSession {
  std::string id;
  std::string dataset_ref;
  Dataset dataset;
  std::map<std::string, std::vector<Candidate>> candidates;         // original id -> candidates
  std::map<std::string, PredictionRecord> original_predictions;     // original id -> prediction
  std::map<std::string, json> selections;
  std::vector<FlipReport> templates;
  std::string created;
  std::string updated;
};

void to_json(json& j, const AnalysisSession& s);
void from_json(const json& j, AnalysisSession& s);

struct ServiceConfig {
  /// Directory holding one <id>.json per session; created if missing.
  std::string data_dir = "cfkit-data";
  Backends backends;
  PipelineOptions pipeline;
  double fluency_threshold = 10.0;
};

/// Sessions over the pipeline, selection and template modules. Every
/// mutation is written to disk before the call returns; existing session
/// files are loaded on construction.
class AnalysisService {
 public:
  explicit AnalysisService(ServiceConfig cfg);

  /// Body: {"conllu": text} or {"path": file}, optional "id".
  json create_session(const json& body);
  json get_session(const std::string& id) const;
  std::vector<std::string> list_sessions() const;
  void delete_session(const std::string& id);

  /// Body: {"sentence_id", "codes"?, "blanks"?, "seed"?, "filter"?}.
  json generate(const std::string& id, const json& body);
  /// Body: {"strategy": diversity|surprise|contrast, "sentence_id"?, "k"?,
  /// "attribution"?, "name"?}.
  json run_selection(const std::string& id, const json& body);
  /// Body: {"sentence_ids"?, "budget"?}.
  json mine_templates(const std::string& id, const json& body);

  /// Mounts the /v1 REST API. Errors are {code, message, detail}.
  void register_routes(httplib::Server& server);

 private:
  struct Entry {
    mutable std::shared_mutex mutex;
    AnalysisSession session;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void persist(const AnalysisSession& s) const;
  std::string session_path(const std::string& id) const;

  ServiceConfig cfg_;
  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace cfkit
