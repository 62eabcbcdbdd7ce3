#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfkit/metrics.hpp"
#include "cfkit/pipeline.hpp"
#include "cfkit/selection.hpp"
#include "cfkit/templates.hpp"

namespace cfkit {

using json = nlohmann::json;

void to_json(json& j, const TokenRange& r);
void from_json(const json& j, TokenRange& r);
void to_json(json& j, const Sentence& s);
void from_json(const json& j, Sentence& s);
void to_json(json& j, const Prompt& p);
void from_json(const json& j, Prompt& p);
void to_json(json& j, const PredictionRecord& p);
void from_json(const json& j, PredictionRecord& p);
void to_json(json& j, const Candidate& c);
void from_json(const json& j, Candidate& c);
void to_json(json& j, const TemplateRule& t);
void from_json(const json& j, TemplateRule& t);
void to_json(json& j, const FlipReport& f);
void from_json(const json& j, FlipReport& f);
void to_json(json& j, const SurpriseResult& r);
void from_json(const json& j, SurpriseResult& r);
void to_json(json& j, const IntrinsicReport& r);
void to_json(json& j, const BlankSpec& b);
void from_json(const json& j, BlankSpec& b);

void write_candidates_jsonl(std::ostream& out, const std::vector<Candidate>& cands);
/// Throws ParseError with the 1-based line on malformed rows.
std::vector<Candidate> read_candidates_jsonl(std::istream& in);

/// Reads every non-empty line of a JSONL stream.
std::vector<json> read_jsonl(std::istream& in);

}  // namespace cfkit
