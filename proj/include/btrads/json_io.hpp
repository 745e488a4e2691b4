#pragma once

// JSON forms of the domain types and the line-delimited case/report files.
// Readers are strict: unknown keys, wrong types and bad enum values raise
// Error(ValidationError) naming the offending field (and line, for files).

#include <iosfwd>
#include <string>
#include <vector>

#include "btrads/core.hpp"
#include "btrads/pipeline.hpp"
#include "btrads/scorer.hpp"
#include "btrads/volumetrics.hpp"
#include "json.hpp"

namespace btrads {

nlohmann::json label_to_json(const ObservedLabel& l);
ObservedLabel label_from_json(const nlohmann::json& j);

nlohmann::json span_to_json(const EvidenceSpan& s);
EvidenceSpan span_from_json(const nlohmann::json& j);

nlohmann::json variables_to_json(const ClinicalVariables& v);
/// With allow_partial, missing fields keep their defaults (reviewer edits).
ClinicalVariables variables_from_json(const nlohmann::json& j, bool allow_partial = false);

nlohmann::json adjudication_to_json(const Adjudication& a);
Adjudication adjudication_from_json(const nlohmann::json& j);

nlohmann::json case_to_json(const CaseRecord& c);
CaseRecord case_from_json(const nlohmann::json& j);

nlohmann::json volumetrics_to_json(const VolumetricChange& v);
VolumetricChange volumetrics_from_json(const nlohmann::json& j);

nlohmann::json window_to_json(const RadiationWindow& w);
RadiationWindow window_from_json(const nlohmann::json& j);

nlohmann::json score_to_json(const ScoreResult& s);
ScoreResult score_from_json(const nlohmann::json& j);

nlohmann::json conflict_to_json(const ConflictFlag& f);
ConflictFlag conflict_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const CaseReport& r);
CaseReport report_from_json(const nlohmann::json& j);

/// Blank lines are skipped. Errors carry the 1-based line number.
std::vector<CaseRecord> read_cases(std::istream& in);
std::vector<CaseRecord> read_cases_file(const std::string& path);
void write_cases(std::ostream& out, const std::vector<CaseRecord>& cases);

std::vector<CaseReport> read_reports(std::istream& in);
std::vector<CaseReport> read_reports_file(const std::string& path);
void write_reports(std::ostream& out, const std::vector<CaseReport>& reports);

}  // namespace btrads
