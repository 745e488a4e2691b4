#pragma once

// File-backed case store: one current-state object per case under
// DIR/cases/ and an append-only audit log at DIR/audit.jsonl. Reviewer
// values live alongside the system report and never replace it.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btrads/pipeline.hpp"
#include "json.hpp"

namespace btrads {

enum class Actor { System, Reviewer };
enum class AuditAction { Scored, VariablesEdited, Rescored, Overridden };

std::string_view to_string(Actor a) noexcept;
std::string_view to_string(AuditAction a) noexcept;

struct AuditEvent {
  std::uint64_t sequence = 0;  // position in the log, starting at 1
  std::string timestamp;       // UTC, ISO-8601 with microseconds
  std::string case_id;
  Actor actor = Actor::System;
  AuditAction action = AuditAction::Scored;
  nlohmann::json payload;

  bool operator==(const AuditEvent&) const = default;
};

nlohmann::json audit_event_to_json(const AuditEvent& e);
AuditEvent audit_event_from_json(const nlohmann::json& j);

struct ReviewerState {
  std::optional<ClinicalVariables> variables;
  /// Variables the reviewer set without an evidence span.
  std::vector<Variable> reviewer_asserted;
  std::optional<ScoreResult> rescore;
  std::optional<Category> override_category;
  std::optional<std::string> override_reason;

  bool operator==(const ReviewerState&) const = default;
};

nlohmann::json reviewer_state_to_json(const ReviewerState& s);
ReviewerState reviewer_state_from_json(const nlohmann::json& j);

/// Rebuilds per-case reviewer state from the audit log alone.
std::map<std::string, ReviewerState> replay(std::span<const AuditEvent> events);

struct StoredCase {
  CaseRecord record;
  CaseReport system;
  ReviewerState reviewer;
};

struct RescoreOutcome {
  ScoreResult score;
  Category system_category = Category::BT0;
  bool category_changed = false;
  /// First rule whose outcome differs from the system trace; absent when the traces agree.
  std::optional<std::string> first_divergent_rule;
  std::vector<Variable> reviewer_asserted;
  AuditEvent event;
};

/// Edited variables are validated against the note; a non-default value
/// without evidence is accepted and reported as reviewer-asserted. Other
/// violations throw Error(ValidationError).
std::vector<Variable> check_reviewer_variables(const ClinicalVariables& edited, std::string_view note);

/// Maps a case id to a portable file name (unsafe bytes are percent-encoded).
std::string case_file_name(std::string_view case_id);

class CaseStore {
 public:
  using Clock = std::function<std::chrono::system_clock::time_point()>;

  /// Creates the directory layout if needed and loads existing cases.
  explicit CaseStore(std::filesystem::path dir, Clock clock = nullptr);
  ~CaseStore();
  CaseStore(const CaseStore&) = delete;
  CaseStore& operator=(const CaseStore&) = delete;

  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Stores the system result for a case and appends a Scored event.
  /// Replaces any earlier state for the same case_id.
  AuditEvent put_scored(const CaseRecord& record, const CaseReport& report);

  std::vector<std::string> ids() const;
  bool contains(const std::string& case_id) const;
  /// Throws Error(NotFound).
  StoredCase get(const std::string& case_id) const;
  /// System reports in case_id order.
  std::vector<CaseReport> system_reports() const;

  /// Throws Error(NotFound) or Error(ValidationError).
  RescoreOutcome rescore_with_edits(const std::string& case_id, const ClinicalVariables& edited,
                                    const PipelineConfig& config);
  AuditEvent edit_variables(const std::string& case_id, const ClinicalVariables& edited);
  AuditEvent record_override(const std::string& case_id, const std::optional<ClinicalVariables>& reviewer_vars,
                             const std::optional<Category>& reviewer_category, const std::string& reason);

  std::vector<AuditEvent> audit_log() const;

 private:
  struct Entry;
  Entry& entry(const std::string& case_id) const;
  void persist(const std::string& case_id, const StoredCase& c) const;
  AuditEvent append(const std::string& case_id, Actor actor, AuditAction action, nlohmann::json payload);

  std::filesystem::path dir_;
  Clock clock_;
  mutable std::mutex index_mutex_;
  std::map<std::string, std::unique_ptr<Entry>> cases_;
  mutable std::mutex audit_mutex_;
  std::uint64_t next_sequence_ = 1;
  std::chrono::system_clock::time_point last_time_{};
};

}  // namespace btrads
