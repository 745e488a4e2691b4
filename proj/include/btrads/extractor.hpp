#pragma once

// Clinical-variable extraction from free-text notes. Two interchangeable
// backends produce the same validated ClinicalVariables:
//   - PatternRules: deterministic keyword/cue pass, used offline and in tests.
//   - RemoteLlm: chat-completions endpoint with a schema-constrained response,
//     validated locally and re-prompted on violations.

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "btrads/core.hpp"
#include "json.hpp"

namespace btrads {

enum class BackendKind { PatternRules, RemoteLlm };

std::string_view to_string(BackendKind k) noexcept;

struct BackendConfig {
  BackendKind kind = BackendKind::PatternRules;
  std::string endpoint_url;  // RemoteLlm only, e.g. http://localhost:8000/v1/chat/completions
  std::string model_name;
  std::string api_key;
  double temperature = 0.0;
  int max_retries = 2;
  std::chrono::seconds timeout{60};
};

/// Throws Error(ConfigError) when a RemoteLlm config is unusable.
void check_backend_config(const BackendConfig& config);

/// Deterministic pattern pass. Pure: identical notes give identical results.
ClinicalVariables pattern_rules(std::string_view note);

/// Sentence boundaries used by the pattern pass, as [start, end) offsets with
/// surrounding whitespace trimmed.
std::vector<std::pair<std::size_t, std::size_t>> split_sentences(std::string_view note);

/// JSON schema of the structured object the LLM must return.
const nlohmann::json& extraction_schema();

/// Chat-completions request body. Each entry in `feedback` is a previous
/// rejected reply paired with the validation error to send back.
struct RetryFeedback {
  std::string rejected_reply;
  std::string error;
};
nlohmann::json llm_request_payload(std::string_view note, const BackendConfig& config,
                                   const std::vector<RetryFeedback>& feedback = {});

/// Outcome of validating one model reply against the schema and the note.
struct ReplyValidation {
  std::optional<ClinicalVariables> variables;
  std::vector<std::string> schema_errors;
  std::vector<std::string> span_errors;

  bool ok() const noexcept { return variables.has_value(); }
  std::string describe() const;
};

/// `content` is the assistant message content (the structured object text).
ReplyValidation validate_llm_reply(std::string_view content, std::string_view note);

/// Pulls choices[0].message.content out of a chat-completions response body.
/// Throws Error(SchemaViolation) if the envelope is malformed.
std::string reply_content(std::string_view response_body);

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  /// Returns the raw response body. Throws Error(TransportError).
  virtual std::string post(const nlohmann::json& request) = 0;
};

/// HTTP(S) transport; one client per call so concurrent use is safe.
class HttpChatTransport final : public ChatTransport {
 public:
  HttpChatTransport(std::string endpoint_url, std::string api_key, std::chrono::seconds timeout);
  std::string post(const nlohmann::json& request) override;

 private:
  std::string base_;  // scheme://host[:port]
  std::string path_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

class Extractor {
 public:
  /// For RemoteLlm a default HttpChatTransport is created when none is given.
  explicit Extractor(BackendConfig config, std::shared_ptr<ChatTransport> transport = nullptr);

  /// Errors: ValidationError (empty note), TransportError, SchemaViolation,
  /// SpanVerificationFailure.
  ClinicalVariables extract(std::string_view note) const;

  const BackendConfig& config() const noexcept { return config_; }

 private:
  ClinicalVariables extract_remote(std::string_view note) const;

  BackendConfig config_;
  std::shared_ptr<ChatTransport> transport_;
};

ClinicalVariables extract(std::string_view note, const BackendConfig& config);

}  // namespace btrads
