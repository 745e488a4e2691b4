#pragma once

// Local HTTP review service over a CaseStore.
//
//   GET  /cases                 paged list; filters: category, conflict, correct, status
//   GET  /cases/{id}            record, system report and reviewer state
//   GET  /cases/{id}/audit      audit events for one case
//   POST /cases/{id}/rescore    {"edited_variables": {...}}
//   POST /cases/{id}/override   {"variables"?, "category"?, "reason"}
//   GET  /metrics               batch evaluation of the stored system reports
//
// Errors are {"error": {"code": ..., "message": ...}}. When a token is set,
// every request must carry it in the X-Btrads-Token header.

#include <memory>
#include <optional>
#include <string>

#include "btrads/pipeline.hpp"
#include "btrads/store.hpp"

namespace btrads {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::optional<std::string> token;
};

inline constexpr const char* kTokenHeader = "X-Btrads-Token";

class ReviewService {
 public:
  ReviewService(std::shared_ptr<CaseStore> store, PipelineConfig config, ServiceOptions options);
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  /// Throws Error(IoError) when the address cannot be bound.
  int start();
  int port() const noexcept { return port_; }
  /// Blocks until stop() is called from elsewhere.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace btrads
