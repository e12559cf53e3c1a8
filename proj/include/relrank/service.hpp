#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "relrank/active.hpp"
#include "relrank/experiment.hpp"
#include "relrank/run_io.hpp"

namespace httplib {
class Server;
}

namespace relrank::service {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Human-in-the-loop annotation session behind a small JSON API:
///
///   GET  /runs/{id}/next-pair   current head of the queue (409 while training, 204 when done)
///   POST /runs/{id}/labels      {"pair_id": ..., "label": 0 | 0.5 | 1}
///   GET  /runs/{id}/status      round, phase, labeled_count, labeling_ratio, last_metrics
///   GET  /runs/{id}/scores      CSV id,mean,variance over the training pool
///
/// Reads may run concurrently; every mutation takes the writer lock. The
/// label that empties a round's queue starts training on a worker thread and
/// returns immediately; labels posted while training are rejected.
class AnnotationService {
 public:
  AnnotationService(io::RunConfig config, std::filesystem::path run_dir);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  const std::string& run_id() const noexcept { return config_.run_id; }
  const experiment::Prepared& prepared() const noexcept { return *prepared_; }

  Response next_pair(const std::string& run_id);
  Response post_label(const std::string& run_id, const std::string& body);
  Response status(const std::string& run_id) const;
  Response scores(const std::string& run_id) const;

  /// Blocks until no training round is running.
  void wait_idle();

  /// Final state once the session is done (or the current state otherwise).
  active::LoopState snapshot_state() const;

  void bind(httplib::Server& server);

 private:
  void start_training();
  nlohmann::json status_json() const;

  io::RunConfig config_;
  std::unique_ptr<experiment::Prepared> prepared_;
  std::unique_ptr<io::RunDirectory> directory_;
  std::unique_ptr<active::ActiveSession> session_;

  mutable std::mutex mutex_;
  bool training_ = false;
  active::Phase phase_ = active::Phase::collecting;
  int round_ = 0;
  std::size_t committed_labels_ = 0;
  std::size_t round_labels_ = 0;
  nlohmann::json last_metrics_;
  std::optional<std::string> error_;
  nn::NetworkParams params_;
  std::thread worker_;
};

/// Serves the API (and `ui_dir`, when given, as static files) until stopped.
int serve(const io::RunConfig& config, const std::filesystem::path& run_dir, const std::string& host);

}  // namespace relrank::service
