#include "relrank/service.hpp"

#include <cstdio>
#include <sstream>
#include <unordered_set>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "relrank/error.hpp"

namespace relrank::service {

using nlohmann::json;

namespace {

Response json_response(int status, const json& body) { return {status, body.dump(), "application/json"}; }

Response error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

json sample_card(const data::Dataset& dataset, SampleId id) {
  const data::Sample& s = dataset[id];
  return {{"id", s.name}, {"group", s.group}, {"features", s.features}};
}

}  // namespace

AnnotationService::AnnotationService(io::RunConfig config, std::filesystem::path run_dir)
    : config_(std::move(config)) {
  prepared_ = std::make_unique<experiment::Prepared>(experiment::prepare(config_));
  directory_ = std::make_unique<io::RunDirectory>(std::move(run_dir), prepared_->dataset, config_);
  session_ = experiment::make_session(*prepared_, config_, directory_.get());
  params_ = session_->state().params;
  round_ = session_->round();
  phase_ = session_->phase();
}

AnnotationService::~AnnotationService() { wait_idle(); }

void AnnotationService::wait_idle() {
  std::thread worker;
  {
    std::lock_guard lock(mutex_);
    worker.swap(worker_);
  }
  if (worker.joinable()) worker.join();
}

Response AnnotationService::next_pair(const std::string& run_id) {
  std::lock_guard lock(mutex_);
  if (run_id != config_.run_id) return error_response(404, "unknown run '" + run_id + "'");
  if (training_) return error_response(409, "training in progress");
  if (phase_ == active::Phase::done) return {204, "", "application/json"};
  const auto slot = session_->next_unlabeled();
  if (!slot) return {204, "", "application/json"};
  const active::PendingPair& p = session_->pending()[*slot];
  const std::size_t total = session_->pending().size();
  return json_response(200, {{"pair_id", p.pair_id},
                             {"round", round_},
                             {"left", sample_card(prepared_->dataset, p.first)},
                             {"right", sample_card(prepared_->dataset, p.second)},
                             {"progress", {{"labeled", round_labels_}, {"total", total}}}});
}

Response AnnotationService::post_label(const std::string& run_id, const std::string& body) {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::parse_error&) {
    return error_response(400, "request body is not JSON");
  }
  if (!request.is_object() || !request.contains("pair_id") || !request["pair_id"].is_string() ||
      !request.contains("label") || !request["label"].is_number())
    return error_response(400, "expected {\"pair_id\": string, \"label\": number}");
  const std::string pair_id = request["pair_id"].get<std::string>();
  const double label = request["label"].get<double>();
  if (!is_legal_label(label)) return error_response(400, "label must be 0, 0.5 or 1");

  std::lock_guard lock(mutex_);
  if (run_id != config_.run_id) return error_response(404, "unknown run '" + run_id + "'");
  if (training_) return error_response(409, "training in progress; label rejected");
  if (phase_ == active::Phase::done) return error_response(409, "session is done");
  const auto slot = session_->find_pending(pair_id);
  if (!slot) return error_response(404, "unknown pair '" + pair_id + "'");
  if (session_->pending()[*slot].label) return error_response(409, "pair '" + pair_id + "' is already labeled");

  session_->submit(*slot, label, active::Source::human);
  ++round_labels_;
  const bool complete = session_->round_complete();
  if (complete) start_training();
  return json_response(200, {{"ok", true}, {"pair_id", pair_id}, {"round_complete", complete}});
}

void AnnotationService::start_training() {
  // Caller holds mutex_. A finished worker from the previous round may still
  // need joining.
  if (worker_.joinable()) worker_.join();
  training_ = true;
  phase_ = active::Phase::training;
  worker_ = std::thread([this] {
    std::optional<std::string> failure;
    try {
      session_->advance();
    } catch (const std::exception& e) {
      failure = e.what();
      spdlog::error("training round failed: {}", e.what());
    }
    std::lock_guard lock(mutex_);
    training_ = false;
    committed_labels_ = session_->state().labeled.size();
    round_labels_ = 0;
    params_ = session_->state().params;
    round_ = session_->round();
    if (!session_->state().metrics_by_round.empty()) {
      const auto& m = session_->state().metrics_by_round.back();
      last_metrics_ = {{"training", rank::to_json(m.training)}, {"evaluation", m.evaluation}};
    }
    if (failure) {
      error_ = failure;
      phase_ = active::Phase::done;
    } else {
      phase_ = session_->phase();
    }
  });
}

json AnnotationService::status_json() const {
  const std::size_t labeled = committed_labels_ + round_labels_;
  json j{{"run_id", config_.run_id},
         {"round", round_},
         {"rounds", config_.loop.rounds},
         {"phase", active::to_string(phase_)},
         {"labeled_count", labeled},
         {"labeling_ratio", static_cast<double>(labeled) / static_cast<double>(session_->pool_size())},
         {"last_metrics", last_metrics_}};
  if (error_) j["error"] = *error_;
  return j;
}

Response AnnotationService::status(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  if (run_id != config_.run_id) return error_response(404, "unknown run '" + run_id + "'");
  return json_response(200, status_json());
}

Response AnnotationService::scores(const std::string& run_id) const {
  nn::NetworkParams params;
  {
    std::lock_guard lock(mutex_);
    if (run_id != config_.run_id) return error_response(404, "unknown run '" + run_id + "'");
    params = params_;
  }
  const std::uint64_t base = derive_seed(config_.seed, {static_cast<std::uint64_t>(Stream::posterior), 0x5c0e});
  const auto posteriors =
      bayes::predict_posteriors(params, prepared_->dataset, prepared_->split.train, config_.loop.draws, base);
  std::ostringstream out;
  out << "id,mean,variance\n";
  char buf[64];
  for (const auto& p : posteriors) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", p.mean, p.variance);
    out << prepared_->dataset[p.id].name << ',' << buf << '\n';
  }
  return {200, out.str(), "text/csv"};
}

active::LoopState AnnotationService::snapshot_state() const {
  std::lock_guard lock(mutex_);
  if (training_) throw ValidationError("state is changing while training");
  return session_->state();
}

void AnnotationService::bind(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    if (!r.body.empty()) res.set_content(r.body, r.content_type);
  };
  server.Get(R"(/runs/([^/]+)/next-pair)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, next_pair(req.matches[1]));
  });
  server.Post(R"(/runs/([^/]+)/labels)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, post_label(req.matches[1], req.body));
  });
  server.Get(R"(/runs/([^/]+)/status)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, status(req.matches[1]));
  });
  server.Get(R"(/runs/([^/]+)/scores)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, scores(req.matches[1]));
  });
  if (config_.ui_dir && !server.set_mount_point("/", config_.ui_dir->string()))
    spdlog::warn("UI directory '{}' not found; serving the API only", config_.ui_dir->string());
}

int serve(const io::RunConfig& config, const std::filesystem::path& run_dir, const std::string& host) {
  AnnotationService service(config, run_dir);
  httplib::Server server;
  service.bind(server);
  spdlog::info("serving run '{}' on http://{}:{}/runs/{}/", config.run_id, host, config.port, config.run_id);
  if (!server.listen(host, config.port)) throw IoError("cannot listen on " + host + ":" + std::to_string(config.port));
  return 0;
}

}  // namespace relrank::service
