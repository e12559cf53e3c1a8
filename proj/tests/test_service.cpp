#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <httplib.h>

#include <chrono>
#include <map>
#include <thread>

#include "support.hpp"
#include "relrank/error.hpp"
#include "relrank/experiment.hpp"
#include "relrank/run_io.hpp"
#include "relrank/service.hpp"

using namespace relrank;
using namespace relrank::testing;
using nlohmann::json;

namespace {

io::RunConfig small_run(std::uint64_t seed) {
  io::RunConfig c;
  c.synth = small_synth(seed, 400);
  c.reseed(seed);
  c.loop.draws = 8;
  c.loop.rounds = 2;
  c.train.epochs_per_round = 3;
  c.run_id = "demo";
  return c;
}

std::string label_body(const std::string& pair_id, double label) {
  return json{{"pair_id", pair_id}, {"label", label}}.dump();
}

/// Answers pairs from ground truth until the service reports done.
void drive_to_completion(service::AnnotationService& svc, const data::Dataset& ds) {
  for (int guard = 0; guard < 100000; ++guard) {
    const auto r = svc.next_pair("demo");
    if (r.status == 409) {
      svc.wait_idle();
      continue;
    }
    if (r.status == 204) {
      svc.wait_idle();
      if (json::parse(svc.status("demo").body)["phase"] == "done") return;
      continue;
    }
    REQUIRE(r.status == 200);
    const auto pair = json::parse(r.body);
    const SampleId a = *ds.find(pair["left"]["id"].get<std::string>());
    const SampleId b = *ds.find(pair["right"]["id"].get<std::string>());
    const auto ack = svc.post_label("demo", label_body(pair["pair_id"], data::oracle_relative(ds, a, b)));
    REQUIRE(ack.status == 200);
  }
  FAIL("service did not finish");
}

}  // namespace

TEST_CASE("next-pair is idempotent until labeled, then advances") {
  const auto dir = scratch_dir("svc-idem");
  service::AnnotationService svc(small_run(1), dir);
  const auto first = svc.next_pair("demo");
  REQUIRE(first.status == 200);
  const auto again = svc.next_pair("demo");
  CHECK(json::parse(first.body)["pair_id"] == json::parse(again.body)["pair_id"]);
  std::set<std::string> seen;
  for (int k = 0; k < 5; ++k) {
    const auto p = json::parse(svc.next_pair("demo").body);
    CHECK(seen.insert(p["pair_id"].get<std::string>()).second);
    CHECK(p["left"]["features"].size() == svc.prepared().dataset.feature_dim());
    CHECK(svc.post_label("demo", label_body(p["pair_id"], 0.5)).status == 200);
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("label validation, conflicts and unknown ids") {
  const auto dir = scratch_dir("svc-errors");
  service::AnnotationService svc(small_run(2), dir);
  const auto p = json::parse(svc.next_pair("demo").body);
  const std::string id = p["pair_id"];
  CHECK(svc.post_label("demo", label_body(id, 0.7)).status == 400);
  CHECK(svc.post_label("demo", "not json").status == 400);
  CHECK(svc.post_label("demo", R"({"pair_id": 3})").status == 400);
  CHECK(svc.post_label("demo", label_body("r0-p99999", 1.0)).status == 404);
  CHECK(svc.post_label("other", label_body(id, 1.0)).status == 404);
  CHECK(svc.next_pair("other").status == 404);
  CHECK(svc.status("other").status == 404);
  CHECK(svc.scores("other").status == 404);

  CHECK(svc.post_label("demo", label_body(id, 0.5)).status == 200);
  CHECK(svc.post_label("demo", label_body(id, 1.0)).status == 409);
  svc.wait_idle();
  const auto rows = io::read_pairs_csv(dir / "pairs.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].label == 0.5);
  CHECK(rows[0].source == "human");
}

TEST_CASE("training phase rejects labels and reads, then returns to collecting") {
  auto cfg = small_run(3);
  cfg.train.epochs_per_round = 40;
  const auto dir = scratch_dir("svc-training");
  service::AnnotationService svc(cfg, dir);
  const auto& ds = svc.prepared().dataset;
  std::optional<std::string> last_id;
  for (;;) {
    const auto r = svc.next_pair("demo");
    REQUIRE(r.status == 200);
    const auto pair = json::parse(r.body);
    const SampleId a = *ds.find(pair["left"]["id"].get<std::string>());
    const SampleId b = *ds.find(pair["right"]["id"].get<std::string>());
    const auto ack = json::parse(svc.post_label("demo", label_body(pair["pair_id"], data::oracle_relative(ds, a, b))).body);
    last_id = pair["pair_id"];
    if (ack["round_complete"]) break;
  }
  const auto st = json::parse(svc.status("demo").body);
  CHECK(st["phase"] == "training");
  CHECK(svc.next_pair("demo").status == 409);
  CHECK(svc.post_label("demo", label_body(*last_id, 1.0)).status == 409);
  svc.wait_idle();
  const auto after = json::parse(svc.status("demo").body);
  CHECK(after["phase"] == "collecting");
  CHECK(after["round"] == 1);
  CHECK_FALSE(after["last_metrics"].is_null());
  CHECK(svc.next_pair("demo").status == 200);
}

TEST_CASE("scripted human run reproduces the simulated loop state") {
  const auto cfg = small_run(4);
  const auto dir = scratch_dir("svc-equivalence");
  service::AnnotationService svc(cfg, dir);
  drive_to_completion(svc, svc.prepared().dataset);
  CHECK(svc.next_pair("demo").status == 204);
  CHECK(svc.post_label("demo", label_body("r0-p0", 1.0)).status == 409);
  const auto human = svc.snapshot_state();

  const auto prep = experiment::prepare(cfg);
  const auto sim = experiment::run_simulated(prep, cfg, std::nullopt);
  CHECK(active::same_trajectory(human, sim.state));

  // Every human label appears exactly once in the annotation log.
  const auto rows = io::read_pairs_csv(dir / "pairs.csv");
  CHECK(rows.size() == human.labeled.size());
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& r : rows) {
    CHECK(r.source == "human");
    CHECK(keys.insert(std::minmax(r.first, r.second)).second);
  }
  const auto st = json::parse(svc.status("demo").body);
  CHECK(st["phase"] == "done");
  CHECK(st["round"] == 2);
}

TEST_CASE("status after the initial phase on a 1000-sample pool") {
  // One 1000-sample group plus ten small groups; find a split seed that puts
  // exactly the big group in training.
  std::vector<data::Sample> samples;
  Engine rng(1);
  for (std::size_t i = 0; i < 1300; ++i) {
    const int label = static_cast<int>(uniform_index(rng, 4));
    const std::string group = i < 1000 ? "pool" : "v" + std::to_string((i - 1000) / 30);
    samples.push_back({"x" + std::to_string(i), {static_cast<double>(label), uniform01(rng)}, label, group});
  }
  const data::Dataset ds(std::move(samples));
  const auto dir = scratch_dir("svc-status");
  data::save_dataset(ds, dir / "data.jsonl");
  std::optional<std::uint64_t> seed;
  for (std::uint64_t s = 0; s < 500 && !seed; ++s)
    if (data::split_groupwise(ds, {0.6, 0.2, 0.2}, s).train.size() == 1000) seed = s;
  REQUIRE(seed);

  io::RunConfig cfg;
  cfg.reseed(*seed);
  cfg.dataset = dir / "data.jsonl";
  cfg.run_id = "demo";
  cfg.loop.draws = 4;
  cfg.train.epochs_per_round = 2;
  service::AnnotationService svc(cfg, dir / "run");
  REQUIRE(svc.prepared().split.train.size() == 1000);
  const auto s0 = json::parse(svc.status("demo").body);
  CHECK(s0["labeled_count"] == 0);
  CHECK(s0["phase"] == "collecting");
  for (;;) {
    const auto r = svc.next_pair("demo");
    if (r.status != 200) break;
    const auto pair = json::parse(r.body);
    const auto ack = json::parse(svc.post_label("demo", label_body(pair["pair_id"], 1.0)).body);
    if (ack["round_complete"]) break;
  }
  svc.wait_idle();
  const auto s1 = json::parse(svc.status("demo").body);
  CHECK(s1["labeled_count"] == 200);
  CHECK(s1["labeling_ratio"].get<double>() == doctest::Approx(0.20));
}

TEST_CASE("scores endpoint returns one CSV row per training sample") {
  const auto dir = scratch_dir("svc-scores");
  service::AnnotationService svc(small_run(5), dir);
  const auto r = svc.scores("demo");
  CHECK(r.status == 200);
  CHECK(r.content_type == "text/csv");
  CHECK(r.body.rfind("id,mean,variance\n", 0) == 0);
  const auto lines = std::count(r.body.begin(), r.body.end(), '\n');
  CHECK(static_cast<std::size_t>(lines) == svc.prepared().split.train.size() + 1);
  CHECK(svc.scores("demo").body == r.body);
}

TEST_CASE("HTTP round trip over a socket, with static UI files") {
  auto cfg = small_run(6);
  const auto dir = scratch_dir("svc-http");
  std::filesystem::create_directories(dir / "ui");
  {
    std::ofstream(dir / "ui" / "index.html") << "<html>annotator</html>";
  }
  cfg.ui_dir = dir / "ui";
  service::AnnotationService svc(cfg, dir / "run");
  httplib::Server server;
  svc.bind(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto next = client.Get("/runs/demo/next-pair");
  REQUIRE(next);
  CHECK(next->status == 200);
  const auto pair = json::parse(next->body);
  auto post = client.Post("/runs/demo/labels", label_body(pair["pair_id"], 0.5), "application/json");
  REQUIRE(post);
  CHECK(post->status == 200);
  auto bad = client.Post("/runs/demo/labels", label_body(pair["pair_id"], 0.7), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  auto status = client.Get("/runs/demo/status");
  REQUIRE(status);
  CHECK(json::parse(status->body)["labeled_count"] == 1);
  auto missing = client.Get("/runs/nope/status");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto scores = client.Get("/runs/demo/scores");
  REQUIRE(scores);
  CHECK(scores->status == 200);
  auto page = client.Get("/index.html");
  REQUIRE(page);
  CHECK(page->status == 200);
  CHECK(page->body == "<html>annotator</html>");

  server.stop();
  thread.join();
}
