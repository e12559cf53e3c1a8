#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "relrank/active.hpp"
#include "relrank/error.hpp"
#include "relrank/experiment.hpp"

using namespace relrank;
using namespace relrank::testing;

namespace {

std::vector<SampleId> ids_upto(std::size_t n) {
  std::vector<SampleId> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(SampleId{i});
  return v;
}

/// Fast, small run configuration over a 600-sample synthetic set.
io::RunConfig small_run(std::uint64_t seed, active::Sampler sampler = active::Sampler::ubs) {
  io::RunConfig c;
  c.synth = small_synth(seed);
  c.reseed(seed);
  c.loop.sampler = sampler;
  c.loop.draws = 10;
  c.train.epochs_per_round = 4;
  return c;
}

}  // namespace

TEST_CASE("quota rounds half up") {
  CHECK(active::quota(20, 100) == 20);
  CHECK(active::quota(5, 100) == 5);
  CHECK(active::quota(5, 10) == 1);
  CHECK(active::quota(5, 30) == 2);
  CHECK(active::quota(20, 1000) == 200);
  CHECK(active::quota(5, 1000) == 50);
}

TEST_CASE("initial selection sizes and guard") {
  Engine rng(1);
  const auto pool = ids_upto(100);
  const auto sel = active::initial_selection(pool, 20, rng);
  CHECK(sel.size() == 20);
  CHECK(std::set<SampleId>(sel.begin(), sel.end()).size() == 20);
  CHECK(std::is_sorted(sel.begin(), sel.end()));
  const auto ten = ids_upto(10);
  CHECK(active::initial_selection(ten, 100, rng) == ten);
  CHECK_THROWS_AS(active::initial_selection(ten, 5, rng), ConfigError);
  Engine a(5), b(5);
  CHECK(active::initial_selection(pool, 20, a) == active::initial_selection(pool, 20, b));
}

TEST_CASE("make_pairs: one pair per id, no duplicates, no self pairs") {
  Engine rng(2);
  const auto sel = ids_upto(20);
  const auto r = active::make_pairs(sel, {}, rng);
  CHECK(r.pairs.size() + r.skipped.size() == 20);
  std::set<std::uint64_t> keys;
  for (const auto& [a, b] : r.pairs) {
    CHECK(a != b);
    CHECK(keys.insert(rank::unordered_key(a, b)).second);
  }
  std::set<SampleId> anchors;
  for (const auto& pr : r.pairs) anchors.insert(pr.first);
  CHECK(anchors.size() == r.pairs.size());
}

TEST_CASE("make_pairs: two ids give one pair and one logged skip") {
  Engine rng(3);
  const auto sel = ids_upto(2);
  const auto r = active::make_pairs(sel, {}, rng);
  REQUIRE(r.pairs.size() == 1);
  CHECK(r.skipped.size() == 1);
  CHECK(rank::unordered_key(r.pairs[0].first, r.pairs[0].second) == rank::unordered_key(SampleId{0u}, SampleId{1u}));
}

TEST_CASE("make_pairs: exhausted selections raise a pairing error") {
  Engine rng(4);
  const auto sel = ids_upto(3);
  std::unordered_set<std::uint64_t> all;
  for (std::uint32_t i = 0; i < 3; ++i)
    for (std::uint32_t j = i + 1; j < 3; ++j) all.insert(rank::unordered_key(SampleId{i}, SampleId{j}));
  CHECK_THROWS_AS(active::make_pairs(sel, all, rng), PairingError);
}

TEST_CASE("make_pairs: fallback partners come from earlier selections") {
  Engine rng(5);
  const std::vector<SampleId> sel{SampleId{0u}, SampleId{1u}};
  std::unordered_set<std::uint64_t> existing{rank::unordered_key(SampleId{0u}, SampleId{1u})};
  const std::vector<SampleId> fallback{SampleId{7u}};
  const auto r = active::make_pairs(sel, existing, rng, fallback);
  REQUIRE(r.pairs.size() == 2);
  for (const auto& [a, b] : r.pairs) CHECK(b == SampleId{7u});
}

TEST_CASE("select_uncertain takes the top of the acquisition ranking") {
  std::vector<bayes::ScorePosterior> ps;
  for (std::uint32_t i = 0; i < 100; ++i) {
    bayes::ScorePosterior p;
    p.id = SampleId{i};
    p.variance = static_cast<double>((i * 37) % 100);
    ps.push_back(p);
  }
  const auto top = active::select_uncertain(ps, 5, 100);
  REQUIRE(top.size() == 5);
  for (auto id : top) CHECK(ps[id.index()].variance >= 95.0);
  const auto all = active::select_uncertain(ps, 100, 100);
  CHECK(all == bayes::acquisition_rank(ps));
  // Tie on the boundary: lower id wins.
  for (auto& p : ps) p.variance = p.id.value < 3 ? 1.0 : (p.id.value < 10 ? 0.5 : 0.0);
  const auto tied = active::select_uncertain(ps, 5, 100);
  CHECK(tied == std::vector<SampleId>{SampleId{0u}, SampleId{1u}, SampleId{2u}, SampleId{3u}, SampleId{4u}});
  CHECK_THROWS_AS(active::select_uncertain(ps, 0.1, 100), ConfigError);
}

TEST_CASE("random_select is seeded and respects its pool") {
  const auto pool = ids_upto(100);
  Engine a(9), b(9);
  const auto x = active::random_select(pool, 5, 100, a);
  CHECK(x.size() == 5);
  CHECK(x == active::random_select(pool, 5, 100, b));
  const std::vector<SampleId> rest(pool.begin() + 50, pool.end());
  Engine c(1);
  for (auto id : active::random_select(rest, 5, 100, c)) CHECK(id.value >= 50);
}

TEST_CASE("core-set on a line") {
  std::vector<data::Sample> s{{"a", {0.0}, 0, "a"}, {"b", {1.0}, 0, "b"}, {"c", {10.0}, 0, "c"}};
  const data::Dataset ds(std::move(s));
  const auto pool = ds.all_ids();
  const std::vector<SampleId> seed{SampleId{0u}};
  CHECK(active::coreset_select(ds, pool, 100.0 / 3.0, 3, seed) == std::vector<SampleId>{SampleId{2u}});
  CHECK(active::coreset_select(ds, pool, 200.0 / 3.0, 3, seed) == std::vector<SampleId>{SampleId{2u}, SampleId{1u}});
  CHECK_THROWS_AS(active::coreset_select(ds, {}, 10, 3, seed), ConfigError);
}

TEST_CASE("core-set equals brute-force greedy k-center") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Engine rng(seed);
    std::vector<data::Sample> samples;
    std::vector<std::vector<double>> points;
    for (std::size_t i = 0; i < 200; ++i) {
      // Coarse grid coordinates force exact distance ties.
      std::vector<double> f{static_cast<double>(uniform_index(rng, 8)), static_cast<double>(uniform_index(rng, 8)),
                            static_cast<double>(uniform_index(rng, 8))};
      points.push_back(f);
      samples.push_back({"p" + std::to_string(i), f, 0, "g" + std::to_string(i)});
    }
    const data::Dataset ds(std::move(samples));
    const std::vector<SampleId> seeds{SampleId{static_cast<std::size_t>(uniform_index(rng, 200))}};
    const auto got = active::coreset_select(ds, ds.all_ids(), 10, 200, seeds);
    const auto want = brute_force_k_center(points, {seeds[0].index()}, 20);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k].index() == want[k]);
  }
}

TEST_CASE("loop config validation") {
  active::LoopConfig c;
  CHECK_NOTHROW(c.validate());
  c.r_percent = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.s_percent = 20;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.rounds = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.draws = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(active::sampler_from_string("greedy"), ConfigError);
  CHECK(active::sampler_from_string("coreset") == active::Sampler::coreset);
}

TEST_CASE("labeling ratio arithmetic on N=1000") {
  // r=20, s=5, K=6: 200 + 6 * 50 = 500 pairs.
  std::size_t total = active::quota(20, 1000);
  for (int k = 0; k < 6; ++k) total += active::quota(5, 1000);
  CHECK(total == 500);
  CHECK(static_cast<double>(total) / 1000.0 == 0.5);
}

TEST_CASE("simulated loop: ledger, ratio and no duplicate pairs") {
  for (auto sampler : {active::Sampler::ubs, active::Sampler::random, active::Sampler::coreset}) {
    auto cfg = small_run(3, sampler);
    const auto prep = experiment::prepare(cfg);
    const auto result = experiment::run_simulated(prep, cfg, std::nullopt);
    const auto& st = result.state;
    const std::size_t n = prep.split.train.size();
    CHECK(st.selected_ids_by_round.size() == 7);
    CHECK(st.metrics_by_round.size() == 7);
    std::size_t expected = 0;
    for (std::size_t k = 0; k < st.selected_ids_by_round.size(); ++k) {
      expected += st.selected_ids_by_round[k].size() - st.skipped_by_round[k];
      CHECK(st.metrics_by_round[k].labeled == expected);
    }
    CHECK(st.labeled.size() == expected);
    CHECK(st.selected_ids_by_round[0].size() == active::quota(20, n));
    for (std::size_t k = 1; k < 7; ++k) CHECK(st.selected_ids_by_round[k].size() == active::quota(5, n));
    std::set<std::uint64_t> keys;
    for (const auto& p : st.labeled.pairs()) {
      CHECK(keys.insert(rank::unordered_key(p.first, p.second)).second);
      CHECK(p.label == data::oracle_relative(prep.dataset, p.first, p.second));
    }
    std::size_t skipped = 0;
    for (auto s : st.skipped_by_round) skipped += s;
    CHECK(st.labeled.size() + skipped == active::quota(20, n) + 6 * active::quota(5, n));
  }
}

TEST_CASE("same seed, config and data reproduce the loop state bit for bit") {
  const auto cfg = small_run(11);
  const auto prep = experiment::prepare(cfg);
  const auto a = experiment::run_simulated(prep, cfg, std::nullopt);
  const auto b = experiment::run_simulated(prep, cfg, std::nullopt);
  CHECK(active::same_trajectory(a.state, b.state));
  auto other = small_run(12);
  other.synth = cfg.synth;
  const auto c = experiment::run_simulated(experiment::prepare(other), other, std::nullopt);
  CHECK_FALSE(active::same_trajectory(a.state, c.state));
}

TEST_CASE("K=0 performs only the initial training") {
  auto cfg = small_run(2);
  cfg.loop.rounds = 0;
  const auto prep = experiment::prepare(cfg);
  const auto r = experiment::run_simulated(prep, cfg, std::nullopt);
  CHECK(r.state.metrics_by_round.size() == 1);
  CHECK(r.state.selected_ids_by_round.size() == 1);
}

TEST_CASE("random and ubs share round 0 and diverge afterwards") {
  const auto u = small_run(6, active::Sampler::ubs);
  const auto r = small_run(6, active::Sampler::random);
  const auto prep = experiment::prepare(u);
  const auto a = experiment::run_simulated(prep, u, std::nullopt);
  const auto b = experiment::run_simulated(prep, r, std::nullopt);
  CHECK(a.state.selected_ids_by_round[0] == b.state.selected_ids_by_round[0]);
  CHECK(a.state.metrics_by_round[0].training == b.state.metrics_by_round[0].training);
  CHECK(a.state.selected_ids_by_round[1] != b.state.selected_ids_by_round[1]);
}

TEST_CASE("session state machine guards") {
  const auto cfg = small_run(1);
  const auto prep = experiment::prepare(cfg);
  auto session = experiment::make_session(prep, cfg, nullptr);
  CHECK(session->phase() == active::Phase::collecting);
  CHECK_THROWS_AS(session->advance(), ValidationError);
  CHECK_THROWS_AS(session->submit(0, 0.7, active::Source::sim), ValidationError);
  session->submit(0, 1.0, active::Source::sim);
  CHECK_THROWS_AS(session->submit(0, 0.0, active::Source::sim), ValidationError);
  CHECK(session->next_unlabeled() == std::size_t{1});
  CHECK(session->find_pending("r0-p1") == std::size_t{1});
  CHECK_FALSE(session->find_pending("r9-p0"));
}

TEST_CASE("scratch retraining and final multitask round") {
  auto cfg = small_run(4);
  cfg.loop.rounds = 2;
  cfg.train.retrain_mode = rank::RetrainMode::scratch;
  cfg.train.multitask = true;
  const auto prep = experiment::prepare(cfg);
  const auto r = experiment::run_simulated(prep, cfg, std::nullopt);
  std::set<SampleId> members;
  for (const auto& p : r.state.labeled.pairs()) {
    members.insert(p.first);
    members.insert(p.second);
  }
  CHECK(r.absolute_labels == members.size());
  CHECK(r.state.metrics_by_round.size() == 3);
}
