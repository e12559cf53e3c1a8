#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "relrank/error.hpp"
#include "relrank/nn.hpp"
#include "relrank/ranker.hpp"

using namespace relrank;
using namespace relrank::testing;

namespace {

nn::NetworkParams one_unit_net() {
  nn::NetworkParams p;
  p.layer_sizes = {1, 1, 1};
  p.layers = {nn::Layer::zeros(1, 1), nn::Layer::zeros(1, 1)};
  p.layers[0].weights[0] = 1.0;
  p.layers[1].weights[0] = 1.0;
  return p;
}

nn::PairLoss ranknet(const std::vector<double>& labels) {
  return [labels](std::size_t k, double a, double b) { return rank::ranknet_term(a, b, labels[k]); };
}

std::vector<nn::PairInput> inputs(const GradientCase& c) {
  std::vector<nn::PairInput> out;
  for (std::size_t k = 0; k < c.labels.size(); ++k) out.push_back({c.firsts[k], c.seconds[k]});
  return out;
}

}  // namespace

TEST_CASE("init_network shapes, zero biases and determinism") {
  const std::vector<std::size_t> sizes{4, 8, 1};
  const auto p = nn::init_network(sizes, 7);
  REQUIRE(p.layers.size() == 2);
  CHECK(p.layers[0].in == 4);
  CHECK(p.layers[0].out == 8);
  CHECK(p.layers[0].weights.size() == 32);
  CHECK(p.layers[1].in == 8);
  CHECK(p.layers[1].out == 1);
  for (const auto& l : p.layers)
    for (double b : l.bias) CHECK(b == 0.0);
  CHECK(nn::init_network(sizes, 7) == p);
  CHECK_FALSE(nn::init_network(sizes, 8) == p);
}

TEST_CASE("init_network weight scale follows 1/sqrt(fan_in)") {
  const std::vector<std::size_t> sizes{400, 300, 1};
  const auto p = nn::init_network(sizes, 3);
  const auto stats = two_pass(p.layers[0].weights);
  CHECK(std::abs(stats.mean) < 0.005);
  CHECK(std::sqrt(stats.variance) == doctest::Approx(1.0 / 20.0).epsilon(0.03));
}

TEST_CASE("init_network rejects bad layer lists") {
  CHECK_THROWS_AS(nn::init_network(std::vector<std::size_t>{4}, 0), ConfigError);
  CHECK_THROWS_AS(nn::init_network(std::vector<std::size_t>{}, 0), ConfigError);
  CHECK_THROWS_AS(nn::init_network(std::vector<std::size_t>{4, 0, 1}, 0), ConfigError);
  CHECK_THROWS_AS(nn::init_network(std::vector<std::size_t>{4, 3, 2}, 0), ConfigError);
  CHECK_THROWS_AS(nn::init_network(std::vector<std::size_t>{4, 1}, 0, 1.0), ConfigError);
}

TEST_CASE("forward on hand-built networks") {
  nn::NetworkParams zero;
  zero.layer_sizes = {3, 5, 1};
  zero.layers = {nn::Layer::zeros(3, 5), nn::Layer::zeros(5, 1)};
  const std::vector<double> x{1.0, -2.0, 3.0};
  CHECK(nn::forward(zero, x) == 0.0);

  const auto one = one_unit_net();
  const std::vector<double> two{2.0};
  CHECK(nn::forward(one, two) == 2.0);
  const std::vector<double> neg{-2.0};
  CHECK(nn::forward(one, neg) == 0.0);
}

TEST_CASE("forward scales hidden activations by the keep probability without masks") {
  auto net = one_unit_net();
  net.dropout_rate = 0.25;
  const std::vector<double> x{2.0};
  CHECK(nn::forward(net, x) == doctest::Approx(1.5));
  const auto keep = nn::keep_all_masks(net);
  CHECK(nn::forward(net, x, &keep) == 2.0);
  nn::DropoutMasks drop{{{0}}};
  CHECK(nn::forward(net, x, &drop) == 0.0);
}

TEST_CASE("forward rejects mismatched shapes") {
  const auto p = nn::init_network(std::vector<std::size_t>{3, 4, 1}, 1);
  const std::vector<double> bad{1.0, 2.0};
  CHECK_THROWS_AS(nn::forward(p, bad), ShapeError);
  const std::vector<double> ok{1.0, 2.0, 3.0};
  nn::DropoutMasks wrong{{{1, 1}}};
  CHECK_THROWS_AS(nn::forward(p, ok, &wrong), ShapeError);
}

TEST_CASE("rate zero: sampled masks are all ones and forward is bit-identical") {
  const auto p = nn::init_network(std::vector<std::size_t>{6, 10, 7, 1}, 11, 0.0);
  Engine rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto m = nn::sample_masks(p, rng);
    for (const auto& layer : m.hidden)
      for (auto bit : layer) CHECK(bit == 1);
    const auto x = random_vector(rng, 6);
    CHECK(nn::forward(p, x, &m) == nn::forward(p, x));
  }
}

TEST_CASE("mask keep fraction at rate 0.2 over 10,000 bits") {
  const auto p = nn::init_network(std::vector<std::size_t>{2, 100, 100, 1}, 0, 0.2);
  Engine rng(2024);
  std::size_t kept = 0, total = 0;
  while (total < 10000) {
    for (const auto& layer : nn::sample_masks(p, rng).hidden)
      for (auto bit : layer) {
        kept += bit;
        ++total;
      }
  }
  const double frac = static_cast<double>(kept) / static_cast<double>(total);
  CHECK(frac == doctest::Approx(0.8).epsilon(0.025));
  CHECK(std::abs(frac - 0.8) <= 0.02);
}

TEST_CASE("masks are reproducible from the seed") {
  const auto p = nn::init_network(std::vector<std::size_t>{3, 20, 1}, 0, 0.5);
  Engine a(99), b(99);
  CHECK(nn::sample_masks(p, a) == nn::sample_masks(p, b));
}

TEST_CASE("symmetric equal-score pair has zero final-bias gradient") {
  auto p = nn::init_network(std::vector<std::size_t>{3, 5, 1}, 4, 0.0, 0.0);
  const std::vector<double> x{0.3, -0.1, 0.7};
  const std::vector<double> labels{0.5};
  const std::vector<nn::PairInput> batch{{x, x}};
  const std::vector<nn::PairMasks> masks{{nn::keep_all_masks(p), nn::keep_all_masks(p)}};
  const auto g = nn::gradients(p, batch, masks, ranknet(labels));
  CHECK(g.layers.back().bias[0] == 0.0);
}

TEST_CASE("penalty-only batch gives exactly 2*lambda*W") {
  const auto p = nn::init_network(std::vector<std::size_t>{5, 6, 4, 1}, 21, 0.2, 0.03);
  const auto g = nn::gradients(p, {}, {}, ranknet({}));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (std::size_t i = 0; i < p.layers[l].weights.size(); ++i)
      CHECK(g.layers[l].weights[i] == 2.0 * 0.03 * p.layers[l].weights[i]);
    for (double b : g.layers[l].bias) CHECK(b == 0.0);
  }
  CHECK(g.objective == p.penalty());
  CHECK(g.data_term == 0.0);
}

TEST_CASE("analytic gradients match central differences on 20 random networks") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto c = random_gradient_case(seed);
    const std::vector<nn::PairInput> batch = inputs(c);
    const auto g = nn::gradients(c.params, batch, c.masks, ranknet(c.labels));
    CHECK(g.objective == doctest::Approx(case_objective(c, c.params)).epsilon(1e-12));
    CHECK(max_gradient_deviation(c, g) < 1e-5);
  }
}

TEST_CASE("non-finite gradients are reported with the layer") {
  const auto p = nn::init_network(std::vector<std::size_t>{2, 3, 1}, 0, 0.0, 0.0);
  const std::vector<double> x{1.0, 1.0}, y{0.0, 0.0};
  const std::vector<nn::PairInput> batch{{x, y}};
  const std::vector<nn::PairMasks> masks{{nn::keep_all_masks(p), nn::keep_all_masks(p)}};
  const nn::PairLoss nan_loss = [](std::size_t, double, double) {
    return nn::PairTerm{0.0, std::nan(""), 0.0};
  };
  try {
    nn::gradients(p, batch, masks, nan_loss);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("layer") != std::string::npos);
  }
}

TEST_CASE("first Adam step moves a parameter by about the learning rate") {
  nn::NetworkParams p;
  p.layer_sizes = {1, 1};
  p.layers = {nn::Layer::zeros(1, 1)};
  p.layers[0].weights[0] = 0.5;
  auto state = nn::make_optimizer(p, {.learning_rate = 1e-3});
  nn::GradientSet g;
  g.layers = {nn::Layer::zeros(1, 1)};
  g.layers[0].weights[0] = 1.0;
  nn::optimizer_step(p, g, state);
  CHECK(std::abs((p.layers[0].weights[0] - 0.5) + 1e-3) < 1e-6);
  CHECK(p.layers[0].bias[0] == 0.0);
  CHECK(state.step == 1);
}

TEST_CASE("zero gradient leaves parameters unchanged and decays moments") {
  auto p = nn::init_network(std::vector<std::size_t>{3, 4, 1}, 8);
  auto state = nn::make_optimizer(p);
  nn::GradientSet g;
  for (const auto& l : p.layers) g.layers.push_back(nn::Layer::zeros(l.in, l.out));
  g.layers[0].weights[0] = 2.0;
  nn::optimizer_step(p, g, state);
  const double m1 = state.first_moment[0].weights[0];
  const double v1 = state.second_moment[0].weights[0];
  const auto before = p;
  g.layers[0].weights[0] = 0.0;
  nn::optimizer_step(p, g, state);
  CHECK(state.first_moment[0].weights[0] == doctest::Approx(0.9 * m1));
  CHECK(state.second_moment[0].weights[0] == doctest::Approx(0.999 * v1));
  // The first-moment carry still moves this weight; every untouched one stays put.
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    for (std::size_t i = (l == 0 ? 1 : 0); i < p.layers[l].weights.size(); ++i)
      CHECK(p.layers[l].weights[i] == before.layers[l].weights[i]);
}

TEST_CASE("optimizer rejects a non-positive learning rate") {
  const auto p = nn::init_network(std::vector<std::size_t>{2, 1}, 0);
  CHECK_THROWS_AS(nn::make_optimizer(p, {.learning_rate = 0.0}), ConfigError);
}

TEST_CASE("identical seeds give identical trajectories") {
  auto run = [] {
    const auto c = random_gradient_case(77);
    auto p = c.params;
    auto state = nn::make_optimizer(p);
    const auto batch = inputs(c);
    for (int step = 0; step < 25; ++step) nn::optimizer_step(p, nn::gradients(p, batch, c.masks, ranknet(c.labels)), state);
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("penalty additivity") {
  auto p = nn::init_network(std::vector<std::size_t>{4, 6, 1}, 12, 0.2, 0.0);
  double sq = 0.0;
  for (const auto& l : p.layers)
    for (double w : l.weights) sq += w * w;
  p.weight_decay = 0.07;
  CHECK(p.penalty() == 0.07 * sq);
  CHECK(p.weight_sq_norm() == sq);
}
