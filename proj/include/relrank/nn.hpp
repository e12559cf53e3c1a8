#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "relrank/rng.hpp"

namespace relrank::nn {

/// One fully connected layer. Weights are stored fan-in major:
/// `weights[i * out + o]` connects input unit i to output unit o.
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(std::size_t i, std::size_t o) { return weights[i * out + o]; }
  double w(std::size_t i, std::size_t o) const { return weights[i * out + o]; }

  static Layer zeros(std::size_t in, std::size_t out) {
    return Layer{in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)};
  }
  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Feedforward scorer: input -> ReLU hidden layers -> one linear output.
struct NetworkParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<Layer> layers;
  double dropout_rate = 0.0;
  double weight_decay = 0.0;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_hidden() const { return layers.empty() ? 0 : layers.size() - 1; }

  /// Sum of squared Frobenius norms of the weight matrices (biases excluded).
  double weight_sq_norm() const;
  double penalty() const { return weight_decay * weight_sq_norm(); }

  /// Throws ShapeError/ConfigError when the invariants do not hold.
  void validate() const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// One keep bit per hidden unit; the input and output layers are never masked.
struct DropoutMasks {
  std::vector<std::vector<std::uint8_t>> hidden;
  friend bool operator==(const DropoutMasks&, const DropoutMasks&) = default;
};

NetworkParams init_network(std::span<const std::size_t> layer_sizes, std::uint64_t seed,
                           double dropout_rate = 0.2, double weight_decay = 1e-4);

/// Scalar score. With masks, dropped units output zero and kept units are
/// unscaled; without masks every hidden activation is scaled by the keep
/// probability so the output matches the dropout expectation.
double forward(const NetworkParams& params, std::span<const double> features,
               const DropoutMasks* masks = nullptr);

DropoutMasks sample_masks(const NetworkParams& params, Engine& rng);
DropoutMasks keep_all_masks(const NetworkParams& params);

/// Loss contribution of one pair and its slopes w.r.t. the two scores.
struct PairTerm {
  double value = 0.0;
  double d_first = 0.0;
  double d_second = 0.0;
};
using PairLoss = std::function<PairTerm(std::size_t pair, double score_first, double score_second)>;

struct PairInput {
  std::span<const double> first;
  std::span<const double> second;
};

struct PairMasks {
  DropoutMasks first;
  DropoutMasks second;
};

/// Gradient of (sum of pair terms + weight_decay * sum ||W||_F^2), shaped like the params.
struct GradientSet {
  std::vector<Layer> layers;
  double objective = 0.0;  // the value being differentiated
  double data_term = 0.0;  // objective without the penalty
};

/// Reverse-mode gradient over a batch of pairs. Both members of a pair go
/// through the same parameters, each with its own mask set. Throws
/// NumericalError naming the layer if any derivative is not finite.
GradientSet gradients(const NetworkParams& params, std::span<const PairInput> batch,
                      std::span<const PairMasks> masks, const PairLoss& loss);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::vector<Layer> first_moment;
  std::vector<Layer> second_moment;
  std::uint64_t step = 0;
  AdamConfig config;
};

OptimizerState make_optimizer(const NetworkParams& params, AdamConfig config = {});

/// Bias-corrected adaptive-moment update, in place.
void optimizer_step(NetworkParams& params, const GradientSet& grads, OptimizerState& state);

}  // namespace relrank::nn
