#include "relrank/nn.hpp"

#include <cmath>
#include <string>

#include "relrank/error.hpp"

namespace relrank::nn {

double NetworkParams::weight_sq_norm() const {
  double total = 0.0;
  for (const Layer& layer : layers)
    for (double w : layer.weights) total += w * w;
  return total;
}

void NetworkParams::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("network needs at least an input and an output layer");
  if (layer_sizes.back() != 1) throw ConfigError("final layer must have exactly one unit");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw ConfigError("layer sizes must be positive");
  if (layers.size() != layer_sizes.size() - 1) throw ShapeError("layer count does not match layer_sizes");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    if (layer.in != layer_sizes[l] || layer.out != layer_sizes[l + 1] ||
        layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out)
      throw ShapeError("layer " + std::to_string(l) + " does not chain with layer_sizes");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
}

NetworkParams init_network(std::span<const std::size_t> layer_sizes, std::uint64_t seed, double dropout_rate,
                           double weight_decay) {
  NetworkParams params;
  params.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  params.dropout_rate = dropout_rate;
  params.weight_decay = weight_decay;
  if (params.layer_sizes.size() < 2) throw ConfigError("network needs at least an input and an output layer");
  for (std::size_t s : params.layer_sizes)
    if (s == 0) throw ConfigError("layer sizes must be positive");

  Engine rng = make_engine(seed, Stream::init);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < params.layer_sizes.size(); ++l) {
    Layer layer = Layer::zeros(params.layer_sizes[l], params.layer_sizes[l + 1]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double& w : layer.weights) w = scale * gauss(rng);
    params.layers.push_back(std::move(layer));
  }
  params.validate();
  return params;
}

namespace {

void check_input(const NetworkParams& params, std::span<const double> features, const DropoutMasks* masks) {
  if (features.size() != params.input_dim())
    throw ShapeError("expected " + std::to_string(params.input_dim()) + " features, got " +
                     std::to_string(features.size()));
  if (!masks) return;
  if (masks->hidden.size() != params.num_hidden()) throw ShapeError("mask count does not match hidden layers");
  for (std::size_t h = 0; h < masks->hidden.size(); ++h)
    if (masks->hidden[h].size() != params.layers[h].out)
      throw ShapeError("mask " + std::to_string(h) + " does not match its layer width");
}

/// Activations of every layer; acts[0] is the input, acts.back() the score.
/// pre[l] holds the pre-activation of layer l's output.
struct Trace {
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> pre;
};

void affine(const Layer& layer, std::span<const double> x, std::vector<double>& z) {
  z.assign(layer.bias.begin(), layer.bias.end());
  for (std::size_t i = 0; i < layer.in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = layer.weights.data() + i * layer.out;
    for (std::size_t o = 0; o < layer.out; ++o) z[o] += xi * row[o];
  }
}

void run_forward(const NetworkParams& params, std::span<const double> features, const DropoutMasks* masks,
                 Trace& trace) {
  const std::size_t n_layers = params.layers.size();
  trace.acts.resize(n_layers + 1);
  trace.pre.resize(n_layers);
  trace.acts[0].assign(features.begin(), features.end());
  const double keep = 1.0 - params.dropout_rate;
  for (std::size_t l = 0; l < n_layers; ++l) {
    affine(params.layers[l], trace.acts[l], trace.pre[l]);
    std::vector<double>& a = trace.acts[l + 1];
    a = trace.pre[l];
    if (l + 1 == n_layers) break;
    for (std::size_t u = 0; u < a.size(); ++u) {
      double v = a[u] > 0.0 ? a[u] : 0.0;
      if (masks)
        v = masks->hidden[l][u] ? v : 0.0;
      else
        v *= keep;
      a[u] = v;
    }
  }
}

void backward(const NetworkParams& params, const Trace& trace, const DropoutMasks& masks, double d_score,
              std::vector<Layer>& grads) {
  std::vector<double> delta{d_score};
  std::vector<double> upstream;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Layer& layer = params.layers[l];
    Layer& g = grads[l];
    const std::vector<double>& a = trace.acts[l];
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      double* row = g.weights.data() + i * layer.out;
      for (std::size_t o = 0; o < layer.out; ++o) row[o] += ai * delta[o];
    }
    for (std::size_t o = 0; o < layer.out; ++o) g.bias[o] += delta[o];
    if (l == 0) break;

    upstream.assign(layer.in, 0.0);
    for (std::size_t i = 0; i < layer.in; ++i) {
      const std::uint8_t kept = masks.hidden[l - 1][i];
      if (!kept || !(trace.pre[l - 1][i] > 0.0)) continue;
      const double* row = layer.weights.data() + i * layer.out;
      double s = 0.0;
      for (std::size_t o = 0; o < layer.out; ++o) s += row[o] * delta[o];
      upstream[i] = s;
    }
    delta.swap(upstream);
  }
}

}  // namespace

double forward(const NetworkParams& params, std::span<const double> features, const DropoutMasks* masks) {
  check_input(params, features, masks);
  Trace trace;
  run_forward(params, features, masks, trace);
  return trace.acts.back()[0];
}

DropoutMasks sample_masks(const NetworkParams& params, Engine& rng) {
  DropoutMasks masks;
  masks.hidden.resize(params.num_hidden());
  const double p = params.dropout_rate;
  for (std::size_t h = 0; h < masks.hidden.size(); ++h) {
    auto& bits = masks.hidden[h];
    bits.resize(params.layers[h].out);
    for (auto& b : bits) b = p == 0.0 ? 1 : static_cast<std::uint8_t>(uniform01(rng) >= p);
  }
  return masks;
}

DropoutMasks keep_all_masks(const NetworkParams& params) {
  DropoutMasks masks;
  masks.hidden.resize(params.num_hidden());
  for (std::size_t h = 0; h < masks.hidden.size(); ++h) masks.hidden[h].assign(params.layers[h].out, 1);
  return masks;
}

GradientSet gradients(const NetworkParams& params, std::span<const PairInput> batch,
                      std::span<const PairMasks> masks, const PairLoss& loss) {
  if (masks.size() != batch.size()) throw ShapeError("one mask pair is required per batch pair");
  GradientSet out;
  out.layers.reserve(params.layers.size());
  for (const Layer& layer : params.layers) out.layers.push_back(Layer::zeros(layer.in, layer.out));

  Trace first, second;
  for (std::size_t p = 0; p < batch.size(); ++p) {
    check_input(params, batch[p].first, &masks[p].first);
    check_input(params, batch[p].second, &masks[p].second);
    run_forward(params, batch[p].first, &masks[p].first, first);
    run_forward(params, batch[p].second, &masks[p].second, second);
    const PairTerm term = loss(p, first.acts.back()[0], second.acts.back()[0]);
    out.data_term += term.value;
    if (term.d_first != 0.0) backward(params, first, masks[p].first, term.d_first, out.layers);
    if (term.d_second != 0.0) backward(params, second, masks[p].second, term.d_second, out.layers);
  }

  const double lambda = params.weight_decay;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Layer& g = out.layers[l];
    if (lambda != 0.0)
      for (std::size_t k = 0; k < g.weights.size(); ++k) g.weights[k] += 2.0 * lambda * params.layers[l].weights[k];
    for (double v : g.weights)
      if (!std::isfinite(v)) throw NumericalError("non-finite weight gradient in layer " + std::to_string(l));
    for (double v : g.bias)
      if (!std::isfinite(v)) throw NumericalError("non-finite bias gradient in layer " + std::to_string(l));
  }
  out.objective = out.data_term + params.penalty();
  return out;
}

OptimizerState make_optimizer(const NetworkParams& params, AdamConfig config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  OptimizerState state;
  state.config = config;
  for (const Layer& layer : params.layers) {
    state.first_moment.push_back(Layer::zeros(layer.in, layer.out));
    state.second_moment.push_back(Layer::zeros(layer.in, layer.out));
  }
  return state;
}

namespace {

void adam_block(std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, const AdamConfig& c, double correction1, double correction2) {
  for (std::size_t k = 0; k < theta.size(); ++k) {
    m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
    v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
    const double m_hat = m[k] / correction1;
    const double v_hat = v[k] / correction2;
    theta[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

void optimizer_step(NetworkParams& params, const GradientSet& grads, OptimizerState& state) {
  if (grads.layers.size() != params.layers.size() || state.first_moment.size() != params.layers.size())
    throw ShapeError("optimizer state does not match the network");
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.config.beta1, t);
  const double correction2 = 1.0 - std::pow(state.config.beta2, t);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    adam_block(params.layers[l].weights, grads.layers[l].weights, state.first_moment[l].weights,
               state.second_moment[l].weights, state.config, correction1, correction2);
    adam_block(params.layers[l].bias, grads.layers[l].bias, state.first_moment[l].bias,
               state.second_moment[l].bias, state.config, correction1, correction2);
  }
}

}  // namespace relrank::nn
