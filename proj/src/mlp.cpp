#include "medn/mlp.hpp"

#include <cmath>
#include <random>

#include "medn/error.hpp"

namespace medn {

Index MlpWeights::parameter_count() const {
  Index count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) count += weights[l].size() + biases[l].size();
  return count;
}

MlpWeights init_mlp(const MlpShape& shape, std::uint64_t seed) {
  if (shape.inputs < 1 || shape.outputs < 1) throw DimensionError("init_mlp: empty layer");
  if (!(shape.dropout >= 0.0 && shape.dropout < 1.0))
    throw ConfigError("init_mlp: dropout fraction must lie in [0, 1)");
  std::vector<Index> widths{shape.inputs};
  widths.insert(widths.end(), shape.hidden.begin(), shape.hidden.end());
  widths.push_back(shape.outputs);

  std::mt19937_64 rng(seed);
  MlpWeights net;
  net.dropout = shape.dropout;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index fan_in = widths[l];
    const Index fan_out = widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    MatrixXd w(fan_out, fan_in);
    for (Index r = 0; r < fan_out; ++r)
      for (Index c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(VectorXd::Zero(fan_out));
  }
  return net;
}

DropoutMasks sample_dropout(const MlpWeights& weights, Index batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - weights.dropout);
  const double scale = 1.0 / (1.0 - weights.dropout);
  DropoutMasks masks;
  for (std::size_t l = 0; l + 1 < weights.weights.size(); ++l) {
    MatrixXd mask(weights.weights[l].rows(), batch);
    for (Index c = 0; c < batch; ++c)
      for (Index r = 0; r < mask.rows(); ++r) mask(r, c) = keep(rng) ? scale : 0.0;
    masks.push_back(std::move(mask));
  }
  return masks;
}

namespace {

void check_input(const MlpWeights& weights, const MatrixXd& signals) {
  if (weights.weights.empty()) throw DimensionError("mlp: no layers");
  if (signals.rows() != weights.inputs()) throw DimensionError("mlp: signal length mismatch");
}

// Activations after each hidden layer (post-ReLU, post-mask) and the output.
std::vector<MatrixXd> forward_layers(const MlpWeights& weights, const MatrixXd& signals,
                                     const DropoutMasks* masks) {
  check_input(weights, signals);
  std::vector<MatrixXd> acts;
  acts.reserve(weights.weights.size() + 1);
  acts.push_back(signals);
  const std::size_t last = weights.weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    MatrixXd z = weights.weights[l] * acts.back();
    z.colwise() += weights.biases[l];
    if (l < last) {
      z = z.cwiseMax(0.0);
      if (masks) z.array() *= (*masks)[l].array();
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

}  // namespace

MatrixXd mlp_forward(const MlpWeights& weights, const MatrixXd& signals) {
  return forward_layers(weights, signals, nullptr).back();
}

MatrixXd mlp_forward_masked(const MlpWeights& weights, const MatrixXd& signals,
                            const DropoutMasks* masks) {
  return forward_layers(weights, signals, masks).back();
}

MlpGradients mlp_backward(const MlpWeights& weights, const MatrixXd& signals,
                          const MatrixXd& targets, const DropoutMasks* masks, MatrixXd* outputs) {
  const std::vector<MatrixXd> acts = forward_layers(weights, signals, masks);
  const Index batch = signals.cols();
  if (targets.rows() != acts.back().rows() || targets.cols() != batch)
    throw DimensionError("mlp_backward: target shape mismatch");
  if (batch == 0) throw DimensionError("mlp_backward: empty batch");
  if (outputs) *outputs = acts.back();

  const std::size_t n_layers = weights.weights.size();
  MlpGradients grads;
  grads.weights.resize(n_layers);
  grads.biases.resize(n_layers);
  MatrixXd delta = (2.0 / static_cast<double>(batch)) * (acts.back() - targets);
  for (std::size_t l = n_layers; l-- > 0;) {
    grads.weights[l].noalias() = delta * acts[l].transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    MatrixXd back = weights.weights[l].transpose() * delta;
    // acts[l] is relu(z) * mask: zero wherever either factor is zero.
    if (masks) back.array() *= (*masks)[l - 1].array();
    delta = (acts[l].array() > 0.0).select(back, 0.0);
  }
  return grads;
}

}  // namespace medn
