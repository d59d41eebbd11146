#include "medn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "medn/error.hpp"
#include "medn/parallel.hpp"

namespace medn {

void adam_update(std::span<MatrixXd* const> params, std::span<const MatrixXd> grads,
                 AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size()) throw DimensionError("adam: parameter/gradient count differs");
  if (state.first.empty()) {
    for (MatrixXd* p : params) {
      state.first.push_back(MatrixXd::Zero(p->rows(), p->cols()));
      state.second.push_back(MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first.size() != params.size()) throw DimensionError("adam: state does not match parameters");
  ++state.step;
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    MatrixXd& p = *params[i];
    const MatrixXd& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw DimensionError("adam: gradient shape differs from parameter");
    state.first[i] = config.beta1 * state.first[i] + (1.0 - config.beta1) * g;
    state.second[i] = config.beta2 * state.second[i] + (1.0 - config.beta2) * g.cwiseAbs2();
    p.array() -= config.learning_rate * (state.first[i].array() / correction1) /
                 ((state.second[i].array() / correction2).sqrt() + config.epsilon);
  }
}

void adam_step(MednWeights<double>& weights, const MednGradients<double>& grads, AdamState& state,
               const AdamConfig& config) {
  MatrixXd* params[] = {&weights.W, &weights.S, &weights.H};
  const MatrixXd g[] = {grads.W, grads.S, grads.H};
  adam_update(params, g, state, config);
  weights.H = weights.H.cwiseMax(0.0);
}

void TrainConfig::validate() const {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("TrainConfig: validation fraction must lie in (0, 1)");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch size must be >= 1");
  if (epochs < 1) throw ConfigError("TrainConfig: need at least one epoch");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("TrainConfig: learning rate must be positive");
}

SplitIndices split_dataset(Index n, double validation_fraction, std::uint64_t seed) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(validation_fraction * static_cast<double>(n)));
  SplitIndices split;
  split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.training.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  return split;
}

namespace {

constexpr Index kChunk = 32;

struct MednAdapter {
  using Weights = MednWeights<double>;

  static std::vector<MatrixXd> chunk_gradient(const Weights& w, const MatrixXd& y,
                                              const MatrixXd& t, std::uint64_t,
                                              LossComponents& loss) {
    const ForwardTrace<double> trace = forward(w, y);
    loss = batch_loss<double>(trace.outputs, t);
    MednGradients<double> g = backward(w, y, trace, t);
    return {std::move(g.W), std::move(g.S), std::move(g.H)};
  }

  static void apply(Weights& w, const std::vector<MatrixXd>& grads, AdamState& state,
                    const AdamConfig& config) {
    adam_step(w, MednGradients<double>{grads[0], grads[1], grads[2]}, state, config);
  }

  static MatrixXd predict(const Weights& w, const MatrixXd& y) { return forward_outputs(w, y); }
};

struct MlpAdapter {
  using Weights = MlpWeights;

  static std::vector<MatrixXd> chunk_gradient(const Weights& w, const MatrixXd& y,
                                              const MatrixXd& t, std::uint64_t seed,
                                              LossComponents& loss) {
    const DropoutMasks masks = sample_dropout(w, y.cols(), seed);
    MatrixXd outputs;
    MlpGradients g = mlp_backward(w, y, t, &masks, &outputs);
    loss = batch_loss<double>(outputs, t);
    std::vector<MatrixXd> flat;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      flat.push_back(std::move(g.weights[l]));
      flat.push_back(std::move(g.biases[l]));
    }
    return flat;
  }

  static void apply(Weights& w, const std::vector<MatrixXd>& grads, AdamState& state,
                    const AdamConfig& config) {
    // Biases are updated through matrix views and copied back.
    std::vector<MatrixXd> biases;
    for (const VectorXd& b : w.biases) biases.emplace_back(b);
    std::vector<MatrixXd*> params;
    for (std::size_t l = 0; l < w.weights.size(); ++l) {
      params.push_back(&w.weights[l]);
      params.push_back(&biases[l]);
    }
    adam_update(params, grads, state, config);
    for (std::size_t l = 0; l < w.biases.size(); ++l) w.biases[l] = biases[l].col(0);
  }

  static MatrixXd predict(const Weights& w, const MatrixXd& y) { return mlp_forward(w, y); }
};

template <class Adapter>
LossComponents evaluate_loss(const typename Adapter::Weights& w, const MatrixXd& signals,
                             const MatrixXd& targets, int threads) {
  const Index n = signals.cols();
  const Index blocks = (n + 1023) / 1024;
  MatrixXd outputs(3, n);
  parallel_for(blocks, threads, [&](Index b) {
    const Index begin = b * 1024;
    const Index len = std::min<Index>(1024, n - begin);
    outputs.middleCols(begin, len) = Adapter::predict(w, signals.middleCols(begin, len));
  });
  return batch_loss<double>(outputs, targets);
}

void accumulate(LossComponents& into, const LossComponents& add, double weight) {
  into.v_ic += weight * add.v_ic;
  into.v_iso += weight * add.v_iso;
  into.od += weight * add.od;
}

template <class Adapter>
std::pair<typename Adapter::Weights, TrainHistory> run_training(typename Adapter::Weights weights,
                                                                const TrainingSet& data,
                                                                const TrainConfig& config) {
  config.validate();
  const Index n = data.signals.cols();
  if (n == 0) throw DataError("train: empty dataset");
  if (n < 10) throw DataError("train: need at least 10 samples");
  if (data.targets.cols() != n) throw DimensionError("train: signal and target counts differ");

  const SplitIndices split = split_dataset(n, config.validation_fraction, config.seed);
  if (split.training.empty() || split.validation.empty())
    throw DataError("train: split left an empty training or validation set");
  const MatrixXd val_signals = data.signals(Eigen::all, split.validation);
  const MatrixXd val_targets = data.targets(Eigen::all, split.validation);

  TrainHistory history;
  history.training_count = static_cast<Index>(split.training.size());
  history.validation_count = static_cast<Index>(split.validation.size());

  AdamState state;
  typename Adapter::Weights best = weights;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<Index> order = split.training;
  const Index n_train = static_cast<Index>(order.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LossComponents epoch_loss;
    Index batch_index = 0;
    for (Index start = 0; start < n_train; start += config.batch_size, ++batch_index) {
      const Index len = std::min(config.batch_size, n_train - start);
      const std::vector<Index> idx(order.begin() + start, order.begin() + start + len);
      const MatrixXd y = data.signals(Eigen::all, idx);
      const MatrixXd t = data.targets(Eigen::all, idx);

      const Index chunks = (len + kChunk - 1) / kChunk;
      std::vector<std::vector<MatrixXd>> chunk_grads(static_cast<std::size_t>(chunks));
      std::vector<LossComponents> chunk_loss(static_cast<std::size_t>(chunks));
      const std::uint64_t batch_seed =
          mix_seed(mix_seed(config.seed, static_cast<std::uint64_t>(epoch) << 32),
                   static_cast<std::uint64_t>(batch_index));
      parallel_for(chunks, config.threads, [&](Index c) {
        const Index c_begin = c * kChunk;
        const Index c_len = std::min(kChunk, len - c_begin);
        chunk_grads[static_cast<std::size_t>(c)] = Adapter::chunk_gradient(
            weights, y.middleCols(c_begin, c_len), t.middleCols(c_begin, c_len),
            mix_seed(batch_seed, static_cast<std::uint64_t>(c)),
            chunk_loss[static_cast<std::size_t>(c)]);
      });

      // Chunk means weighted by chunk share, summed in chunk order.
      std::vector<MatrixXd> grads = std::move(chunk_grads[0]);
      const double first_share = static_cast<double>(std::min(kChunk, len)) / static_cast<double>(len);
      for (MatrixXd& g : grads) g *= first_share;
      LossComponents batch;
      accumulate(batch, chunk_loss[0], first_share);
      for (Index c = 1; c < chunks; ++c) {
        const Index c_len = std::min(kChunk, len - c * kChunk);
        const double share = static_cast<double>(c_len) / static_cast<double>(len);
        for (std::size_t i = 0; i < grads.size(); ++i)
          grads[i] += share * chunk_grads[static_cast<std::size_t>(c)][i];
        accumulate(batch, chunk_loss[static_cast<std::size_t>(c)], share);
      }
      accumulate(epoch_loss, batch, static_cast<double>(len) / static_cast<double>(n_train));
      Adapter::apply(weights, grads, state, config.adam);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train = epoch_loss;
    record.validation = evaluate_loss<Adapter>(weights, val_signals, val_targets, config.threads);
    history.epochs.push_back(record);
    if (record.validation.total() < best_loss) {
      best_loss = record.validation.total();
      best = weights;
      history.best_epoch = epoch;
    }
  }
  if (!config.keep_best) {
    history.best_epoch = config.epochs;
    return {std::move(weights), std::move(history)};
  }
  return {std::move(best), std::move(history)};
}

template <class Adapter>
std::vector<Microstructure> predict_with(const typename Adapter::Weights& w, const MatrixXd& signals,
                                         std::vector<Microstructure>* raw, int threads) {
  const Index n = signals.cols();
  Matrix3Xd outputs(3, n);
  const Index blocks = (n + 255) / 256;
  parallel_for(blocks, threads, [&](Index b) {
    const Index begin = b * 256;
    const Index len = std::min<Index>(256, n - begin);
    outputs.middleCols(begin, len) = Adapter::predict(w, signals.middleCols(begin, len));
  });
  std::vector<Microstructure> values = from_matrix(outputs);
  if (raw) *raw = values;
  for (Microstructure& m : values) m = m.clamped();
  return values;
}

}  // namespace

std::pair<MednWeights<double>, TrainHistory> train_medn(MednWeights<double> initial,
                                                        const TrainingSet& data,
                                                        const TrainConfig& config) {
  initial.validate();
  if (data.signals.rows() != initial.inputs())
    throw DimensionError("train: signal length does not match the network input");
  return run_training<MednAdapter>(std::move(initial), data, config);
}

std::pair<MlpWeights, TrainHistory> train_mlp(MlpWeights initial, const TrainingSet& data,
                                              const TrainConfig& config) {
  if (data.signals.rows() != initial.inputs())
    throw DimensionError("train: signal length does not match the network input");
  return run_training<MlpAdapter>(std::move(initial), data, config);
}

std::vector<Microstructure> predict_batch(const MednWeights<double>& weights,
                                          const MatrixXd& signals,
                                          std::vector<Microstructure>* raw, int threads) {
  if (signals.rows() != weights.inputs())
    throw DimensionError("predict: signal length does not match the network input");
  return predict_with<MednAdapter>(weights, signals, raw, threads);
}

std::vector<Microstructure> mlp_predict_batch(const MlpWeights& weights, const MatrixXd& signals,
                                              std::vector<Microstructure>* raw, int threads) {
  if (signals.rows() != weights.inputs())
    throw DimensionError("predict: signal length does not match the network input");
  return predict_with<MlpAdapter>(weights, signals, raw, threads);
}

}  // namespace medn
