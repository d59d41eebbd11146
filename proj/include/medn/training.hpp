#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "medn/microstructure.hpp"
#include "medn/mlp.hpp"
#include "medn/network.hpp"

namespace medn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates for a list of parameter tensors.
struct AdamState {
  std::vector<MatrixXd> first;
  std::vector<MatrixXd> second;
  long step = 0;
};

/// Bias-corrected Adam update applied in place to every parameter tensor.
void adam_update(std::span<MatrixXd* const> params, std::span<const MatrixXd> grads,
                 AdamState& state, const AdamConfig& config);

/// Adam on W, S and H, then H projected onto the nonnegative orthant.
void adam_step(MednWeights<double>& weights, const MednGradients<double>& grads, AdamState& state,
               const AdamConfig& config);

struct TrainConfig {
  AdamConfig adam;
  Index batch_size = 128;
  int epochs = 10;
  double validation_fraction = 0.1;
  std::uint64_t seed = 20170901;
  /// Workers per mini-batch (0 = all cores). Mini-batches are split into fixed
  /// chunks whose gradients are summed in index order, so results do not depend
  /// on the worker count.
  int threads = 1;
  /// Return the weights of the epoch with the lowest validation loss instead of
  /// the last epoch.
  bool keep_best = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  LossComponents train;
  LossComponents validation;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based
  Index training_count = 0;
  Index validation_count = 0;
};

/// Signals (K x n) and targets (3 x n, rows v_ic, v_iso, od).
struct TrainingSet {
  MatrixXd signals;
  Matrix3Xd targets;
};

/// Seeded shuffle of [0, n); the first round(fraction * n) indices form the
/// validation set, the rest the training set.
struct SplitIndices {
  std::vector<Index> training;
  std::vector<Index> validation;
};
SplitIndices split_dataset(Index n, double validation_fraction, std::uint64_t seed);

std::pair<MednWeights<double>, TrainHistory> train_medn(MednWeights<double> initial,
                                                        const TrainingSet& data,
                                                        const TrainConfig& config);

std::pair<MlpWeights, TrainHistory> train_mlp(MlpWeights initial, const TrainingSet& data,
                                              const TrainConfig& config);

/// Clamped predictions; unclamped values go to `raw` when given.
std::vector<Microstructure> predict_batch(const MednWeights<double>& weights,
                                          const MatrixXd& signals,
                                          std::vector<Microstructure>* raw = nullptr,
                                          int threads = 1);

std::vector<Microstructure> mlp_predict_batch(const MlpWeights& weights, const MatrixXd& signals,
                                              std::vector<Microstructure>* raw = nullptr,
                                              int threads = 1);

}  // namespace medn
