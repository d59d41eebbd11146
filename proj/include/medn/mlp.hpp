#pragma once

#include <cstdint>
#include <vector>

#include "medn/types.hpp"

namespace medn {

/// Fully connected regression baseline: K -> 150 -> 150 -> 150 -> 3 with ReLU
/// hidden units and dropout on the hidden activations during training.
struct MlpWeights {
  std::vector<MatrixXd> weights;  // layer l maps width[l] -> width[l+1]
  std::vector<VectorXd> biases;
  double dropout = 0.1;

  Index inputs() const { return weights.front().cols(); }
  Index parameter_count() const;
  bool operator==(const MlpWeights&) const = default;
};

struct MlpShape {
  Index inputs = 60;
  std::vector<Index> hidden{150, 150, 150};
  Index outputs = 3;
  double dropout = 0.1;
};

/// Glorot-uniform weights, zero biases.
MlpWeights init_mlp(const MlpShape& shape, std::uint64_t seed);

/// Inverted-dropout masks (entries 0 or 1/(1-p)), one per hidden layer.
using DropoutMasks = std::vector<MatrixXd>;
DropoutMasks sample_dropout(const MlpWeights& weights, Index batch, std::uint64_t seed);

/// Inference pass (no dropout); 3 x B outputs (v_ic, v_iso, od).
MatrixXd mlp_forward(const MlpWeights& weights, const MatrixXd& signals);

struct MlpGradients {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
};

/// Mean batch loss gradient with the given masks applied (nullptr: no dropout).
/// Returns the 3 x B training-mode outputs through `outputs`.
MlpGradients mlp_backward(const MlpWeights& weights, const MatrixXd& signals,
                          const MatrixXd& targets, const DropoutMasks* masks, MatrixXd* outputs);

/// Training-mode outputs with the given masks.
MatrixXd mlp_forward_masked(const MlpWeights& weights, const MatrixXd& signals,
                            const DropoutMasks* masks);

}  // namespace medn
