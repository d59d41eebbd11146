#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "medn/dictionary.hpp"
#include "medn/microstructure.hpp"
#include "medn/types.hpp"

namespace medn {

/// Learnable tensors and fixed hyperparameters of the two-stage network.
///
/// Stage one unrolls `layers` thresholded updates f <- h_lambda(W y + S f) with
/// one S shared by every layer. Stage two reads v_iso from the last of the N
/// outputs, normalizes the other N - 1 with the tau floor, and maps them
/// through the nonnegative H onto (v_ic, kappa).
template <typename Scalar>
struct MednWeights {
  Matrix<Scalar> W;  // N x K
  Matrix<Scalar> S;  // N x N
  Matrix<Scalar> H;  // 2 x (N - 1), entries >= 0
  Scalar lambda = Scalar(0.01);
  Scalar tau = Scalar(1e-10);
  int layers = 8;

  Index inputs() const { return W.cols(); }
  Index hidden() const { return W.rows(); }

  void validate() const;
  template <typename Other>
  MednWeights<Other> cast() const {
    return {W.template cast<Other>(), S.template cast<Other>(), H.template cast<Other>(),
            Other(lambda), Other(tau), layers};
  }
  bool operator==(const MednWeights&) const = default;
};

struct MednShape {
  Index inputs = 60;
  Index hidden = 301;
  int layers = 8;
  double lambda = 0.01;
  double tau = 1e-10;
};

/// W uniform in +-1/sqrt(K), S uniform in +-1/sqrt(N), H uniform in [0, 1].
MednWeights<double> init_weights_random(const MednShape& shape, std::uint64_t seed);

/// W = A^T and S = I - A^T A for the dictionary scaled to unit spectral norm;
/// H holds each anisotropic atom's (vic, kappa). The dictionary width must
/// equal the hidden width.
MednWeights<double> init_weights_from_dictionary(const Dictionary& dict, const MednShape& shape);

/// Batched forward pass cache. Column b of every matrix belongs to sample b.
template <typename Scalar>
struct ForwardTrace {
  std::vector<Matrix<Scalar>> pre_activations;  // a^t = W y + S f^{t-1}, t = 1..T
  std::vector<Matrix<Scalar>> activations;      // f^t = h_lambda(a^t)
  Matrix<Scalar> normalized;                    // (N - 1) x B, columns sum to 1
  Vector<Scalar> l1_norms;                      // ||f^a + tau||_1 per sample
  Matrix<Scalar> outputs;                       // 3 x B rows (v_ic, v_iso, od), unclamped
  Vector<Scalar> kappa;
};

/// Outputs are rows (v_ic, v_iso, od) of a 3 x B matrix; `signals` is K x B.
template <typename Scalar>
ForwardTrace<Scalar> forward(const MednWeights<Scalar>& weights, const Matrix<Scalar>& signals);

/// Outputs only, without keeping the per-layer cache.
template <typename Scalar>
Matrix<Scalar> forward_outputs(const MednWeights<Scalar>& weights, const Matrix<Scalar>& signals);

Microstructure forward_single(const MednWeights<double>& weights, const VectorXd& signal);

/// Per-quantity mean squared errors of a batch; total() is the training loss.
struct LossComponents {
  double v_ic = 0.0;
  double v_iso = 0.0;
  double od = 0.0;
  double total() const { return v_ic + v_iso + od; }
};

/// Batched loss on 3 x B prediction and target matrices.
template <typename Scalar>
LossComponents batch_loss(const Matrix<Scalar>& predicted, const Matrix<Scalar>& targets);

/// Sum of the three mean squared errors over a batch of microstructures.
double loss(std::span<const Microstructure> predicted, std::span<const Microstructure> targets);

template <typename Scalar>
struct MednGradients {
  Matrix<Scalar> W;
  Matrix<Scalar> S;
  Matrix<Scalar> H;
};

/// Exact gradient of the mean batch loss. The threshold's derivative is 1 where
/// the pre-activation is >= lambda and 0 elsewhere.
template <typename Scalar>
MednGradients<Scalar> backward(const MednWeights<Scalar>& weights, const Matrix<Scalar>& signals,
                               const ForwardTrace<Scalar>& trace, const Matrix<Scalar>& targets);

/// The network carries no bias, so a scheme without a b = 0 entry is fed one
/// extra constant input equal to the normalized b = 0 signal, 1. Without it
/// v_iso = 1 - (tissue signal scale) cannot be represented.
bool needs_b0_input(const AcquisitionScheme& scheme);
Index network_input_count(const AcquisitionScheme& scheme);
/// Signals (K x n) with the constant row appended when the scheme needs it.
MatrixXd network_inputs(const AcquisitionScheme& scheme, const MatrixXd& signals);
/// Dictionary rows extended the same way (every atom is 1 at b = 0).
Dictionary network_dictionary(const AcquisitionScheme& scheme, Dictionary dict);

/// Rows (v_ic, v_iso, od) from a list of microstructures.
Matrix3Xd to_matrix(std::span<const Microstructure> values);
std::vector<Microstructure> from_matrix(const Matrix3Xd& values);

}  // namespace medn
