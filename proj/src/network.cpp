#include "medn/network.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "medn/error.hpp"
#include "medn/signal_model.hpp"
#include "medn/sparse_solvers.hpp"

namespace medn {

template <typename Scalar>
void MednWeights<Scalar>::validate() const {
  const Index n = hidden();
  if (n < 2) throw DimensionError("MednWeights: hidden width must be at least 2");
  if (S.rows() != n || S.cols() != n) throw DimensionError("MednWeights: S must be N x N");
  if (H.rows() != 2 || H.cols() != n - 1) throw DimensionError("MednWeights: H must be 2 x (N-1)");
  if (!(lambda > Scalar(0)) || !(tau > Scalar(0)) || layers < 1)
    throw ConfigError("MednWeights: need lambda > 0, tau > 0 and at least one layer");
  if ((H.array() < Scalar(0)).any()) throw DomainError("MednWeights: H has negative entries");
}

MednWeights<double> init_weights_random(const MednShape& shape, std::uint64_t seed) {
  if (shape.hidden < 2) throw DimensionError("init_weights: hidden width must be at least 2");
  if (shape.inputs < 1) throw DimensionError("init_weights: need at least one input");
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Index rows, Index cols, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    MatrixXd m(rows, cols);
    // Row-major fill order keeps the stream layout independent of storage order.
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
  };
  const double w_bound = 1.0 / std::sqrt(static_cast<double>(shape.inputs));
  const double s_bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  MednWeights<double> w;
  w.W = fill(shape.hidden, shape.inputs, -w_bound, w_bound);
  w.S = fill(shape.hidden, shape.hidden, -s_bound, s_bound);
  w.H = fill(2, shape.hidden - 1, 0.0, 1.0);
  w.lambda = shape.lambda;
  w.tau = shape.tau;
  w.layers = shape.layers;
  w.validate();
  return w;
}

MednWeights<double> init_weights_from_dictionary(const Dictionary& dict, const MednShape& shape) {
  if (dict.width() != shape.hidden)
    throw DimensionError("init_weights: dictionary width must equal the hidden width");
  if (dict.rows() != shape.inputs)
    throw DimensionError("init_weights: dictionary rows must equal the input count");
  const double scale = spectral_norm(dict.matrix);
  if (!(scale > 0.0)) throw NumericError("init_weights: dictionary has zero spectral norm");
  const MatrixXd scaled = dict.matrix / scale;
  MednWeights<double> w;
  w.W = scaled.transpose();
  w.S = MatrixXd::Identity(shape.hidden, shape.hidden) - scaled.transpose() * scaled;
  w.H.resize(2, shape.hidden - 1);
  for (Index j = 0; j < shape.hidden - 1; ++j) {
    const AtomMeta& atom = dict.atoms[static_cast<std::size_t>(j)];
    w.H(0, j) = atom.vic;
    w.H(1, j) = atom.kappa;
  }
  w.lambda = shape.lambda;
  w.tau = shape.tau;
  w.layers = shape.layers;
  w.validate();
  return w;
}

bool needs_b0_input(const AcquisitionScheme& scheme) {
  return (scheme.bvalues().array() > 0.0).all();
}

Index network_input_count(const AcquisitionScheme& scheme) {
  return scheme.size() + (needs_b0_input(scheme) ? 1 : 0);
}

MatrixXd network_inputs(const AcquisitionScheme& scheme, const MatrixXd& signals) {
  if (signals.rows() != scheme.size())
    throw DimensionError("network_inputs: signal rows != scheme size");
  if (!needs_b0_input(scheme)) return signals;
  MatrixXd out(signals.rows() + 1, signals.cols());
  out.topRows(signals.rows()) = signals;
  out.bottomRows(1).setOnes();
  return out;
}

Dictionary network_dictionary(const AcquisitionScheme& scheme, Dictionary dict) {
  if (dict.rows() != scheme.size())
    throw DimensionError("network_dictionary: dictionary rows != scheme size");
  if (needs_b0_input(scheme)) {
    dict.matrix.conservativeResize(dict.rows() + 1, Eigen::NoChange);
    dict.matrix.bottomRows(1).setOnes();
  }
  return dict;
}

namespace {

template <typename Scalar>
void check_signals(const MednWeights<Scalar>& weights, const Matrix<Scalar>& signals) {
  if (signals.rows() != weights.inputs())
    throw DimensionError("medn forward: signal length does not match W");
}

// Stage two on the last stage-one activation; fills normalized, l1_norms, kappa, outputs.
template <typename Scalar>
void stage_two(const MednWeights<Scalar>& weights, const Matrix<Scalar>& last,
               ForwardTrace<Scalar>& trace) {
  const Index n_aniso = weights.hidden() - 1;
  const Index batch = last.cols();
  Matrix<Scalar> shifted = last.topRows(n_aniso).array() + weights.tau;
  trace.l1_norms = shifted.colwise().sum().transpose();
  trace.normalized = shifted.array().rowwise() / trace.l1_norms.transpose().array();
  const Matrix<Scalar> head = weights.H * trace.normalized;
  trace.kappa = head.row(1).transpose();
  trace.outputs.resize(3, batch);
  trace.outputs.row(0) = head.row(0);
  trace.outputs.row(1) = last.row(n_aniso);
  trace.outputs.row(2) = trace.kappa.unaryExpr([](Scalar k) { return od_from_kappa(k); }).transpose();
}

}  // namespace

template <typename Scalar>
ForwardTrace<Scalar> forward(const MednWeights<Scalar>& weights, const Matrix<Scalar>& signals) {
  check_signals(weights, signals);
  ForwardTrace<Scalar> trace;
  const Matrix<Scalar> drive = weights.W * signals;
  trace.pre_activations.reserve(static_cast<std::size_t>(weights.layers));
  trace.activations.reserve(static_cast<std::size_t>(weights.layers));
  // f^0 = 0, so the first layer sees only the drive term.
  trace.pre_activations.push_back(drive);
  trace.activations.push_back(hard_threshold(drive, weights.lambda));
  for (int t = 1; t < weights.layers; ++t) {
    Matrix<Scalar> pre = drive;
    pre.noalias() += weights.S * trace.activations.back();
    trace.activations.push_back(hard_threshold(pre, weights.lambda));
    trace.pre_activations.push_back(std::move(pre));
  }
  stage_two(weights, trace.activations.back(), trace);
  return trace;
}

template <typename Scalar>
Matrix<Scalar> forward_outputs(const MednWeights<Scalar>& weights, const Matrix<Scalar>& signals) {
  check_signals(weights, signals);
  const Matrix<Scalar> drive = weights.W * signals;
  Matrix<Scalar> f = hard_threshold(drive, weights.lambda);
  Matrix<Scalar> pre(drive.rows(), drive.cols());
  for (int t = 1; t < weights.layers; ++t) {
    pre = drive;
    pre.noalias() += weights.S * f;
    f = hard_threshold(pre, weights.lambda);
  }
  ForwardTrace<Scalar> tail;
  stage_two(weights, f, tail);
  return tail.outputs;
}

Microstructure forward_single(const MednWeights<double>& weights, const VectorXd& signal) {
  const MatrixXd out = forward_outputs<double>(weights, signal);
  return {out(0, 0), out(1, 0), out(2, 0)};
}

template <typename Scalar>
LossComponents batch_loss(const Matrix<Scalar>& predicted, const Matrix<Scalar>& targets) {
  if (predicted.rows() != 3 || targets.rows() != 3 || predicted.cols() != targets.cols())
    throw DimensionError("loss: prediction and target batches differ in shape");
  if (predicted.cols() == 0) throw DimensionError("loss: empty batch");
  const Matrix<Scalar> diff = predicted - targets;
  const double inv = 1.0 / static_cast<double>(predicted.cols());
  return {static_cast<double>(diff.row(0).squaredNorm()) * inv,
          static_cast<double>(diff.row(1).squaredNorm()) * inv,
          static_cast<double>(diff.row(2).squaredNorm()) * inv};
}

double loss(std::span<const Microstructure> predicted, std::span<const Microstructure> targets) {
  if (predicted.size() != targets.size()) throw DimensionError("loss: batch lengths differ");
  if (predicted.empty()) throw DimensionError("loss: empty batch");
  return batch_loss<double>(to_matrix(predicted), to_matrix(targets)).total();
}

template <typename Scalar>
MednGradients<Scalar> backward(const MednWeights<Scalar>& weights, const Matrix<Scalar>& signals,
                               const ForwardTrace<Scalar>& trace, const Matrix<Scalar>& targets) {
  check_signals(weights, signals);
  const Index batch = signals.cols();
  const Index n = weights.hidden();
  if (static_cast<int>(trace.activations.size()) != weights.layers ||
      trace.outputs.cols() != batch || targets.cols() != batch || targets.rows() != 3 ||
      trace.activations.front().rows() != n)
    throw DimensionError("backward: trace does not match weights, signals or targets");
  if (batch == 0) throw DimensionError("backward: empty batch");

  const Scalar two_over_b = Scalar(2) / Scalar(batch);
  const Matrix<Scalar> d_out = two_over_b * (trace.outputs - targets);

  // Stage two: [v_ic, kappa] = H f~, od = od(kappa).
  Matrix<Scalar> d_head(2, batch);
  d_head.row(0) = d_out.row(0);
  d_head.row(1) = d_out.row(2).array() *
                  trace.kappa.transpose().unaryExpr([](Scalar k) {
                    return od_from_kappa_derivative(k);
                  }).array();

  MednGradients<Scalar> grads;
  grads.H.noalias() = d_head * trace.normalized.transpose();
  const Matrix<Scalar> d_normalized = weights.H.transpose() * d_head;

  // f~ = u / sum(u): du = (df~ - <df~, f~>) / sum(u).
  const Vector<Scalar> inner = (d_normalized.array() * trace.normalized.array()).colwise().sum().transpose();
  Matrix<Scalar> d_f(n, batch);
  d_f.topRows(n - 1) = (d_normalized.rowwise() - inner.transpose()).array().rowwise() /
                       trace.l1_norms.transpose().array();
  d_f.row(n - 1) = d_out.row(1);

  // Stage one, newest layer first.
  grads.W = Matrix<Scalar>::Zero(n, weights.inputs());
  grads.S = Matrix<Scalar>::Zero(n, n);
  Matrix<Scalar> d_drive = Matrix<Scalar>::Zero(n, batch);
  for (int t = weights.layers - 1; t >= 0; --t) {
    const auto& pre = trace.pre_activations[static_cast<std::size_t>(t)];
    const Matrix<Scalar> d_pre = (pre.array() >= weights.lambda).select(d_f, Scalar(0));
    d_drive += d_pre;
    if (t > 0) {
      const auto& prev = trace.activations[static_cast<std::size_t>(t - 1)];
      grads.S.noalias() += d_pre * prev.transpose();
      d_f.noalias() = weights.S.transpose() * d_pre;
    }
  }
  grads.W.noalias() = d_drive * signals.transpose();
  return grads;
}

Matrix3Xd to_matrix(std::span<const Microstructure> values) {
  Matrix3Xd out(3, static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    out.col(static_cast<Index>(i)) << values[i].v_ic, values[i].v_iso, values[i].od;
  return out;
}

std::vector<Microstructure> from_matrix(const Matrix3Xd& values) {
  std::vector<Microstructure> out(static_cast<std::size_t>(values.cols()));
  for (Index i = 0; i < values.cols(); ++i) out[static_cast<std::size_t>(i)] = {values(0, i), values(1, i), values(2, i)};
  return out;
}

#define MEDN_INSTANTIATE(Scalar)                                                                \
  template struct MednWeights<Scalar>;                                                          \
  template ForwardTrace<Scalar> forward(const MednWeights<Scalar>&, const Matrix<Scalar>&);     \
  template Matrix<Scalar> forward_outputs(const MednWeights<Scalar>&, const Matrix<Scalar>&);   \
  template LossComponents batch_loss(const Matrix<Scalar>&, const Matrix<Scalar>&);             \
  template MednGradients<Scalar> backward(const MednWeights<Scalar>&, const Matrix<Scalar>&,    \
                                          const ForwardTrace<Scalar>&, const Matrix<Scalar>&);

MEDN_INSTANTIATE(double)
MEDN_INSTANTIATE(float)

#undef MEDN_INSTANTIATE

}  // namespace medn
