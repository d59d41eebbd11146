#pragma once

// Central finite-difference oracles for the network and MLP gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "medn/mlp.hpp"
#include "medn/network.hpp"

namespace medn::test {

struct GradientCheck {
  double max_relative_error = 0.0;
  Index entries = 0;
};

// Relative error of one entry against max(|analytic|, |numeric|, floor).
inline void compare_entries(MatrixXd& param, const MatrixXd& analytic,
                            const std::function<double()>& loss_fn, double h, double floor,
                            GradientCheck& out) {
  for (Index c = 0; c < param.cols(); ++c)
    for (Index r = 0; r < param.rows(); ++r) {
      const double saved = param(r, c);
      param(r, c) = saved + h;
      const double up = loss_fn();
      param(r, c) = saved - h;
      const double down = loss_fn();
      param(r, c) = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic(r, c)), std::abs(numeric), floor});
      out.max_relative_error = std::max(out.max_relative_error, std::abs(analytic(r, c) - numeric) / denom);
      ++out.entries;
    }
}

// Smallest distance between any stage-one pre-activation and the threshold.
// The threshold is discontinuous, so finite differences are only meaningful
// when no pre-activation can cross it under the perturbation.
inline double threshold_margin(const MednWeights<double>& w, const MatrixXd& signals) {
  const ForwardTrace<double> trace = forward<double>(w, signals);
  double margin = std::numeric_limits<double>::infinity();
  for (const MatrixXd& pre : trace.pre_activations)
    margin = std::min(margin, (pre.array() - w.lambda).abs().minCoeff());
  return margin;
}

inline GradientCheck check_medn_gradients(MednWeights<double> w, const MatrixXd& signals,
                                          const MatrixXd& targets, double h, double floor) {
  const ForwardTrace<double> trace = forward<double>(w, signals);
  const MednGradients<double> g = backward<double>(w, signals, trace, targets);
  const auto loss_fn = [&] { return batch_loss<double>(forward_outputs<double>(w, signals), targets).total(); };
  GradientCheck out;
  compare_entries(w.W, g.W, loss_fn, h, floor, out);
  compare_entries(w.S, g.S, loss_fn, h, floor, out);
  compare_entries(w.H, g.H, loss_fn, h, floor, out);
  return out;
}

inline GradientCheck check_mlp_gradients(MlpWeights w, const MatrixXd& signals, const MatrixXd& targets,
                                         const DropoutMasks& masks, double h, double floor) {
  const MlpGradients g = mlp_backward(w, signals, targets, &masks, nullptr);
  const auto loss_fn = [&] {
    return batch_loss<double>(mlp_forward_masked(w, signals, &masks), targets).total();
  };
  GradientCheck out;
  for (std::size_t l = 0; l < w.weights.size(); ++l) {
    compare_entries(w.weights[l], g.weights[l], loss_fn, h, floor, out);
    MatrixXd bias = w.biases[l];
    const MatrixXd bias_grad = g.biases[l];
    const auto bias_loss = [&] {
      w.biases[l] = bias.col(0);
      return loss_fn();
    };
    compare_entries(bias, bias_grad, bias_loss, h, floor, out);
    w.biases[l] = bias.col(0);
  }
  return out;
}

}  // namespace medn::test
