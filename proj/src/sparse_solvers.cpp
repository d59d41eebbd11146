#include "medn/sparse_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Cholesky>
#include <sstream>

namespace medn {

std::string SolverReport::to_metrics(const std::string& prefix) const {
  std::ostringstream out;
  out.precision(17);
  out << prefix << "iterations=" << iterations << '\n'
      << prefix << "final_objective=" << final_objective << '\n'
      << prefix << "converged=" << (converged ? 1 : 0) << '\n';
  return out.str();
}

double spectral_norm(const MatrixXd& a, double tolerance, int max_iter) {
  if (a.size() == 0) return 0.0;
  VectorXd v = VectorXd::Ones(a.cols()).normalized();
  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const VectorXd w = a.transpose() * (a * v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - estimate) <= tolerance * next) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return std::sqrt(estimate);
}

std::pair<MixtureFractions, SolverReport> iht_solve(const MatrixXd& dict, const VectorXd& y,
                                                    const IhtOptions& options) {
  if (dict.rows() != y.size()) throw DimensionError("iht_solve: dictionary rows != signal length");
  if (!(options.lambda > 0.0)) throw DomainError("iht_solve: lambda must be positive");
  const double scale = options.scale ? *options.scale : spectral_norm(dict);
  if (!(scale > 0.0)) throw NumericError("iht_solve: dictionary has zero spectral norm");

  const MatrixXd scaled = dict / scale;
  const VectorXd wy = scaled.transpose() * y;
  const MatrixXd s = MatrixXd::Identity(dict.cols(), dict.cols()) - scaled.transpose() * scaled;
  // f_scaled = scale * f, so thresholding f at lambda thresholds f_scaled at lambda * scale.
  const double threshold = options.lambda * scale;

  VectorXd f = VectorXd::Zero(dict.cols());
  SolverReport report;
  for (int it = 0; it < options.max_iter; ++it) {
    VectorXd next = hard_threshold(wy + s * f, threshold);
    const double change = (next - f).cwiseAbs().maxCoeff();
    f = std::move(next);
    report.iterations = it + 1;
    if (change < options.tolerance) {
      report.converged = true;
      break;
    }
  }
  MixtureFractions out{f / scale};
  report.final_objective = (dict * out.values - y).squaredNorm();
  return {std::move(out), report};
}

std::pair<MixtureFractions, SolverReport> iht_solve(const Dictionary& dict, const VectorXd& y,
                                                    const IhtOptions& options) {
  return iht_solve(dict.matrix, y, options);
}

double nnls_kkt_residual(const MatrixXd& gram, const VectorXd& aty, const VectorXd& f,
                         double alpha, double beta) {
  const VectorXd grad = 2.0 * (gram * f - aty) + 2.0 * alpha * f + VectorXd::Constant(f.size(), beta);
  double worst = 0.0;
  for (Index i = 0; i < f.size(); ++i) {
    const double pg = f(i) > 0.0 ? grad(i) : std::min(grad(i), 0.0);
    worst = std::max(worst, std::abs(pg));
  }
  return worst;
}

namespace {

double projected_gradient_norm(const VectorXd& f, const VectorXd& grad) {
  double worst = 0.0;
  for (Index i = 0; i < f.size(); ++i) {
    const double pg = f(i) > 0.0 ? grad(i) : std::min(grad(i), 0.0);
    worst = std::max(worst, std::abs(pg));
  }
  return worst;
}

// Lawson-Hanson on min f^T Q f - 2 c^T f with Q = G + alpha I, c = A^T y - beta/2.
std::pair<MixtureFractions, SolverReport> solve_active_set(const MatrixXd& gram,
                                                           const VectorXd& aty, double yty,
                                                           const NnlsOptions& options) {
  const Index n = aty.size();
  const MatrixXd q = gram + options.alpha * MatrixXd::Identity(n, n);
  const VectorXd c = aty - VectorXd::Constant(n, 0.5 * options.beta);
  auto objective = [&](const VectorXd& f) { return f.dot(q * f) - 2.0 * c.dot(f) + yty; };

  VectorXd f = VectorXd::Zero(n);
  std::vector<char> passive(static_cast<std::size_t>(n), 0);
  std::vector<char> blocked(static_cast<std::size_t>(n), 0);
  SolverReport report;
  double value = yty;
  if (options.record_history) report.objective_history.push_back(value);

  // Unconstrained minimizer over the passive set.
  auto solve_passive = [&](std::vector<Index>& idx) {
    idx.clear();
    for (Index i = 0; i < n; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    const auto m = static_cast<Index>(idx.size());
    MatrixXd sub(m, m);
    VectorXd rhs(m);
    for (Index a = 0; a < m; ++a) {
      rhs(a) = c(idx[static_cast<std::size_t>(a)]);
      for (Index b = 0; b < m; ++b)
        sub(a, b) = q(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    return VectorXd(sub.ldlt().solve(rhs));
  };

  std::vector<Index> idx;
  while (report.iterations < options.max_iter) {
    const VectorXd grad = 2.0 * (q * f - c);
    if (projected_gradient_norm(f, grad) < options.kkt_tolerance) {
      report.converged = true;
      break;
    }
    Index entering = -1;
    double best = 0.0;
    for (Index i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      if (!passive[u] && !blocked[u] && -grad(i) > best) {
        best = -grad(i);
        entering = i;
      }
    }
    if (entering < 0) break;  // remaining violation is round-off on the passive set
    passive[static_cast<std::size_t>(entering)] = 1;
    ++report.iterations;

    VectorXd z = solve_passive(idx);
    const auto pos = static_cast<Index>(
        std::find(idx.begin(), idx.end(), entering) - idx.begin());
    if (!z.allFinite() || z(pos) <= 0.0) {
      // Singular or non-improving direction for this atom; skip it until f moves.
      passive[static_cast<std::size_t>(entering)] = 0;
      blocked[static_cast<std::size_t>(entering)] = 1;
      continue;
    }
    while (true) {
      double step = 1.0;
      Index limiting = -1;
      for (Index a = 0; a < z.size(); ++a) {
        const double fa = f(idx[static_cast<std::size_t>(a)]);
        if (z(a) <= 0.0 && fa / (fa - z(a)) < step) {
          step = fa / (fa - z(a));
          limiting = idx[static_cast<std::size_t>(a)];
        }
      }
      if (limiting < 0) {
        for (Index a = 0; a < z.size(); ++a) f(idx[static_cast<std::size_t>(a)]) = z(a);
        break;
      }
      for (Index a = 0; a < z.size(); ++a) {
        double& fa = f(idx[static_cast<std::size_t>(a)]);
        fa += step * (z(a) - fa);
      }
      f(limiting) = 0.0;
      for (Index i : idx)
        if (f(i) <= 0.0) {
          f(i) = 0.0;
          passive[static_cast<std::size_t>(i)] = 0;
        }
      z = solve_passive(idx);
      if (idx.empty()) break;
    }
    std::fill(blocked.begin(), blocked.end(), 0);
    value = objective(f);
    if (options.record_history) report.objective_history.push_back(value);
  }
  report.final_objective = objective(f);
  return {MixtureFractions{std::move(f)}, std::move(report)};
}

std::pair<MixtureFractions, SolverReport> solve_projected_gradient(const MatrixXd& gram,
                                                                   const VectorXd& aty,
                                                                   double yty,
                                                                   const NnlsOptions& options) {
  const Index n = aty.size();
  const double alpha = options.alpha;
  const VectorXd shift = VectorXd::Constant(n, options.beta);

  auto objective = [&](const VectorXd& f, const VectorXd& gf) {
    return f.dot(gf) - 2.0 * aty.dot(f) + yty + alpha * f.squaredNorm() + options.beta * f.sum();
  };
  auto gradient = [&](const VectorXd& f, const VectorXd& gf) {
    return VectorXd(2.0 * (gf - aty) + 2.0 * alpha * f + shift);
  };
  auto kkt = [&](const VectorXd& f, const VectorXd& grad) {
    double worst = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double pg = f(i) > 0.0 ? grad(i) : std::min(grad(i), 0.0);
      worst = std::max(worst, std::abs(pg));
    }
    return worst;
  };

  VectorXd f = VectorXd::Zero(n);
  VectorXd gf = VectorXd::Zero(n);
  VectorXd grad = gradient(f, gf);
  double value = objective(f, gf);
  std::deque<double> recent{value};

  SolverReport report;
  if (options.record_history) report.objective_history.push_back(value);

  // Initial step from the curvature along the steepest-descent direction.
  double step = 1.0;
  {
    const VectorXd d = (-grad).cwiseMax(0.0);
    const double curvature = 2.0 * (d.dot(gram * d) + alpha * d.squaredNorm());
    if (curvature > 0.0) step = d.squaredNorm() / curvature;
  }

  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-30;
  constexpr double kMaxStep = 1e30;
  if (kkt(f, grad) < options.kkt_tolerance) {
    report.converged = true;
  } else {
    for (int it = 0; it < options.max_iter; ++it) {
      const double reference = *std::max_element(recent.begin(), recent.end());
      VectorXd candidate;
      VectorXd g_candidate;
      double candidate_value = 0.0;
      double trial = step;
      bool accepted = false;
      while (trial >= kMinStep) {
        candidate = (f - trial * grad).cwiseMax(0.0);
        g_candidate = gram * candidate;
        candidate_value = objective(candidate, g_candidate);
        if (candidate_value <= reference + kArmijo * grad.dot(candidate - f)) {
          accepted = true;
          break;
        }
        trial *= 0.5;
      }
      report.iterations = it + 1;
      if (!accepted) break;  // no descent left at machine precision

      const VectorXd s = candidate - f;
      const VectorXd next_grad = gradient(candidate, g_candidate);
      const VectorXd dg = next_grad - grad;
      f = std::move(candidate);
      gf = std::move(g_candidate);
      grad = next_grad;
      value = candidate_value;
      recent.push_back(value);
      if (static_cast<int>(recent.size()) > options.nonmonotone_memory) recent.pop_front();
      if (options.record_history) report.objective_history.push_back(value);

      if (kkt(f, grad) < options.kkt_tolerance) {
        report.converged = true;
        break;
      }
      const double sy = s.dot(dg);
      step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, kMinStep, kMaxStep) : kMaxStep;
    }
  }
  report.final_objective = value;
  return {MixtureFractions{std::move(f)}, std::move(report)};
}

}  // namespace

std::pair<MixtureFractions, SolverReport> nnls_regularized_gram(const MatrixXd& gram,
                                                                const VectorXd& aty, double yty,
                                                                const NnlsOptions& options) {
  if (gram.rows() != gram.cols() || gram.rows() != aty.size())
    throw DimensionError("nnls_regularized: Gram matrix and A^T y disagree");
  if (!(options.alpha >= 0.0) || !(options.beta >= 0.0))
    throw DomainError("nnls_regularized: alpha and beta must be nonnegative");
  if (options.nonmonotone_memory < 1) throw ConfigError("nnls_regularized: memory must be >= 1");
  if (options.method == NnlsMethod::active_set) return solve_active_set(gram, aty, yty, options);
  return solve_projected_gradient(gram, aty, yty, options);
}

std::pair<MixtureFractions, SolverReport> nnls_regularized(const MatrixXd& dict,
                                                           const VectorXd& y,
                                                           const NnlsOptions& options) {
  if (dict.rows() != y.size())
    throw DimensionError("nnls_regularized: dictionary rows != signal length");
  const MatrixXd gram = dict.transpose() * dict;
  return nnls_regularized_gram(gram, dict.transpose() * y, y.squaredNorm(), options);
}

}  // namespace medn
