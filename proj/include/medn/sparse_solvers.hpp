#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "medn/dictionary.hpp"
#include "medn/types.hpp"

namespace medn {

/// Nonnegative hard threshold: entries below `lambda` (negatives included)
/// become zero, the rest pass through unchanged.
template <typename Derived>
typename Derived::PlainObject hard_threshold(const Eigen::MatrixBase<Derived>& a,
                                             typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  if (!(lambda > Scalar(0))) throw DomainError("hard_threshold: lambda must be positive");
  return (a.array() >= lambda).select(a.derived(), Scalar(0));
}

/// Nonnegative mixture fractions of dictionary atoms; the last entry belongs to
/// the isotropic atom.
struct MixtureFractions {
  VectorXd values;

  auto anisotropic() const { return values.head(values.size() - 1); }
  double isotropic() const { return values(values.size() - 1); }
};

struct SolverReport {
  int iterations = 0;
  double final_objective = 0.0;
  bool converged = false;
  /// Objective after every accepted iterate (filled when requested).
  std::vector<double> objective_history;

  /// key=value lines for the metrics text format, each key prefixed.
  std::string to_metrics(const std::string& prefix) const;
};

/// Largest singular value by power iteration on A^T A.
double spectral_norm(const MatrixXd& a, double tolerance = 1e-10, int max_iter = 10000);

struct IhtOptions {
  double lambda = 0.01;
  int max_iter = 500;
  double tolerance = 1e-10;
  /// Spectral norm of the dictionary; computed by power iteration if unset.
  std::optional<double> scale;
};

/// Iterative hard thresholding f <- h_lambda(W y + S f) from f = 0 with
/// W = A^T and S = I - A^T A on A = dict / scale. The threshold is applied in
/// the units of the unscaled problem, so every nonzero output entry is >= lambda.
std::pair<MixtureFractions, SolverReport> iht_solve(const MatrixXd& dict, const VectorXd& y,
                                                    const IhtOptions& options = {});

std::pair<MixtureFractions, SolverReport> iht_solve(const Dictionary& dict, const VectorXd& y,
                                                    const IhtOptions& options = {});

enum class NnlsMethod {
  /// Lawson-Hanson active set on the Gram form; exact up to round-off.
  active_set,
  /// Projected gradient with Barzilai-Borwein steps and a line search.
  projected_gradient,
};

struct NnlsOptions {
  NnlsMethod method = NnlsMethod::active_set;
  double alpha = 0.0;
  double beta = 0.0;
  int max_iter = 20000;
  /// Stop once the projected gradient max norm falls below this.
  double kkt_tolerance = 1e-8;
  /// Projected gradient only: objective values remembered by the line-search
  /// reference; 1 gives a monotone search.
  int nonmonotone_memory = 1;
  bool record_history = false;
};

/// Solves
///   min_{f >= 0} ||A f - y||^2 + alpha ||f||^2 + beta ||f||_1.
std::pair<MixtureFractions, SolverReport> nnls_regularized(const MatrixXd& dict,
                                                           const VectorXd& y,
                                                           const NnlsOptions& options = {});

/// Same problem given the Gram matrix A^T A, A^T y and y^T y. Lets callers
/// reuse the products across solves.
std::pair<MixtureFractions, SolverReport> nnls_regularized_gram(const MatrixXd& gram,
                                                                const VectorXd& aty,
                                                                double yty,
                                                                const NnlsOptions& options = {});

/// Projected gradient max norm of the problem above at f.
double nnls_kkt_residual(const MatrixXd& gram, const VectorXd& aty, const VectorXd& f,
                         double alpha, double beta);

}  // namespace medn
