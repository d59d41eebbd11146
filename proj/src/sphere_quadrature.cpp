#include "medn/sphere_quadrature.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "medn/error.hpp"

namespace medn {

GaussLegendreRule gauss_legendre(int n) {
  if (n < 1) throw ConfigError("gauss_legendre: need at least one node");
  // Jacobi matrix of the Legendre three-term recurrence.
  MatrixXd jacobi = MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(jacobi);
  GaussLegendreRule rule;
  rule.nodes = solver.eigenvalues();
  rule.weights = 2.0 * solver.eigenvectors().row(0).array().square().transpose();
  return rule;
}

SphereQuadrature::SphereQuadrature(Matrix3Xd nodes, VectorXd weights)
    : nodes_(std::move(nodes)), weights_(std::move(weights)) {
  polar_cosines_ = nodes_.row(2).transpose();
}

SphereQuadrature SphereQuadrature::make_default() {
  std::array<double, 11> breaks{};
  for (int k = 0; k < 10; ++k) breaks[k] = 1.0 - std::pow(10.0, -0.5 * k);
  breaks[10] = 1.0;
  return product(breaks, 8, 36);
}

SphereQuadrature SphereQuadrature::product(std::span<const double> polar_breaks,
                                           int nodes_per_panel, int azimuth_nodes) {
  if (polar_breaks.size() < 2 || polar_breaks.front() != 0.0 || polar_breaks.back() != 1.0)
    throw ConfigError("SphereQuadrature: polar breaks must run from 0 to 1");
  for (std::size_t i = 1; i < polar_breaks.size(); ++i)
    if (!(polar_breaks[i] > polar_breaks[i - 1]))
      throw ConfigError("SphereQuadrature: polar breaks must increase");
  if (azimuth_nodes < 1) throw ConfigError("SphereQuadrature: need azimuth nodes");

  const GaussLegendreRule gl = gauss_legendre(nodes_per_panel);
  const Index panels = static_cast<Index>(polar_breaks.size()) - 1;
  const Index n_polar = panels * nodes_per_panel;
  const Index total = n_polar * azimuth_nodes;

  Matrix3Xd nodes(3, total);
  VectorXd weights(total);
  const double dphi = 2.0 * std::numbers::pi / azimuth_nodes;
  Index col = 0;
  for (Index p = 0; p < panels; ++p) {
    const double lo = polar_breaks[p];
    const double hi = polar_breaks[p + 1];
    const double half = 0.5 * (hi - lo);
    for (int i = 0; i < nodes_per_panel; ++i) {
      const double t = lo + half * (gl.nodes(i) + 1.0);
      // Doubling folds the lower hemisphere onto the upper one.
      const double wt = 2.0 * half * gl.weights(i) * dphi;
      const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
      for (int j = 0; j < azimuth_nodes; ++j) {
        const double phi = (j + 0.5) * dphi;
        nodes.col(col) = Vector3d(s * std::cos(phi), s * std::sin(phi), t);
        weights(col) = wt;
        ++col;
      }
    }
  }
  return SphereQuadrature(std::move(nodes), std::move(weights));
}

Matrix3d frame_around(const Vector3d& axis) {
  const Vector3d pole = axis.normalized();
  // Helper axis least aligned with the pole.
  Index smallest = 0;
  pole.cwiseAbs().minCoeff(&smallest);
  Vector3d helper = Vector3d::Zero();
  helper(smallest) = 1.0;
  const Vector3d e1 = (helper - helper.dot(pole) * pole).normalized();
  const Vector3d e2 = pole.cross(e1);
  Matrix3d frame;
  frame << e1, e2, pole;
  return frame;
}

Matrix3Xd SphereQuadrature::aligned_nodes(const Vector3d& axis) const {
  return frame_around(axis) * nodes_;
}

}  // namespace medn
