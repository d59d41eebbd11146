#pragma once

#include <span>

#include "medn/types.hpp"

namespace medn {

/// Gauss-Legendre rule on [-1, 1] computed with the Golub-Welsch eigenvalue
/// method. Nodes ascending.
struct GaussLegendreRule {
  VectorXd nodes;
  VectorXd weights;
};
GaussLegendreRule gauss_legendre(int n);

/// Product quadrature on the unit sphere built in a canonical frame whose pole
/// is e_z: composite Gauss-Legendre in the polar cosine t = n_z over graded
/// panels, times a uniform azimuth grid.
///
/// Only the upper hemisphere is stored and every weight is doubled, so the rule
/// integrates antipodally symmetric functions (f(n) = f(-n)) over the whole
/// sphere and the weights sum to 4*pi. Every integrand in the NODDI model is
/// antipodally symmetric.
///
/// The polar panels are refined geometrically toward t = 1 so that integrands
/// concentrated around the pole (Watson densities with large kappa) stay
/// resolved. Integrals around an arbitrary axis use aligned_nodes(axis).
class SphereQuadrature {
 public:
  /// Default rule: ten panels with breakpoints 1 - 10^(-k/2), eight
  /// Gauss-Legendre nodes each, 36 azimuth nodes (2880 nodes).
  static SphereQuadrature make_default();

  /// Panels are consecutive pairs of `polar_breaks`, which must increase from
  /// 0 to 1.
  static SphereQuadrature product(std::span<const double> polar_breaks, int nodes_per_panel,
                                  int azimuth_nodes);

  Index size() const { return weights_.size(); }
  const Matrix3Xd& nodes() const { return nodes_; }
  const VectorXd& weights() const { return weights_; }

  /// Cosine of each node with the pole; equals nodes().row(2).
  const VectorXd& polar_cosines() const { return polar_cosines_; }

  /// Nodes rotated so that the canonical pole maps onto `axis`.
  Matrix3Xd aligned_nodes(const Vector3d& axis) const;

 private:
  SphereQuadrature(Matrix3Xd nodes, VectorXd weights);

  Matrix3Xd nodes_;
  VectorXd weights_;
  VectorXd polar_cosines_;
};

/// Right-handed orthonormal frame whose third column is `axis` (unit). The
/// first two columns are chosen deterministically from `axis`.
Matrix3d frame_around(const Vector3d& axis);

}  // namespace medn
