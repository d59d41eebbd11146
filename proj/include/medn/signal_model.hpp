#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "medn/error.hpp"
#include "medn/sphere_quadrature.hpp"
#include "medn/types.hpp"

namespace medn {

/// Ordered diffusion gradients: unit directions (columns) and b-values in s/mm^2.
class AcquisitionScheme {
 public:
  AcquisitionScheme() = default;
  AcquisitionScheme(Matrix3Xd directions, VectorXd bvalues);

  Index size() const { return bvalues_.size(); }
  const Matrix3Xd& directions() const { return directions_; }
  const VectorXd& bvalues() const { return bvalues_; }
  Vector3d direction(Index k) const { return directions_.col(k); }
  double bvalue(Index k) const { return bvalues_(k); }

  /// Entries at `indices`, in the given order. Indices must be distinct and in range.
  AcquisitionScheme subsample(std::span<const Index> indices) const;

  /// Distinct b-values (ascending), merging values closer than `tolerance`.
  std::vector<double> shells(double tolerance = 50.0) const;

  bool operator==(const AcquisitionScheme& other) const;

 private:
  Matrix3Xd directions_;
  VectorXd bvalues_;
};

/// Ground-truth generative parameters of one voxel.
struct TissueParams {
  double v_ic = 0.0;
  double v_iso = 0.0;
  double kappa = 0.0;
  Vector3d mu = Vector3d::UnitZ();

  void validate() const;
};

/// Compartment diffusivities in mm^2/s.
struct DiffusivityConfig {
  double d_par = 1.7e-3;
  double d_iso = 3.0e-3;

  void validate() const;
};

/// Orientation dispersion (2/pi) atan(1/kappa), written as 1 - (2/pi) atan(kappa)
/// so that kappa = 0 maps to 1 without a division.
template <typename Scalar>
Scalar od_from_kappa(Scalar kappa) {
  using std::atan;
  return Scalar(1) - Scalar(2.0 / std::numbers::pi) * atan(kappa);
}

/// Derivative of od_from_kappa with respect to kappa.
template <typename Scalar>
Scalar od_from_kappa_derivative(Scalar kappa) {
  return -Scalar(2.0 / std::numbers::pi) / (Scalar(1) + kappa * kappa);
}

template <typename Scalar>
Scalar kappa_from_od(Scalar od) {
  if (!(od > Scalar(0) && od < Scalar(1)))
    throw DomainError("kappa_from_od: orientation dispersion must lie in (0, 1)");
  using std::tan;
  return Scalar(1) / tan(Scalar(std::numbers::pi / 2) * od);
}

/// Normalized Watson density C(kappa) exp(kappa (mu.n)^2), with C(kappa) fitted to
/// the quadrature. Evaluated in a rescaled form so kappa in the thousands does
/// not overflow.
double watson_density(const Vector3d& n, const Vector3d& mu, double kappa,
                      const SphereQuadrature& quad);

/// Watson probability mass carried by each node of `quad` once aligned to the
/// distribution axis (entries sum to 1). Column c belongs to kappas[c].
MatrixXd watson_node_masses(std::span<const double> kappas, const SphereQuadrature& quad);

/// Watson second moment <(n.mu)^2>.
double watson_tau1(double kappa, const SphereQuadrature& quad);

/// Intra-cellular (dispersed stick) signal for several concentrations at once;
/// column c is the signal for kappas[c].
MatrixXd aic_signals(const AcquisitionScheme& scheme, const Vector3d& mu,
                     std::span<const double> kappas, const DiffusivityConfig& cfg,
                     const SphereQuadrature& quad);

VectorXd aic_signal(const AcquisitionScheme& scheme, const Vector3d& mu, double kappa,
                    const DiffusivityConfig& cfg, const SphereQuadrature& quad);

/// Watson-averaged cylindrical tensor of the extra-cellular compartment with
/// tortuous perpendicular diffusivity d_par (1 - v_ic).
Matrix3d extra_cellular_tensor(const Vector3d& mu, double tau1, double v_ic,
                               const DiffusivityConfig& cfg);

VectorXd aec_signal(const AcquisitionScheme& scheme, const Vector3d& mu, double kappa,
                    double v_ic, const DiffusivityConfig& cfg, const SphereQuadrature& quad);

/// aec_signal with a precomputed tau1, used when sweeping v_ic at fixed kappa.
VectorXd aec_signal_from_tau1(const AcquisitionScheme& scheme, const Vector3d& mu, double tau1,
                              double v_ic, const DiffusivityConfig& cfg);

VectorXd aiso_signal(const AcquisitionScheme& scheme, const DiffusivityConfig& cfg);

/// Three-compartment NODDI signal normalized by S0.
VectorXd synthesize(const AcquisitionScheme& scheme, const TissueParams& params,
                    const DiffusivityConfig& cfg, const SphereQuadrature& quad);

}  // namespace medn
