#pragma once

#include "medn/dictionary.hpp"
#include "medn/microstructure.hpp"
#include "medn/sparse_solvers.hpp"

namespace medn {

struct TensorFit {
  Matrix3d tensor = Matrix3d::Zero();
  Vector3d principal_direction = Vector3d::UnitZ();
  Vector3d eigenvalues = Vector3d::Zero();  // ascending
  /// RMS of the log-signal residual over the fitted gradients.
  double residual = 0.0;
  bool isotropic = false;
};

/// Signals at or below this value are raised to it before taking logarithms.
inline constexpr double kDtiSignalFloor = 1e-6;

/// Log-linear least-squares tensor fit on the lowest nonzero shell (plus any
/// b = 0 entries) of a normalized signal. The principal direction is the
/// eigenvector of the largest eigenvalue with a nonnegative z component (ties
/// broken on y, then x). An eigenvalue spread below 1e-12 sets `isotropic`
/// and returns e_z.
TensorFit dti_fit(const AcquisitionScheme& scheme, const VectorXd& y);

struct FractionEstimate {
  Microstructure raw;
  double kappa = 0.0;
  /// Set when the anisotropic fractions sum below 1e-12; v_ic = 0 and od = 1 then.
  bool zero_anisotropic = false;
};

/// Weighted means of the atom parameters over the anisotropic fractions; the
/// isotropic fraction is v_iso.
FractionEstimate params_from_fractions(const MixtureFractions& f, const Dictionary& dict);

struct AmicoOptions {
  double alpha = 0.0;
  /// beta = beta_scale * ||Phi^T y||_inf for each voxel.
  double beta_scale = 1e-3;
  int max_iter = 20000;
  double kkt_tolerance = 1e-8;
  /// Schemes without a b = 0 entry get one virtual row, y = 1 against unit
  /// atoms, since the signal is normalized by S0. Without it the isotropic
  /// fraction only shows up as an overall scale and is not identifiable.
  bool anchor_b0 = true;
};

struct AmicoResult {
  Microstructure estimate;  // clamped to [0, 1]
  FractionEstimate fractions_summary;
  TensorFit tensor;
  MixtureFractions fractions;
  SolverReport solver;
};

/// DTI orientation, dictionary for that orientation, regularized NNLS, then
/// parameters from the fractions.
AmicoResult amico_estimate(const AcquisitionScheme& scheme, const VectorXd& y,
                           const ParamGrid& grid, const DiffusivityConfig& cfg,
                           const SphereQuadrature& quad, const AmicoOptions& options = {});

}  // namespace medn
