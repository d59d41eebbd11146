#pragma once

#include <vector>

#include "medn/signal_model.hpp"

namespace medn {

/// Discretized intra-cellular fractions and Watson concentrations, each
/// strictly increasing.
struct ParamGrid {
  std::vector<double> vic_values;
  std::vector<double> kappa_values;

  /// 12 fractions evenly spaced in [0.1, 0.99] and 12 concentrations obtained
  /// from orientation dispersions evenly spaced in [0.03, 0.95].
  static ParamGrid make_default();

  /// Evenly spaced fractions in [vic_lo, vic_hi]; kappas mapped from evenly
  /// spaced dispersions in [od_lo, od_hi], sorted ascending in kappa.
  static ParamGrid make(int n_vic, double vic_lo, double vic_hi, int n_kappa, double od_lo,
                        double od_hi);

  Index atom_count() const {
    return static_cast<Index>(vic_values.size() * kappa_values.size());
  }

  void validate() const;
};

/// Parameters of one anisotropic dictionary column.
struct AtomMeta {
  Index orientation = 0;
  double vic = 0.0;
  double kappa = 0.0;
};

/// Response dictionary. Columns are grouped per orientation; inside a group
/// they run over (vic index major, kappa index minor). The isotropic atom is
/// the last column.
struct Dictionary {
  MatrixXd matrix;
  std::vector<AtomMeta> atoms;
  std::vector<Vector3d> orientations;
  Index n_aniso = 0;

  Index rows() const { return matrix.rows(); }
  Index width() const { return matrix.cols(); }
  const Vector3d& mu() const { return orientations.front(); }
};

/// Dictionary for a single mean orientation: N_a anisotropic columns followed
/// by the isotropic column.
Dictionary build_dictionary(const AcquisitionScheme& scheme, const Vector3d& mu,
                            const ParamGrid& grid, const DiffusivityConfig& cfg,
                            const SphereQuadrature& quad);

/// Anisotropic blocks for each orientation side by side, then the isotropic column.
Dictionary build_expanded_dictionary(const AcquisitionScheme& scheme,
                                     const std::vector<Vector3d>& orientations,
                                     const ParamGrid& grid, const DiffusivityConfig& cfg,
                                     const SphereQuadrature& quad);

}  // namespace medn
