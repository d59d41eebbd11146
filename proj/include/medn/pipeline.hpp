#pragma once

#include <cstdint>
#include <vector>

#include "medn/amico.hpp"
#include "medn/datagen.hpp"
#include "medn/network.hpp"

namespace medn {

/// AMICO over every column of `signals`, parallel over voxels.
std::vector<AmicoResult> amico_batch(const AcquisitionScheme& scheme, const MatrixXd& signals,
                                     const ParamGrid& grid, const DiffusivityConfig& cfg,
                                     const SphereQuadrature& quad,
                                     const AmicoOptions& options = {}, int threads = 1);

/// Expanded dictionary used to initialize the network: `orientations` repulsion
/// directions, each carrying an n_vic x n_kappa block on the default ranges.
/// The hidden width must be orientations * n_vic * n_kappa + 1.
struct DictionaryInit {
  int orientations = 25;
  int n_vic = 3;
  int n_kappa = 4;
  std::uint64_t seed = 77;

  Index hidden() const { return static_cast<Index>(orientations) * n_vic * n_kappa + 1; }
};

Dictionary init_dictionary(const AcquisitionScheme& scheme, const DictionaryInit& init,
                           const DiffusivityConfig& cfg, const SphereQuadrature& quad);

/// Network weights from init_dictionary, extended with the b = 0 input row
/// when the scheme needs one. shape.inputs and shape.hidden are overwritten.
MednWeights<double> init_medn_from_dictionary(const AcquisitionScheme& scheme,
                                              const DictionaryInit& init, MednShape shape,
                                              const DiffusivityConfig& cfg,
                                              const SphereQuadrature& quad);

}  // namespace medn
