#include "medn/pipeline.hpp"

#include "medn/parallel.hpp"

namespace medn {

std::vector<AmicoResult> amico_batch(const AcquisitionScheme& scheme, const MatrixXd& signals,
                                     const ParamGrid& grid, const DiffusivityConfig& cfg,
                                     const SphereQuadrature& quad, const AmicoOptions& options,
                                     int threads) {
  if (signals.rows() != scheme.size())
    throw DimensionError("amico_batch: signal rows != scheme size");
  std::vector<AmicoResult> out(static_cast<std::size_t>(signals.cols()));
  parallel_for(signals.cols(), threads, [&](Index i) {
    out[static_cast<std::size_t>(i)] =
        amico_estimate(scheme, signals.col(i), grid, cfg, quad, options);
  });
  return out;
}

Dictionary init_dictionary(const AcquisitionScheme& scheme, const DictionaryInit& init,
                           const DiffusivityConfig& cfg, const SphereQuadrature& quad) {
  if (init.orientations < 1 || init.n_vic < 1 || init.n_kappa < 1)
    throw ConfigError("init_dictionary: counts must be positive");
  const ParamGrid grid = ParamGrid::make(init.n_vic, 0.1, 0.99, init.n_kappa, 0.03, 0.95);
  const Matrix3Xd dirs = repulsion_directions(init.orientations, init.seed);
  std::vector<Vector3d> orientations;
  for (Index i = 0; i < dirs.cols(); ++i) orientations.push_back(dirs.col(i));
  return build_expanded_dictionary(scheme, orientations, grid, cfg, quad);
}

MednWeights<double> init_medn_from_dictionary(const AcquisitionScheme& scheme,
                                              const DictionaryInit& init, MednShape shape,
                                              const DiffusivityConfig& cfg,
                                              const SphereQuadrature& quad) {
  const Dictionary dict = network_dictionary(scheme, init_dictionary(scheme, init, cfg, quad));
  shape.inputs = dict.rows();
  shape.hidden = dict.width();
  return init_weights_from_dictionary(dict, shape);
}

}  // namespace medn
