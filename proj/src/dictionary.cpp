#include "medn/dictionary.hpp"

#include <algorithm>

namespace medn {

namespace {

std::vector<double> linspace(int n, double lo, double hi) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return out;
}

bool strictly_increasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return !(b > a); }) ==
         v.end();
}

// Anisotropic block for one orientation, vic-major.
MatrixXd anisotropic_block(const AcquisitionScheme& scheme, const Vector3d& mu,
                           const ParamGrid& grid, const DiffusivityConfig& cfg,
                           const SphereQuadrature& quad) {
  const Index n_vic = static_cast<Index>(grid.vic_values.size());
  const Index n_kappa = static_cast<Index>(grid.kappa_values.size());
  const MatrixXd a_ic = aic_signals(scheme, mu, grid.kappa_values, cfg, quad);
  std::vector<double> tau1(grid.kappa_values.size());
  for (std::size_t j = 0; j < tau1.size(); ++j) tau1[j] = watson_tau1(grid.kappa_values[j], quad);

  MatrixXd block(scheme.size(), n_vic * n_kappa);
  for (Index iv = 0; iv < n_vic; ++iv) {
    const double vic = grid.vic_values[static_cast<std::size_t>(iv)];
    for (Index ik = 0; ik < n_kappa; ++ik) {
      const VectorXd a_ec =
          aec_signal_from_tau1(scheme, mu, tau1[static_cast<std::size_t>(ik)], vic, cfg);
      block.col(iv * n_kappa + ik) = vic * a_ic.col(ik) + (1.0 - vic) * a_ec;
    }
  }
  return block;
}

}  // namespace

ParamGrid ParamGrid::make(int n_vic, double vic_lo, double vic_hi, int n_kappa, double od_lo,
                          double od_hi) {
  if (n_vic < 1 || n_kappa < 1) throw ConfigError("ParamGrid: need at least one value per axis");
  ParamGrid grid;
  grid.vic_values = linspace(n_vic, vic_lo, vic_hi);
  for (double od : linspace(n_kappa, od_lo, od_hi)) grid.kappa_values.push_back(kappa_from_od(od));
  std::sort(grid.kappa_values.begin(), grid.kappa_values.end());
  grid.validate();
  return grid;
}

ParamGrid ParamGrid::make_default() { return make(12, 0.1, 0.99, 12, 0.03, 0.95); }

void ParamGrid::validate() const {
  if (vic_values.empty() || kappa_values.empty()) throw ConfigError("ParamGrid: empty axis");
  if (!strictly_increasing(vic_values) || !strictly_increasing(kappa_values))
    throw ConfigError("ParamGrid: values must be strictly increasing");
  if (vic_values.front() <= 0.0 || vic_values.back() >= 1.0)
    throw ConfigError("ParamGrid: intra-cellular fractions must lie in (0, 1)");
  if (kappa_values.front() <= 0.0) throw ConfigError("ParamGrid: kappa values must be positive");
}

Dictionary build_dictionary(const AcquisitionScheme& scheme, const Vector3d& mu,
                            const ParamGrid& grid, const DiffusivityConfig& cfg,
                            const SphereQuadrature& quad) {
  return build_expanded_dictionary(scheme, {mu}, grid, cfg, quad);
}

Dictionary build_expanded_dictionary(const AcquisitionScheme& scheme,
                                     const std::vector<Vector3d>& orientations,
                                     const ParamGrid& grid, const DiffusivityConfig& cfg,
                                     const SphereQuadrature& quad) {
  if (orientations.empty()) throw ConfigError("expanded dictionary: empty orientation set");
  grid.validate();
  const Index n_atoms = grid.atom_count();
  const Index n_orient = static_cast<Index>(orientations.size());

  Dictionary dict;
  dict.orientations = orientations;
  dict.n_aniso = n_orient * n_atoms;
  dict.matrix.resize(scheme.size(), dict.n_aniso + 1);
  dict.atoms.reserve(static_cast<std::size_t>(dict.n_aniso));
  for (Index o = 0; o < n_orient; ++o) {
    const Vector3d& mu = orientations[static_cast<std::size_t>(o)];
    if (std::abs(mu.norm() - 1.0) > 1e-6)
      throw DomainError("dictionary: orientation is not unit norm");
    dict.matrix.middleCols(o * n_atoms, n_atoms) = anisotropic_block(scheme, mu, grid, cfg, quad);
    for (double vic : grid.vic_values)
      for (double kappa : grid.kappa_values) dict.atoms.push_back({o, vic, kappa});
  }
  dict.matrix.col(dict.n_aniso) = aiso_signal(scheme, cfg);
  return dict;
}

}  // namespace medn
