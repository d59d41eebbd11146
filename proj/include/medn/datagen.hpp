#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "medn/amico.hpp"
#include "medn/microstructure.hpp"
#include "medn/signal_model.hpp"

namespace medn {

/// Voxel-wise dataset: signals are the columns of a K x n matrix; targets and
/// truth are optional parallel lists.
struct VoxelDataset {
  AcquisitionScheme scheme;
  MatrixXd signals;
  std::vector<std::int64_t> ids;
  std::optional<std::vector<Microstructure>> targets;
  std::optional<std::vector<TissueParams>> truth;

  Index size() const { return signals.cols(); }
  void validate() const;
};

enum class NoiseModel { none, gaussian, rician };

struct NoiseSpec {
  NoiseModel model = NoiseModel::rician;
  /// Relative to S0 = 1, so the noise standard deviation is 1 / snr.
  double snr = 30.0;
  std::uint64_t seed = 0;

  void validate() const;
};

NoiseModel parse_noise_model(const std::string& name);
std::string to_string(NoiseModel model);

/// y_k = S_k / S0; S0 <= 0 marks a degenerate voxel.
VectorXd normalize_dwi(const VectorXd& raw, double s0);

struct ParamRanges {
  double vic_lo = 0.0, vic_hi = 1.0;
  double viso_lo = 0.0, viso_hi = 1.0;
  double od_lo = 0.03, od_hi = 0.95;
};

/// Uniform fractions, uniform orientation dispersion mapped to kappa, and a
/// mean orientation uniform on the sphere.
TissueParams sample_params(std::mt19937_64& rng, const ParamRanges& ranges = {});

/// Additive Gaussian or Rician (magnitude of a complex Gaussian perturbation)
/// noise; `rng` supplies the draws.
VectorXd add_noise(const VectorXd& y, const NoiseSpec& spec, std::mt19937_64& rng);

/// Convenience overload seeded from spec.seed.
VectorXd add_noise(const VectorXd& y, const NoiseSpec& spec);

/// Same voxels restricted to the scheme entries at `indices`; targets and
/// truth are untouched.
VoxelDataset subsample_dataset(const VoxelDataset& data, std::span<const Index> indices);

/// Positions of each `subset` entry inside `dense` (exact direction and b-value
/// match within 1e-9).
std::vector<Index> match_scheme(const AcquisitionScheme& dense, const AcquisitionScheme& subset);

struct GenerationOptions {
  ParamRanges ranges;
  DiffusivityConfig diffusivity;
  int threads = 1;
  std::int64_t first_id = 0;
};

/// Synthetic phantom: per-voxel random streams are derived from (seed, voxel
/// id), so the output does not depend on the thread count. Targets hold the
/// analytic truth (v_ic, v_iso, od_from_kappa(kappa)).
VoxelDataset make_dataset(const AcquisitionScheme& scheme, Index n, const NoiseSpec& noise,
                          const SphereQuadrature& quad, std::uint64_t seed,
                          const GenerationOptions& options = {});

/// AMICO estimate for every voxel of a densely sampled dataset.
std::vector<Microstructure> gold_standard_amico(const VoxelDataset& dense, const ParamGrid& grid,
                                                const DiffusivityConfig& cfg,
                                                const SphereQuadrature& quad,
                                                const AmicoOptions& options = {}, int threads = 1);

/// Unit directions spread by antipodal electrostatic repulsion from a seeded
/// random start. Deterministic per (count, seed).
Matrix3Xd repulsion_directions(Index count, std::uint64_t seed, int iterations = 2000);

/// 30 directions at b = 1000 followed by 30 at b = 2000 s/mm^2.
AcquisitionScheme two_shell_protocol();

/// two_shell_protocol() followed by 30 directions at b = 3000 s/mm^2.
AcquisitionScheme three_shell_protocol();

}  // namespace medn
