#include "medn/datagen.hpp"

#include <cmath>

#include "medn/parallel.hpp"

namespace medn {

void VoxelDataset::validate() const {
  const auto n = static_cast<std::size_t>(size());
  if (signals.rows() != scheme.size())
    throw DataError("VoxelDataset: signal length does not match the scheme");
  if (ids.size() != n) throw DataError("VoxelDataset: id count differs from voxel count");
  if (targets && targets->size() != n) throw DataError("VoxelDataset: target count differs");
  if (truth && truth->size() != n) throw DataError("VoxelDataset: truth count differs");
}

void NoiseSpec::validate() const {
  if (model != NoiseModel::none && !(snr > 0.0))
    throw ConfigError("NoiseSpec: snr must be positive");
}

NoiseModel parse_noise_model(const std::string& name) {
  if (name == "none") return NoiseModel::none;
  if (name == "gaussian") return NoiseModel::gaussian;
  if (name == "rician") return NoiseModel::rician;
  throw ConfigError("unknown noise model '" + name + "'");
}

std::string to_string(NoiseModel model) {
  switch (model) {
    case NoiseModel::none: return "none";
    case NoiseModel::gaussian: return "gaussian";
    case NoiseModel::rician: return "rician";
  }
  return "unknown";
}

VectorXd normalize_dwi(const VectorXd& raw, double s0) {
  if (!(s0 > 0.0)) throw DataError("normalize_dwi: S0 must be positive (degenerate voxel)");
  return raw / s0;
}

TissueParams sample_params(std::mt19937_64& rng, const ParamRanges& ranges) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  TissueParams p;
  p.v_ic = ranges.vic_lo + (ranges.vic_hi - ranges.vic_lo) * unit(rng);
  p.v_iso = ranges.viso_lo + (ranges.viso_hi - ranges.viso_lo) * unit(rng);
  const double od = ranges.od_lo + (ranges.od_hi - ranges.od_lo) * unit(rng);
  p.kappa = kappa_from_od(od);
  Vector3d mu;
  do {
    mu = Vector3d(gauss(rng), gauss(rng), gauss(rng));
  } while (mu.norm() < 1e-8);
  p.mu = mu.normalized();
  return p;
}

VectorXd add_noise(const VectorXd& y, const NoiseSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  if (spec.model == NoiseModel::none) return y;
  std::normal_distribution<double> gauss(0.0, 1.0 / spec.snr);
  VectorXd out(y.size());
  for (Index k = 0; k < y.size(); ++k) {
    if (spec.model == NoiseModel::gaussian) {
      out(k) = y(k) + gauss(rng);
    } else {
      const double real = y(k) + gauss(rng);
      const double imag = gauss(rng);
      out(k) = std::hypot(real, imag);
    }
  }
  return out;
}

VectorXd add_noise(const VectorXd& y, const NoiseSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  return add_noise(y, spec, rng);
}

VoxelDataset subsample_dataset(const VoxelDataset& data, std::span<const Index> indices) {
  VoxelDataset out = data;
  out.scheme = data.scheme.subsample(indices);
  out.signals.resize(static_cast<Index>(indices.size()), data.size());
  for (std::size_t i = 0; i < indices.size(); ++i)
    out.signals.row(static_cast<Index>(i)) = data.signals.row(indices[i]);
  return out;
}

std::vector<Index> match_scheme(const AcquisitionScheme& dense, const AcquisitionScheme& subset) {
  std::vector<Index> indices;
  for (Index i = 0; i < subset.size(); ++i) {
    Index found = -1;
    for (Index k = 0; k < dense.size(); ++k) {
      if ((dense.direction(k) - subset.direction(i)).cwiseAbs().maxCoeff() <= 1e-9 &&
          std::abs(dense.bvalue(k) - subset.bvalue(i)) <= 1e-9) {
        found = k;
        break;
      }
    }
    if (found < 0)
      throw DataError("match_scheme: gradient " + std::to_string(i) + " is not in the dense scheme");
    indices.push_back(found);
  }
  return indices;
}

VoxelDataset make_dataset(const AcquisitionScheme& scheme, Index n, const NoiseSpec& noise,
                          const SphereQuadrature& quad, std::uint64_t seed,
                          const GenerationOptions& options) {
  if (n < 1) throw ConfigError("make_dataset: need at least one voxel");
  noise.validate();
  options.diffusivity.validate();
  VoxelDataset data;
  data.scheme = scheme;
  data.signals.resize(scheme.size(), n);
  data.ids.resize(static_cast<std::size_t>(n));
  data.targets.emplace(static_cast<std::size_t>(n));
  data.truth.emplace(static_cast<std::size_t>(n));
  parallel_for(n, options.threads, [&](Index i) {
    const std::int64_t id = options.first_id + i;
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(id)));
    const TissueParams params = sample_params(rng, options.ranges);
    const VectorXd clean = synthesize(scheme, params, options.diffusivity, quad);
    data.signals.col(i) = add_noise(clean, noise, rng);
    const auto slot = static_cast<std::size_t>(i);
    data.ids[slot] = id;
    (*data.truth)[slot] = params;
    (*data.targets)[slot] = {params.v_ic, params.v_iso, od_from_kappa(params.kappa)};
  });
  return data;
}

std::vector<Microstructure> gold_standard_amico(const VoxelDataset& dense, const ParamGrid& grid,
                                                const DiffusivityConfig& cfg,
                                                const SphereQuadrature& quad,
                                                const AmicoOptions& options, int threads) {
  std::vector<Microstructure> out(static_cast<std::size_t>(dense.size()));
  parallel_for(dense.size(), threads, [&](Index i) {
    out[static_cast<std::size_t>(i)] =
        amico_estimate(dense.scheme, dense.signals.col(i), grid, cfg, quad, options).estimate;
  });
  return out;
}

Matrix3Xd repulsion_directions(Index count, std::uint64_t seed, int iterations) {
  if (count < 1) throw ConfigError("repulsion_directions: need at least one direction");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix3Xd x(3, count);
  for (Index i = 0; i < count; ++i) {
    Vector3d v;
    do {
      v = Vector3d(gauss(rng), gauss(rng), gauss(rng));
    } while (v.norm() < 1e-8);
    x.col(i) = v.normalized();
  }
  // Each point repels every other point and its antipode; gradient steps are
  // projected back onto the sphere with a step that shrinks over time.
  for (int it = 0; it < iterations; ++it) {
    Matrix3Xd force = Matrix3Xd::Zero(3, count);
    for (Index i = 0; i < count; ++i) {
      for (Index j = 0; j < count; ++j) {
        if (i == j) continue;
        for (double sign : {1.0, -1.0}) {
          const Vector3d d = x.col(i) - sign * x.col(j);
          const double r = std::max(d.norm(), 1e-12);
          force.col(i) += d / (r * r * r);
        }
      }
    }
    const double step = 0.1 / static_cast<double>(count) / (1.0 + 0.01 * it);
    for (Index i = 0; i < count; ++i) {
      const Vector3d p = x.col(i);
      const Vector3d tangential = force.col(i) - force.col(i).dot(p) * p;
      x.col(i) = (p + step * tangential).normalized();
    }
  }
  for (Index i = 0; i < count; ++i)
    if (x(2, i) < 0.0) x.col(i) = -x.col(i);
  return x;
}

namespace {

AcquisitionScheme shells_protocol(std::span<const double> bvalues) {
  constexpr Index kPerShell = 30;
  const auto shells = static_cast<Index>(bvalues.size());
  Matrix3Xd dirs(3, kPerShell * shells);
  VectorXd b(kPerShell * shells);
  for (Index s = 0; s < shells; ++s) {
    dirs.middleCols(s * kPerShell, kPerShell) =
        repulsion_directions(kPerShell, 1000 + static_cast<std::uint64_t>(s));
    b.segment(s * kPerShell, kPerShell).setConstant(bvalues[static_cast<std::size_t>(s)]);
  }
  return AcquisitionScheme(std::move(dirs), std::move(b));
}

}  // namespace

AcquisitionScheme two_shell_protocol() {
  const double b[] = {1000.0, 2000.0};
  return shells_protocol(b);
}

AcquisitionScheme three_shell_protocol() {
  const double b[] = {1000.0, 2000.0, 3000.0};
  return shells_protocol(b);
}

}  // namespace medn
