#include "medn/amico.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace medn {

namespace {

constexpr double kIsotropicSpread = 1e-12;
constexpr double kZeroAnisotropic = 1e-12;
constexpr int kMinTensorGradients = 6;

Vector3d sign_normalized(Vector3d v) {
  for (int axis : {2, 1, 0}) {
    if (v(axis) > 0.0) return v;
    if (v(axis) < 0.0) return -v;
  }
  return v;
}

}  // namespace

TensorFit dti_fit(const AcquisitionScheme& scheme, const VectorXd& y) {
  if (y.size() != scheme.size()) throw DimensionError("dti_fit: signal length != scheme size");
  const std::vector<double> shells = scheme.shells();
  double lowest = -1.0;
  for (double b : shells)
    if (b > 0.0) {
      lowest = b;
      break;
    }
  if (lowest < 0.0) throw NumericError("dti_fit: no diffusion-weighted gradients");

  std::vector<Index> rows;
  int weighted = 0;
  for (Index k = 0; k < scheme.size(); ++k) {
    const double b = scheme.bvalue(k);
    if (b == 0.0) {
      rows.push_back(k);
    } else if (std::abs(b - lowest) <= 50.0) {
      rows.push_back(k);
      ++weighted;
    }
  }
  if (weighted < kMinTensorGradients)
    throw NumericError("dti_fit: fewer than 6 usable diffusion-weighted gradients");

  const Index m = static_cast<Index>(rows.size());
  Eigen::Matrix<double, Eigen::Dynamic, 6> design(m, 6);
  VectorXd log_signal(m);
  for (Index r = 0; r < m; ++r) {
    const Index k = rows[static_cast<std::size_t>(r)];
    const Vector3d g = scheme.direction(k);
    const double b = scheme.bvalue(k);
    design.row(r) << g.x() * g.x(), g.y() * g.y(), g.z() * g.z(), 2.0 * g.x() * g.y(),
        2.0 * g.x() * g.z(), 2.0 * g.y() * g.z();
    design.row(r) *= -b;
    log_signal(r) = std::log(std::max(y(k), kDtiSignalFloor));
  }
  const Eigen::Matrix<double, 6, 1> coeffs = design.colPivHouseholderQr().solve(log_signal);

  TensorFit fit;
  fit.tensor << coeffs(0), coeffs(3), coeffs(4),
                coeffs(3), coeffs(1), coeffs(5),
                coeffs(4), coeffs(5), coeffs(2);
  fit.residual = std::sqrt((design * coeffs - log_signal).squaredNorm() / static_cast<double>(m));

  Eigen::SelfAdjointEigenSolver<Matrix3d> eig(fit.tensor);
  fit.eigenvalues = eig.eigenvalues();
  if (fit.eigenvalues(2) - fit.eigenvalues(0) < kIsotropicSpread) {
    fit.isotropic = true;
    fit.principal_direction = Vector3d::UnitZ();
  } else {
    fit.principal_direction = sign_normalized(eig.eigenvectors().col(2).normalized());
  }
  return fit;
}

FractionEstimate params_from_fractions(const MixtureFractions& f, const Dictionary& dict) {
  if (f.values.size() != dict.width())
    throw DimensionError("params_from_fractions: fraction length != dictionary width");
  FractionEstimate out;
  double total = 0.0;
  double vic = 0.0;
  double kappa = 0.0;
  for (Index j = 0; j < dict.n_aniso; ++j) {
    const double fj = f.values(j);
    const AtomMeta& atom = dict.atoms[static_cast<std::size_t>(j)];
    total += fj;
    vic += atom.vic * fj;
    kappa += atom.kappa * fj;
  }
  out.raw.v_iso = f.values(dict.n_aniso);
  if (total < kZeroAnisotropic) {
    out.zero_anisotropic = true;
    out.raw.v_ic = 0.0;
    out.raw.od = 1.0;
    out.kappa = 0.0;
  } else {
    out.raw.v_ic = vic / total;
    out.kappa = kappa / total;
    out.raw.od = od_from_kappa(out.kappa);
  }
  return out;
}

AmicoResult amico_estimate(const AcquisitionScheme& scheme, const VectorXd& y,
                           const ParamGrid& grid, const DiffusivityConfig& cfg,
                           const SphereQuadrature& quad, const AmicoOptions& options) {
  if (y.size() != scheme.size()) throw DimensionError("amico_estimate: signal length != scheme size");
  AmicoResult result;
  result.tensor = dti_fit(scheme, y);
  const Dictionary dict = build_dictionary(scheme, result.tensor.principal_direction, grid, cfg, quad);

  MatrixXd gram = dict.matrix.transpose() * dict.matrix;
  VectorXd aty = dict.matrix.transpose() * y;
  double yty = y.squaredNorm();
  if (options.anchor_b0 && (scheme.bvalues().array() > 0.0).all()) {
    // Every atom equals 1 at b = 0, as does the normalized signal.
    gram.array() += 1.0;
    aty.array() += 1.0;
    yty += 1.0;
  }
  NnlsOptions nnls;
  nnls.alpha = options.alpha;
  nnls.beta = options.beta_scale * aty.cwiseAbs().maxCoeff();
  nnls.max_iter = options.max_iter;
  nnls.kkt_tolerance = options.kkt_tolerance;
  auto [fractions, report] = nnls_regularized_gram(gram, aty, yty, nnls);
  result.fractions = std::move(fractions);
  result.solver = std::move(report);
  result.fractions_summary = params_from_fractions(result.fractions, dict);
  result.estimate = result.fractions_summary.raw.clamped();
  return result;
}

}  // namespace medn
