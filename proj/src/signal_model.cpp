#include "medn/signal_model.hpp"

#include <algorithm>
#include <string>

namespace medn {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr Index kMinQuadratureNodes = 6;

void require_unit(const Vector3d& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > kUnitTolerance)
    throw DomainError(std::string(what) + ": vector is not unit norm");
}

void require_quadrature(const SphereQuadrature& quad) {
  if (quad.size() < kMinQuadratureNodes)
    throw ConfigError("sphere quadrature needs at least 6 nodes");
}

}  // namespace

AcquisitionScheme::AcquisitionScheme(Matrix3Xd directions, VectorXd bvalues)
    : directions_(std::move(directions)), bvalues_(std::move(bvalues)) {
  if (directions_.cols() != bvalues_.size())
    throw DimensionError("AcquisitionScheme: direction and b-value counts differ");
  if (bvalues_.size() < 1) throw DomainError("AcquisitionScheme: need at least one gradient");
  for (Index k = 0; k < size(); ++k) {
    if (std::abs(directions_.col(k).norm() - 1.0) > kUnitTolerance)
      throw DomainError("AcquisitionScheme: gradient " + std::to_string(k) +
                        " is not unit norm");
    if (!(bvalues_(k) >= 0.0))
      throw DomainError("AcquisitionScheme: gradient " + std::to_string(k) +
                        " has a negative b-value");
  }
}

AcquisitionScheme AcquisitionScheme::subsample(std::span<const Index> indices) const {
  std::vector<bool> seen(static_cast<std::size_t>(size()), false);
  Matrix3Xd dirs(3, static_cast<Index>(indices.size()));
  VectorXd b(static_cast<Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Index k = indices[i];
    if (k < 0 || k >= size())
      throw DomainError("subsample: index " + std::to_string(k) + " out of range");
    if (seen[static_cast<std::size_t>(k)])
      throw DomainError("subsample: index " + std::to_string(k) + " repeated");
    seen[static_cast<std::size_t>(k)] = true;
    dirs.col(static_cast<Index>(i)) = directions_.col(k);
    b(static_cast<Index>(i)) = bvalues_(k);
  }
  return AcquisitionScheme(std::move(dirs), std::move(b));
}

std::vector<double> AcquisitionScheme::shells(double tolerance) const {
  std::vector<double> sorted(bvalues_.data(), bvalues_.data() + bvalues_.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  for (double b : sorted)
    if (out.empty() || b - out.back() > tolerance) out.push_back(b);
  return out;
}

bool AcquisitionScheme::operator==(const AcquisitionScheme& other) const {
  return directions_ == other.directions_ && bvalues_ == other.bvalues_;
}

void TissueParams::validate() const {
  if (!(v_ic >= 0.0 && v_ic <= 1.0)) throw DomainError("TissueParams: v_ic outside [0, 1]");
  if (!(v_iso >= 0.0 && v_iso <= 1.0)) throw DomainError("TissueParams: v_iso outside [0, 1]");
  if (!(kappa >= 0.0)) throw DomainError("TissueParams: kappa must be nonnegative");
  require_unit(mu, "TissueParams.mu");
}

void DiffusivityConfig::validate() const {
  if (!(d_par > 0.0) || !(d_iso > 0.0))
    throw DomainError("DiffusivityConfig: diffusivities must be positive");
}

MatrixXd watson_node_masses(std::span<const double> kappas, const SphereQuadrature& quad) {
  require_quadrature(quad);
  // exp(kappa (t^2 - 1)) keeps every exponent nonpositive.
  const Eigen::ArrayXd shifted = quad.polar_cosines().array().square() - 1.0;
  MatrixXd masses(quad.size(), static_cast<Index>(kappas.size()));
  for (std::size_t c = 0; c < kappas.size(); ++c) {
    if (!(kappas[c] >= 0.0)) throw DomainError("Watson: kappa must be nonnegative");
    const Eigen::ArrayXd unnormalized = quad.weights().array() * (kappas[c] * shifted).exp();
    masses.col(static_cast<Index>(c)) = unnormalized / unnormalized.sum();
  }
  return masses;
}

double watson_density(const Vector3d& n, const Vector3d& mu, double kappa,
                      const SphereQuadrature& quad) {
  require_quadrature(quad);
  if (!(kappa >= 0.0)) throw DomainError("watson_density: kappa must be nonnegative");
  const Eigen::ArrayXd shifted = quad.polar_cosines().array().square() - 1.0;
  const double scaled_norm = (quad.weights().array() * (kappa * shifted).exp()).sum();
  const double t = mu.dot(n);
  return std::exp(kappa * (t * t - 1.0)) / scaled_norm;
}

double watson_tau1(double kappa, const SphereQuadrature& quad) {
  const double k[] = {kappa};
  const MatrixXd masses = watson_node_masses(k, quad);
  return masses.col(0).dot(quad.polar_cosines().cwiseAbs2());
}

MatrixXd aic_signals(const AcquisitionScheme& scheme, const Vector3d& mu,
                     std::span<const double> kappas, const DiffusivityConfig& cfg,
                     const SphereQuadrature& quad) {
  require_quadrature(quad);
  const MatrixXd masses = watson_node_masses(kappas, quad);
  const Matrix3Xd nodes = quad.aligned_nodes(mu);
  // Stick attenuation exp(-b d_par (g.n)^2) for every gradient/node pair.
  MatrixXd stick = scheme.directions().transpose() * nodes;
  stick.array() = stick.array().square().colwise() * (-cfg.d_par * scheme.bvalues().array());
  stick.array() = stick.array().exp();
  return stick * masses;
}

VectorXd aic_signal(const AcquisitionScheme& scheme, const Vector3d& mu, double kappa,
                    const DiffusivityConfig& cfg, const SphereQuadrature& quad) {
  const double k[] = {kappa};
  return aic_signals(scheme, mu, k, cfg, quad).col(0);
}

Matrix3d extra_cellular_tensor(const Vector3d& mu, double tau1, double v_ic,
                               const DiffusivityConfig& cfg) {
  const double d_perp = cfg.d_par * (1.0 - v_ic);
  const Matrix3d axial = mu * mu.transpose();
  const Matrix3d radial = Matrix3d::Identity() - axial;
  return (cfg.d_par - d_perp) * (tau1 * axial + 0.5 * (1.0 - tau1) * radial) +
         d_perp * Matrix3d::Identity();
}

VectorXd aec_signal_from_tau1(const AcquisitionScheme& scheme, const Vector3d& mu, double tau1,
                              double v_ic, const DiffusivityConfig& cfg) {
  if (!(v_ic >= 0.0 && v_ic <= 1.0)) throw DomainError("aec_signal: v_ic outside [0, 1]");
  const Matrix3d tensor = extra_cellular_tensor(mu, tau1, v_ic, cfg);
  const Matrix3Xd& g = scheme.directions();
  const VectorXd quadratic = (g.array() * (tensor * g).array()).colwise().sum().transpose();
  return (-scheme.bvalues().array() * quadratic.array()).exp().matrix();
}

VectorXd aec_signal(const AcquisitionScheme& scheme, const Vector3d& mu, double kappa,
                    double v_ic, const DiffusivityConfig& cfg, const SphereQuadrature& quad) {
  return aec_signal_from_tau1(scheme, mu, watson_tau1(kappa, quad), v_ic, cfg);
}

VectorXd aiso_signal(const AcquisitionScheme& scheme, const DiffusivityConfig& cfg) {
  return (-cfg.d_iso * scheme.bvalues().array()).exp().matrix();
}

VectorXd synthesize(const AcquisitionScheme& scheme, const TissueParams& params,
                    const DiffusivityConfig& cfg, const SphereQuadrature& quad) {
  params.validate();
  const VectorXd a_ic = aic_signal(scheme, params.mu, params.kappa, cfg, quad);
  const VectorXd a_ec = aec_signal(scheme, params.mu, params.kappa, params.v_ic, cfg, quad);
  const VectorXd a_iso = aiso_signal(scheme, cfg);
  return (1.0 - params.v_iso) * (params.v_ic * a_ic + (1.0 - params.v_ic) * a_ec) +
         params.v_iso * a_iso;
}

}  // namespace medn
