#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <random>

#include "medn/datagen.hpp"
#include "medn/signal_model.hpp"
#include "support.hpp"

using namespace medn;

namespace {

const SphereQuadrature& quad() {
  static const SphereQuadrature q = SphereQuadrature::make_default();
  return q;
}

AcquisitionScheme single(const Vector3d& g, double b) {
  return AcquisitionScheme(Matrix3Xd(g), VectorXd::Constant(1, b));
}

// 2 pi * integral over t in [-1, 1] of the density along a meridian.
double density_integral(double kappa) {
  const Vector3d mu = Vector3d::UnitZ();
  const auto along = [&](double t) {
    const Vector3d n(std::sqrt(std::max(0.0, 1.0 - t * t)), 0.0, t);
    return watson_density(n, mu, kappa, quad());
  };
  return 2.0 * std::numbers::pi * test::simpson(along, -1.0, 1.0, 20000);
}

}  // namespace

TEST_SUITE("signal_model") {

TEST_CASE("orientation dispersion from concentration") {
  CHECK(od_from_kappa(1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(od_from_kappa(0.0) == 1.0);
  CHECK(od_from_kappa(1e6) < 1e-5);
  for (double k = 0.0; k < 50.0; k += 0.5) CHECK(od_from_kappa(k + 0.5) < od_from_kappa(k));
  // Same as (2/pi) atan(1/kappa) away from zero.
  for (double k : {0.1, 2.0, 30.0})
    CHECK(od_from_kappa(k) == doctest::Approx(2.0 / std::numbers::pi * std::atan(1.0 / k)).epsilon(1e-14));
  const double h = 1e-6;
  for (double k : {0.0, 0.7, 12.0})
    CHECK(od_from_kappa_derivative(k) ==
          doctest::Approx((od_from_kappa(k + h) - od_from_kappa(std::max(k - h, 0.0))) /
                          (k + h - std::max(k - h, 0.0)))
              .epsilon(1e-6));
}

TEST_CASE("concentration from orientation dispersion") {
  CHECK(kappa_from_od(0.5) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(kappa_from_od(0.25) == doctest::Approx(1.0 / std::tan(std::numbers::pi / 8.0)).epsilon(1e-14));
  CHECK(kappa_from_od(0.25) == doctest::Approx(2.41421).epsilon(1e-5));
  for (double od = 0.01; od < 1.0; od += 0.01)
    CHECK(std::abs(od_from_kappa(kappa_from_od(od)) - od) <= 1e-12 * od);
  CHECK(std::abs(od_from_kappa(kappa_from_od(0.3)) - 0.3) <= 1e-12);
  CHECK_THROWS_AS(kappa_from_od(0.0), DomainError);
  CHECK_THROWS_AS(kappa_from_od(1.0), DomainError);
  CHECK_THROWS_AS(kappa_from_od(-0.2), DomainError);
}

TEST_CASE("Watson density is uniform at zero concentration") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i)
    CHECK(watson_density(test::random_unit(rng), Vector3d::UnitX(), 0.0, quad()) ==
          doctest::Approx(1.0 / (4.0 * std::numbers::pi)).epsilon(1e-13));
}

TEST_CASE("Watson density integrates to one on an independent grid") {
  for (double kappa : {0.0, 0.5, 5.0, 50.0, 100.0})
    CHECK(std::abs(density_integral(kappa) - 1.0) < 1e-6);
}

TEST_CASE("Watson peak matches the hypergeometric normalizer") {
  // 1/C = 4 pi sum_n kappa^n / (n! (2n + 1)), so the density at n = mu is
  // exp(kappa) C.
  for (double kappa : {0.5, 5.0, 50.0, 100.0}) {
    double term = 1.0;
    double series = 1.0;
    for (int n = 1; n < 2000; ++n) {
      term *= kappa / n;
      series += term / (2.0 * n + 1.0);
    }
    const double peak = std::exp(kappa) / (4.0 * std::numbers::pi * series);
    CHECK(watson_density(Vector3d::UnitY(), Vector3d::UnitY(), kappa, quad()) ==
          doctest::Approx(peak).epsilon(1e-8));
  }
}

TEST_CASE("Watson density peaks along the mean orientation") {
  for (double kappa : {0.1, 3.0, 40.0})
    CHECK(watson_density(Vector3d::UnitZ(), Vector3d::UnitZ(), kappa, quad()) >
          watson_density(Vector3d::UnitX(), Vector3d::UnitZ(), kappa, quad()));
}

TEST_CASE("node masses sum to one") {
  const double kappas[] = {0.0, 1.0, 1e4};
  const MatrixXd masses = watson_node_masses(kappas, quad());
  for (Index c = 0; c < masses.cols(); ++c) CHECK(masses.col(c).sum() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK((masses.array() >= 0.0).all());
}

TEST_CASE("second moment of the Watson distribution") {
  CHECK(std::abs(watson_tau1(0.0, quad()) - 1.0 / 3.0) < 1e-9);
  CHECK(watson_tau1(1e4, quad()) >= 0.999);
  CHECK(watson_tau1(10.0, quad()) > watson_tau1(1.0, quad()));
  double previous = 0.0;
  for (double kappa = 0.0; kappa <= 200.0; kappa += 2.5) {
    const double tau = watson_tau1(kappa, quad());
    CHECK(tau > previous);
    previous = tau;
  }
  // Ratio of one-dimensional integrals over the polar cosine.
  for (double kappa : {0.5, 7.0, 60.0}) {
    const double num = test::simpson([&](double t) { return t * t * std::exp(kappa * (t * t - 1.0)); }, 0.0, 1.0, 20000);
    const double den = test::simpson([&](double t) { return std::exp(kappa * (t * t - 1.0)); }, 0.0, 1.0, 20000);
    CHECK(watson_tau1(kappa, quad()) == doctest::Approx(num / den).epsilon(1e-10));
  }
}

TEST_CASE("intra-cellular signal limits") {
  const DiffusivityConfig cfg;
  const Vector3d mu = Vector3d(1.0, 1.0, 0.0).normalized();
  CHECK(aic_signal(single(Vector3d::UnitZ(), 0.0), mu, 3.0, cfg, quad())(0) ==
        doctest::Approx(1.0).epsilon(1e-14));
  const Vector3d perp = Vector3d(1.0, -1.0, 0.0).normalized();
  CHECK(std::abs(aic_signal(single(perp, 1000.0), mu, 1e4, cfg, quad())(0) - 1.0) < 1e-3);
  CHECK(std::abs(aic_signal(single(mu, 1000.0), mu, 1e4, cfg, quad())(0) - std::exp(-1.7)) < 2e-3);

  // Uniform sticks: mean of exp(-x t^2) over t in [0, 1].
  for (double b : {500.0, 1000.0, 3000.0}) {
    const double x = b * cfg.d_par;
    const double exact = std::sqrt(std::numbers::pi) * std::erf(std::sqrt(x)) / (2.0 * std::sqrt(x));
    CHECK(aic_signal(single(perp, b), mu, 0.0, cfg, quad())(0) == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("high concentration reproduces the stick on the default scheme") {
  const AcquisitionScheme scheme = two_shell_protocol();
  const DiffusivityConfig cfg;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector3d mu = test::random_unit(rng);
    const VectorXd a = aic_signal(scheme, mu, 1e4, cfg, quad());
    const VectorXd cos2 = (scheme.directions().transpose() * mu).array().square();
    const VectorXd stick = (-cfg.d_par * scheme.bvalues().array() * cos2.array()).exp();
    CHECK((a - stick).cwiseAbs().maxCoeff() < 2e-3);
  }
}

TEST_CASE("extra-cellular tensor and signal") {
  const DiffusivityConfig cfg;
  const Vector3d mu = Vector3d(0.2, 0.3, 0.9).normalized();
  const AcquisitionScheme scheme = two_shell_protocol();
  const VectorXd free = aec_signal(scheme, mu, 4.0, 0.0, cfg, quad());
  const VectorXd expected = (-cfg.d_par * scheme.bvalues().array()).exp();
  CHECK((free - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(aec_signal(single(mu, 0.0), mu, 4.0, 0.6, cfg, quad())(0) == 1.0);

  for (double v_ic : {0.0, 0.3, 0.9})
    for (double tau1 : {1.0 / 3.0, 0.6, 1.0}) {
      const Matrix3d d = extra_cellular_tensor(mu, tau1, v_ic, cfg);
      const double d_perp = cfg.d_par * (1.0 - v_ic);
      CHECK(d.trace() == doctest::Approx(cfg.d_par + 2.0 * d_perp).epsilon(1e-14));
      CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
      // Along mu: d_perp + (d_par - d_perp) tau1.
      CHECK(mu.dot(d * mu) == doctest::Approx(d_perp + (cfg.d_par - d_perp) * tau1).epsilon(1e-13));
    }
  CHECK_THROWS_AS(aec_signal(scheme, mu, 1.0, 1.5, cfg, quad()), DomainError);
}

TEST_CASE("isotropic compartment") {
  const DiffusivityConfig cfg;
  CHECK(aiso_signal(single(Vector3d::UnitX(), 0.0), cfg)(0) == 1.0);
  CHECK(aiso_signal(single(Vector3d::UnitX(), 1000.0), cfg)(0) == doctest::Approx(0.049787).epsilon(1e-5));
  CHECK(aiso_signal(single(Vector3d::UnitX(), 2000.0), cfg)(0) == doctest::Approx(0.0024788).epsilon(1e-4));
}

TEST_CASE("three-compartment synthesis") {
  const DiffusivityConfig cfg;
  const AcquisitionScheme scheme = two_shell_protocol();
  const Vector3d mu = Vector3d(-0.5, 0.1, 0.8).normalized();

  CHECK(synthesize(scheme, {0.4, 1.0, 2.0, mu}, cfg, quad()) == aiso_signal(scheme, cfg));
  CHECK((synthesize(scheme, {1.0, 0.0, 2.0, mu}, cfg, quad()) - aic_signal(scheme, mu, 2.0, cfg, quad()))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  const AcquisitionScheme zero_b(scheme.directions(), VectorXd::Zero(scheme.size()));
  CHECK((synthesize(zero_b, {0.3, 0.2, 8.0, mu}, cfg, quad()).array() - 1.0).abs().maxCoeff() < 1e-14);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const TissueParams p = sample_params(rng);
    const VectorXd y = synthesize(scheme, p, cfg, quad());
    const VectorXd a_ic = aic_signal(scheme, p.mu, p.kappa, cfg, quad());
    const VectorXd a_ec = aec_signal(scheme, p.mu, p.kappa, p.v_ic, cfg, quad());
    const VectorXd a_iso = aiso_signal(scheme, cfg);
    CHECK((y.array() > 0.0).all());
    CHECK((y.array() <= 1.0).all());
    const VectorXd lo = a_ic.cwiseMin(a_ec).cwiseMin(a_iso);
    const VectorXd hi = a_ic.cwiseMax(a_ec).cwiseMax(a_iso);
    CHECK(((y - lo).array() >= -1e-15).all());
    CHECK(((hi - y).array() >= -1e-15).all());
  }
  CHECK_THROWS_AS(synthesize(scheme, {1.2, 0.0, 1.0, mu}, cfg, quad()), DomainError);
  CHECK_THROWS_AS(synthesize(scheme, {0.5, 0.0, 1.0, Vector3d(1.0, 1.0, 0.0)}, cfg, quad()), DomainError);
}

TEST_CASE("signals are invariant under a common rotation") {
  const DiffusivityConfig cfg;
  const AcquisitionScheme scheme = two_shell_protocol();
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix3d r = Eigen::Quaterniond::UnitRandom().toRotationMatrix();
    const TissueParams p = sample_params(rng);
    const AcquisitionScheme rotated(r * scheme.directions(), scheme.bvalues());
    TissueParams q = p;
    q.mu = r * p.mu;
    const VectorXd a = synthesize(scheme, p, cfg, quad());
    const VectorXd b = synthesize(rotated, q, cfg, quad());
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("quadratures with too few nodes are rejected") {
  const double breaks[] = {0.0, 1.0};
  const SphereQuadrature tiny = SphereQuadrature::product(breaks, 1, 5);
  CHECK_THROWS_AS(aic_signal(single(Vector3d::UnitZ(), 1000.0), Vector3d::UnitZ(), 1.0, {}, tiny),
                  ConfigError);
}

TEST_CASE("acquisition scheme validation and subsampling") {
  Matrix3Xd dirs(3, 2);
  dirs << 1.0, 0.0, 0.0, 1.0, 0.0, 0.0;
  CHECK_NOTHROW(AcquisitionScheme(dirs, Eigen::Vector2d(0.0, 1000.0)));
  CHECK_THROWS_AS(AcquisitionScheme(dirs, Eigen::Vector2d(-1.0, 1000.0)), DomainError);
  dirs(0, 0) = 1.1;
  CHECK_THROWS_AS(AcquisitionScheme(dirs, Eigen::Vector2d(0.0, 1000.0)), DomainError);
  CHECK_THROWS_AS(AcquisitionScheme(Matrix3Xd(3, 2), VectorXd(3)), DimensionError);

  const AcquisitionScheme scheme = three_shell_protocol();
  std::vector<Index> identity(static_cast<std::size_t>(scheme.size()));
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<Index>(i);
  CHECK(scheme.subsample(identity) == scheme);
  const std::vector<Index> pick{5, 70, 2};
  const AcquisitionScheme sub = scheme.subsample(pick);
  CHECK(sub.size() == 3);
  CHECK(sub.direction(1) == scheme.direction(70));
  CHECK(sub.bvalue(1) == scheme.bvalue(70));
  CHECK_THROWS_AS(scheme.subsample(std::vector<Index>{1, 1}), DomainError);
  CHECK_THROWS_AS(scheme.subsample(std::vector<Index>{90}), DomainError);
  CHECK(scheme.shells() == std::vector<double>{1000.0, 2000.0, 3000.0});
}

}
