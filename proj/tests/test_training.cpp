#include <doctest.h>

#include <algorithm>
#include <set>

#include "medn/datagen.hpp"
#include "medn/network.hpp"
#include "medn/training.hpp"
#include "support.hpp"

using namespace medn;

namespace {

const SphereQuadrature& quad() {
  static const SphereQuadrature q = SphereQuadrature::make_default();
  return q;
}

// Small noisy phantom on the two-shell protocol with the b = 0 input row.
TrainingSet phantom(Index n, std::uint64_t seed) {
  const AcquisitionScheme scheme = two_shell_protocol();
  NoiseSpec noise;
  noise.seed = seed;
  const VoxelDataset data = make_dataset(scheme, n, noise, quad(), seed);
  return {network_inputs(scheme, data.signals), to_matrix(*data.targets)};
}

MednWeights<double> small_medn(std::uint64_t seed) {
  MednShape shape;
  shape.inputs = 61;
  shape.hidden = 41;
  return init_weights_random(shape, seed);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("validation split") {
  for (Index n : {10, 11, 95, 1000, 50000}) {
    const SplitIndices split = split_dataset(n, 0.1, 3);
    CHECK(static_cast<Index>(split.validation.size()) == std::lround(0.1 * static_cast<double>(n)));
    CHECK(static_cast<Index>(split.training.size() + split.validation.size()) == n);
    std::set<Index> all(split.training.begin(), split.training.end());
    all.insert(split.validation.begin(), split.validation.end());
    CHECK(static_cast<Index>(all.size()) == n);
  }
  CHECK(split_dataset(100, 0.1, 3).validation == split_dataset(100, 0.1, 3).validation);
  CHECK(split_dataset(100, 0.1, 3).validation != split_dataset(100, 0.1, 4).validation);
}

TEST_CASE("configuration checks") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.validation_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  const TrainingSet tiny{MatrixXd::Ones(61, 5), Matrix3Xd::Zero(3, 5)};
  CHECK_THROWS_AS(train_medn(small_medn(1), tiny, cfg), DataError);
  const TrainingSet empty{MatrixXd(61, 0), Matrix3Xd(3, 0)};
  CHECK_THROWS_AS(train_medn(small_medn(1), empty, cfg), DataError);
  const TrainingSet wrong{MatrixXd::Ones(60, 20), Matrix3Xd::Zero(3, 20)};
  CHECK_THROWS_AS(train_medn(small_medn(1), wrong, cfg), DimensionError);
}

TEST_CASE("training is reproducible and independent of the worker count") {
  const TrainingSet data = phantom(300, 5);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 64;
  cfg.adam.learning_rate = 1e-3;
  const auto [w1, h1] = train_medn(small_medn(6), data, cfg);
  const auto [w2, h2] = train_medn(small_medn(6), data, cfg);
  CHECK(w1 == w2);
  REQUIRE(h1.epochs.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(h1.epochs[e].train.total() == h2.epochs[e].train.total());
    CHECK(h1.epochs[e].validation.total() == h2.epochs[e].validation.total());
  }
  cfg.threads = 3;
  const auto [w3, h3] = train_medn(small_medn(6), data, cfg);
  CHECK(w3 == w1);
  CHECK(h3.epochs[1].validation.total() == h1.epochs[1].validation.total());
  CHECK(h1.training_count == 270);
  CHECK(h1.validation_count == 30);
}

TEST_CASE("training lowers the loss and keeps the best epoch") {
  const TrainingSet data = phantom(600, 9);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  cfg.adam.learning_rate = 1e-3;
  const auto [best, history] = train_medn(small_medn(10), data, cfg);
  REQUIRE(history.epochs.size() == 5);
  CHECK(history.epochs.back().train.total() < history.epochs.front().train.total());
  CHECK(best.H.minCoeff() >= 0.0);

  const auto min_it = std::min_element(history.epochs.begin(), history.epochs.end(), [](const auto& a, const auto& b) {
    return a.validation.total() < b.validation.total();
  });
  CHECK(history.best_epoch == min_it->epoch);

  cfg.keep_best = false;
  const auto [last, last_history] = train_medn(small_medn(10), data, cfg);
  CHECK(last_history.best_epoch == 5);
  // Validation loss of the returned weights matches the recorded epoch.
  const SplitIndices split = split_dataset(600, 0.1, cfg.seed);
  const MatrixXd vy = data.signals(Eigen::all, split.validation);
  const MatrixXd vt = data.targets(Eigen::all, split.validation);
  CHECK(batch_loss<double>(forward_outputs<double>(best, vy), vt).total() ==
        doctest::Approx(min_it->validation.total()).epsilon(1e-12));
  CHECK(batch_loss<double>(forward_outputs<double>(last, vy), vt).total() ==
        doctest::Approx(last_history.epochs.back().validation.total()).epsilon(1e-12));
}

TEST_CASE("batch prediction") {
  const MednWeights<double> w = small_medn(12);
  const MatrixXd y = test::uniform_matrix(61, 40, 0.0, 1.0, 13);
  std::vector<Microstructure> raw;
  const std::vector<Microstructure> out = predict_batch(w, y, &raw);
  REQUIRE(out.size() == 40);
  CHECK(out[7] == forward_single(w, y.col(7)).clamped());
  CHECK(raw[7] == forward_single(w, y.col(7)));
  for (const Microstructure& m : out) CHECK(m == m.clamped());

  // Order equivariance and identical inputs.
  MatrixXd reversed = y.rowwise().reverse();
  const std::vector<Microstructure> rev = predict_batch(w, reversed);
  for (std::size_t i = 0; i < 40; ++i) CHECK(rev[39 - i] == out[i]);
  MatrixXd same(61, 2);
  same << y.col(0), y.col(0);
  const std::vector<Microstructure> twin = predict_batch(w, same);
  CHECK(twin[0] == twin[1]);
  CHECK(predict_batch(w, y, nullptr, 4) == out);
  CHECK_THROWS_AS(predict_batch(w, MatrixXd::Ones(60, 1)), DimensionError);
}

}
