// Acceptance harness: one [PASS]/[FAIL] line per criterion. Criteria 4-6 write
// their outputs under <out>/run_a; criterion 7 repeats them into <out>/run_b
// and compares the two trees byte for byte.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_check.hpp"
#include "medn/amico.hpp"
#include "medn/datagen.hpp"
#include "medn/evaluate.hpp"
#include "medn/io.hpp"
#include "medn/parallel.hpp"
#include "medn/pipeline.hpp"
#include "medn/sparse_solvers.hpp"
#include "medn/training.hpp"
#include "support.hpp"

using namespace medn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const SphereQuadrature& quad() {
  static const SphereQuadrature q = SphereQuadrature::make_default();
  return q;
}

AcquisitionScheme fixture_scheme() { return io::read_scheme(test::data_dir() / "two_shell_60.txt"); }


Outcome gradients() {
  // Instances whose pre-activations sit within this distance of the threshold
  // are redrawn: a perturbation of h could flip a unit on or off there.
  constexpr double kMargin = 1e-4;
  // Central differences at h = 1e-6 carry about 1e-10 of round-off, so entries
  // are compared relative to max(|analytic|, |numeric|, 1e-4).
  constexpr double kFloor = 1e-4;
  double worst = 0.0;
  int redrawn = 0;
  for (int layers : {3, 8}) {
    int accepted = 0;
    for (std::uint64_t seed = 1; accepted < 20; ++seed) {
      MednShape shape;
      shape.inputs = 10;
      shape.hidden = 20;
      shape.layers = layers;
      const MednWeights<double> w = init_weights_random(shape, mix_seed(seed, layers));
      const MatrixXd y = test::uniform_matrix(10, 4, 0.0, 1.0, mix_seed(seed, 100 + layers));
      const MatrixXd t = test::uniform_matrix(3, 4, 0.0, 1.0, mix_seed(seed, 200 + layers));
      if (test::threshold_margin(w, y) < kMargin) {
        ++redrawn;
        continue;
      }
      worst = std::max(worst, test::check_medn_gradients(w, y, t, 1e-6, kFloor).max_relative_error);
      ++accepted;
    }
  }
  return {worst < 1e-5, fmt("max relative error %.2e over 40 instances (T = 3, 8; %d redrawn near the threshold)",
                            worst, redrawn)};
}

Outcome watson() {
  double worst_norm = 0.0;
  for (double kappa : {0.0, 0.5, 5.0, 50.0, 100.0}) {
    const auto along = [&](double t) {
      const Vector3d n(std::sqrt(std::max(0.0, 1.0 - t * t)), 0.0, t);
      return watson_density(n, Vector3d::UnitZ(), kappa, quad());
    };
    const double total = 2.0 * std::numbers::pi * test::simpson(along, -1.0, 1.0, 40000);
    worst_norm = std::max(worst_norm, std::abs(total - 1.0));
  }

  const AcquisitionScheme scheme = fixture_scheme();
  const DiffusivityConfig cfg;
  std::mt19937_64 rng(5);
  double worst_stick = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector3d mu = test::random_unit(rng);
    const VectorXd a = aic_signal(scheme, mu, 1e4, cfg, quad());
    for (Index k = 0; k < scheme.size(); ++k) {
      const double c = scheme.direction(k).dot(mu);
      worst_stick = std::max(worst_stick, std::abs(a(k) - std::exp(-scheme.bvalue(k) * cfg.d_par * c * c)));
    }
  }
  return {worst_norm < 1e-6 && worst_stick < 2e-3,
          fmt("normalization error %.2e (limit 1e-6); stick error %.2e at kappa = 1e4 (limit 2e-3)", worst_norm,
              worst_stick)};
}

Outcome solvers() {
  std::mt19937_64 rng(2017);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> value(0.3, 1.0);
  int recovered = 0;
  int max_iterations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    MatrixXd a(60, 145);
    for (Index c = 0; c < 145; ++c) {
      for (Index r = 0; r < 60; ++r) a(r, c) = gauss(rng);
      a.col(c).normalize();
    }
    VectorXd truth = VectorXd::Zero(145);
    for (int placed = 0; placed < 3;) {
      const Index j = static_cast<Index>(rng() % 145);
      if (truth(j) == 0.0) {
        truth(j) = value(rng);
        ++placed;
      }
    }
    IhtOptions opts;
    opts.lambda = 0.02;
    const auto [f, report] = iht_solve(a, VectorXd(a * truth), opts);
    max_iterations = std::max(max_iterations, report.iterations);
    const bool support = ((f.values.array() != 0.0) == (truth.array() != 0.0)).all();
    if (support && report.iterations <= 500 && (f.values - truth).cwiseAbs().maxCoeff() < 1e-3) ++recovered;
  }

  double worst_residual = 0.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd a(60, 145);
    for (Index c = 0; c < 145; ++c)
      for (Index r = 0; r < 60; ++r) a(r, c) = unit(rng);
    VectorXd truth = VectorXd::Zero(145);
    for (int i = 0; i < 8; ++i) truth(static_cast<Index>(rng() % 145)) = unit(rng);
    const VectorXd y = a * truth;
    const auto [f, report] = nnls_regularized(a, y);
    worst_residual = std::max(worst_residual, (a * f.values - y).norm());
  }
  return {recovered >= 95 && worst_residual < 1e-6,
          fmt("IHT recovered %d/100 (max %d iterations); NNLS residual %.2e", recovered, max_iterations,
              worst_residual)};
}

// Criteria 4-6 share one pipeline so they can be rerun for criterion 7.

struct PipelineResult {
  Outcome amico;
  Outcome medn;
  Outcome mlp;
};

Outcome amico_recovery(const fs::path& dir) {
  const AcquisitionScheme scheme = fixture_scheme();
  const ParamGrid grid = ParamGrid::make_default();
  const DiffusivityConfig cfg;
  std::mt19937_64 rng(404);
  const Index n = 1000;
  MatrixXd signals(scheme.size(), n);
  std::vector<Microstructure> truth;
  for (Index i = 0; i < n; ++i) {
    TissueParams p;
    p.v_ic = grid.vic_values[rng() % grid.vic_values.size()];
    p.kappa = grid.kappa_values[rng() % grid.kappa_values.size()];
    p.mu = test::random_unit(rng);
    signals.col(i) = synthesize(scheme, p, cfg, quad());
    truth.push_back({p.v_ic, 0.0, od_from_kappa(p.kappa)});
  }
  const std::vector<AmicoResult> fits = amico_batch(scheme, signals, grid, cfg, quad(), {}, 1);
  std::vector<Microstructure> est;
  std::vector<io::AmicoRow> rows;
  for (Index i = 0; i < n; ++i) {
    const AmicoResult& r = fits[static_cast<std::size_t>(i)];
    est.push_back(r.estimate);
    rows.push_back({i, r.estimate, r.tensor.principal_direction, r.tensor.residual});
  }
  io::write_amico_results(dir / "grid_voxels.csv", rows);
  const EvalReport report = evaluate("amico", est, truth);
  io::write_text(dir / "grid_voxels_report.txt", report.to_metrics());

  const VectorXd csf = aiso_signal(scheme, cfg);
  const AmicoResult pure = amico_estimate(scheme, csf, grid, cfg, quad());
  io::write_text(dir / "csf_voxel.txt", "v_iso=" + io::format_double(pure.estimate.v_iso) + '\n');

  const bool pass = report.mad[0] <= 0.09 && report.mad[2] <= 0.09 && pure.estimate.v_iso >= 0.95;
  return {pass, fmt("MAD(v_ic) %.4f, MAD(od) %.4f (limit 0.09); pure CSF v_iso %.4f (limit 0.95)", report.mad[0],
                    report.mad[2], pure.estimate.v_iso)};
}

std::string mad_string(const std::array<double, 3>& m) {
  return fmt("v_ic %.4f, v_iso %.4f, od %.4f", m[0], m[1], m[2]);
}

std::vector<Microstructure> predictions_of(const std::vector<AmicoResult>& fits) {
  std::vector<Microstructure> out;
  for (const AmicoResult& r : fits) out.push_back(r.estimate);
  return out;
}

PipelineResult run_pipeline(const fs::path& dir, bool verbose) {
  fs::create_directories(dir);
  PipelineResult result;
  auto start = Clock::now();
  result.amico = amico_recovery(dir);
  if (verbose) std::cerr << fmt("  grid-point AMICO: %.1f s\n", seconds_since(start));

  // Benchmark data: training ids [0, 50000), test ids [50000, 60000).
  start = Clock::now();
  const AcquisitionScheme scheme = fixture_scheme();
  const std::uint64_t data_seed = 20170901;
  NoiseSpec noise;
  noise.model = NoiseModel::rician;
  noise.snr = 30.0;
  const VoxelDataset train = make_dataset(scheme, 50000, noise, quad(), data_seed);
  GenerationOptions test_opts;
  test_opts.first_id = 50000;
  const VoxelDataset test = make_dataset(scheme, 10000, noise, quad(), data_seed, test_opts);
  const std::vector<Microstructure>& gold = *test.targets;
  if (verbose) std::cerr << fmt("  data: %.1f s\n", seconds_since(start));

  start = Clock::now();
  const std::vector<Microstructure> amico =
      predictions_of(amico_batch(scheme, test.signals, ParamGrid::make_default(), {}, quad(), {}, 1));
  io::write_predictions(dir / "amico_test.csv", test.ids, amico);
  if (verbose) std::cerr << fmt("  test-set AMICO: %.1f s\n", seconds_since(start));

  const TrainingSet set{network_inputs(scheme, train.signals), to_matrix(*train.targets)};
  const MatrixXd test_inputs = network_inputs(scheme, test.signals);
  TrainConfig config;
  config.seed = 7;
  config.threads = 1;

  start = Clock::now();
  const MednWeights<double> init = init_medn_from_dictionary(scheme, DictionaryInit{}, MednShape{}, {}, quad());
  const auto [medn, history] = train_medn(init, set, config);
  io::write_medn_weights(dir / "medn_weights.bin", medn);
  io::write_history(dir / "medn_history.csv", history);
  const std::vector<Microstructure> medn_pred = predict_batch(medn, test_inputs);
  io::write_predictions(dir / "medn_test.csv", test.ids, medn_pred);
  if (verbose) std::cerr << fmt("  MEDN training: %.1f s\n", seconds_since(start));

  start = Clock::now();
  MlpShape mlp_shape;
  mlp_shape.inputs = set.signals.rows();
  const auto [mlp, mlp_history] = train_mlp(init_mlp(mlp_shape, mix_seed(config.seed, 1)), set, config);
  io::write_mlp_weights(dir / "mlp_weights.bin", mlp);
  io::write_history(dir / "mlp_history.csv", mlp_history);
  const std::vector<Microstructure> mlp_pred = mlp_predict_batch(mlp, test_inputs);
  io::write_predictions(dir / "mlp_test.csv", test.ids, mlp_pred);
  if (verbose) std::cerr << fmt("  MLP training: %.1f s\n", seconds_since(start));

  EvalReport report = evaluate("medn", medn_pred, gold);
  add_comparison(report, "amico", medn_pred, amico, gold);
  add_comparison(report, "mlp", medn_pred, mlp_pred, gold);
  io::write_text(dir / "benchmark_report.txt", report.to_metrics());

  // Criterion 5.
  const double first_val = history.epochs.front().validation.total();
  const double best_val = history.epochs[static_cast<std::size_t>(history.best_epoch - 1)].validation.total();
  const Comparison& vs_amico = report.comparisons[0];
  int better = 0;
  bool within = true;
  bool significant = true;
  for (std::size_t q = 0; q < 3; ++q) {
    const double m = report.mad[q];
    const double a = vs_amico.comparator_mad[q];
    if (m <= a) ++better;
    if (m > 1.05 * a) within = false;
    if (m < a && !(vs_amico.tests[q].p < 0.05)) significant = false;
  }
  const bool c5 = best_val < first_val && better >= 2 && within && significant;
  std::string p_values;
  for (std::size_t q = 0; q < 3; ++q) p_values += fmt(" %.1e", vs_amico.tests[q].p);
  result.medn = {c5, fmt("val loss epoch 1 %.5f -> best (epoch %d) %.5f; MEDN MAD %s; AMICO MAD %s; p%s",
                         first_val, history.best_epoch, best_val, mad_string(report.mad).c_str(),
                         mad_string(vs_amico.comparator_mad).c_str(), p_values.c_str())};

  // Criterion 6.
  const Comparison& vs_mlp = report.comparisons[1];
  const bool finite = std::all_of(vs_mlp.comparator_mad.begin(), vs_mlp.comparator_mad.end(),
                                  [](double v) { return std::isfinite(v); });
  const std::string text = report.to_metrics();
  result.mlp = {finite && mlp_history.epochs.size() == 10 && text.find("vs.mlp.mad.od=") != std::string::npos,
                fmt("MLP MAD %s reported next to MEDN", mad_string(vs_mlp.comparator_mad).c_str())};
  return result;
}

// Relative paths of every regular file under `root`.
std::set<fs::path> tree(const fs::path& root) {
  std::set<fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file()) out.insert(fs::relative(entry.path(), root));
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome compare_trees(const fs::path& a, const fs::path& b) {
  const std::set<fs::path> files = tree(a);
  if (files != tree(b)) return {false, "the two runs wrote different file sets"};
  std::vector<std::string> differing;
  for (const fs::path& rel : files)
    if (slurp(a / rel) != slurp(b / rel)) differing.push_back(rel.string());
  if (!differing.empty()) return {false, "files differ: " + differing.front()};
  return {true, fmt("%zu output files byte-identical across two strict runs", files.size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  bool verbose = false;
  app.add_option("--out", out_dir, "Directory for criterion outputs");
  app.add_option("--criteria", only, "Run only these criteria (1-7)")->check(CLI::Range(1, 7));
  app.add_flag("--verbose", verbose, "Print stage timings to stderr");
  CLI11_PARSE(app, argc, argv);

  const auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
  const fs::path out(out_dir);
  fs::remove_all(out);
  fs::create_directories(out);

  bool all = true;
  const auto report = [&](int criterion, const Outcome& o, double secs) {
    all = all && o.pass;
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << o.detail
              << fmt(" (%.1f s)", secs) << std::endl;
  };
  const auto timed = [&](int criterion, auto fn) {
    if (!wanted(criterion)) return;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    report(criterion, o, seconds_since(start));
  };

  timed(1, gradients);
  timed(2, watson);
  timed(3, solvers);

  if (wanted(4) || wanted(5) || wanted(6) || wanted(7)) {
    auto start = Clock::now();
    PipelineResult first;
    try {
      first = run_pipeline(out / "run_a", verbose);
    } catch (const std::exception& e) {
      first.amico = first.medn = first.mlp = {false, std::string("error: ") + e.what()};
    }
    const double secs = seconds_since(start);
    if (wanted(4)) report(4, first.amico, secs);
    if (wanted(5)) report(5, first.medn, secs);
    if (wanted(6)) report(6, first.mlp, secs);
    if (wanted(7)) {
      start = Clock::now();
      Outcome o;
      try {
        run_pipeline(out / "run_b", verbose);
        o = compare_trees(out / "run_a", out / "run_b");
      } catch (const std::exception& e) {
        o = {false, std::string("error: ") + e.what()};
      }
      report(7, o, seconds_since(start));
    }
  }
  return all ? 0 : 1;
}
