// Command-line driver: data generation, dictionary export, DTI/AMICO fitting,
// network training, prediction and evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "medn/amico.hpp"
#include "medn/datagen.hpp"
#include "medn/evaluate.hpp"
#include "medn/io.hpp"
#include "medn/parallel.hpp"
#include "medn/pipeline.hpp"
#include "medn/training.hpp"

namespace {

using namespace medn;

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kNumeric = 4 };

constexpr std::uint64_t kDefaultSeed = 20170901;

struct Common {
  int threads = 0;
  bool strict = false;

  int workers() const { return strict ? 1 : resolve_threads(threads); }
};

struct GridArgs {
  int n_vic = 12;
  int n_kappa = 12;
  std::vector<double> vic_range{0.1, 0.99};
  std::vector<double> od_range{0.03, 0.95};

  ParamGrid make() const {
    return ParamGrid::make(n_vic, vic_range[0], vic_range[1], n_kappa, od_range[0], od_range[1]);
  }
};

void add_grid_options(CLI::App* cmd, GridArgs& grid) {
  cmd->add_option("--grid-vic", grid.n_vic, "Intra-cellular fraction grid size")
      ->capture_default_str();
  cmd->add_option("--grid-kappa", grid.n_kappa, "Concentration grid size")->capture_default_str();
  cmd->add_option("--vic-range", grid.vic_range, "Fraction grid endpoints")
      ->expected(2)
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--od-range", grid.od_range, "Dispersion grid endpoints (kappa mapped from OD)")
      ->expected(2)
      ->delimiter(',')
      ->capture_default_str();
}

// Voxel-wise signals of a dataset in the layout the network was trained on.
MatrixXd model_inputs(const VoxelDataset& data, Index weight_inputs) {
  MatrixXd inputs = network_inputs(data.scheme, data.signals);
  if (inputs.rows() != weight_inputs)
    throw DataError("weights expect " + std::to_string(weight_inputs) + " inputs but the dataset gives " +
                    std::to_string(inputs.rows()) + " (K = " + std::to_string(data.scheme.size()) + ")");
  return inputs;
}

// --- gen-data ---------------------------------------------------------------

struct GenArgs {
  std::string scheme;
  std::string subset_scheme;
  std::string targets = "truth";
  std::string out;
  Index n = 1000;
  double snr = 30.0;
  std::string noise = "rician";
  std::uint64_t seed = kDefaultSeed;
  std::int64_t first_id = 0;
  GridArgs grid;
};

int cmd_gen_data(const GenArgs& args, const Common& common) {
  NoiseSpec noise;
  noise.model = parse_noise_model(args.noise);
  noise.snr = args.snr;
  noise.seed = args.seed;
  noise.validate();
  if (args.n < 1) throw ConfigError("--n must be at least 1");
  if (args.targets != "truth" && args.targets != "amico")
    throw ConfigError("--targets must be 'truth' or 'amico'");
  if (args.targets == "amico" && args.subset_scheme.empty())
    throw ConfigError("--targets amico needs --subset-scheme (gold standard from the dense scheme)");

  const AcquisitionScheme scheme = io::read_scheme(args.scheme);
  const SphereQuadrature quad = SphereQuadrature::make_default();
  GenerationOptions options;
  options.threads = common.workers();
  options.first_id = args.first_id;
  VoxelDataset data = make_dataset(scheme, args.n, noise, quad, args.seed, options);

  if (!args.subset_scheme.empty()) {
    const AcquisitionScheme subset = io::read_scheme(args.subset_scheme);
    if (args.targets == "amico")
      data.targets = gold_standard_amico(data, args.grid.make(), {}, quad, {}, common.workers());
    const std::vector<Index> indices = match_scheme(scheme, subset);
    data = subsample_dataset(data, indices);
  }
  io::write_dataset(args.out, data);
  std::cout << "gen-data: n=" << data.size() << " K=" << data.scheme.size()
            << " noise=" << to_string(noise.model) << " snr=" << noise.snr << " seed=" << args.seed
            << " targets=" << args.targets << " out=" << args.out << '\n';
  return kOk;
}

// --- build-dict -------------------------------------------------------------

struct DictArgs {
  std::string scheme;
  std::string out;
  std::string csv;
  std::vector<double> mu{0.0, 0.0, 1.0};
  int orientations = 0;
  std::uint64_t seed = 77;
  GridArgs grid;
};

int cmd_build_dict(const DictArgs& args) {
  const ParamGrid grid = args.grid.make();
  const AcquisitionScheme scheme = io::read_scheme(args.scheme);
  const SphereQuadrature quad = SphereQuadrature::make_default();
  std::vector<Vector3d> orientations;
  if (args.orientations > 0) {
    const Matrix3Xd dirs = repulsion_directions(args.orientations, args.seed);
    for (Index i = 0; i < dirs.cols(); ++i) orientations.push_back(dirs.col(i));
  } else {
    const Vector3d mu(args.mu[0], args.mu[1], args.mu[2]);
    if (!(mu.norm() > 0.0)) throw ConfigError("--mu must be a nonzero vector");
    orientations.push_back(mu.normalized());
  }
  const Dictionary dict = build_expanded_dictionary(scheme, orientations, grid, {}, quad);
  io::write_dictionary(args.out, dict);
  if (!args.csv.empty()) io::write_dictionary_csv(args.csv, dict);
  std::cout << "build-dict: K=" << dict.rows() << " width=" << dict.width()
            << " orientations=" << dict.orientations.size() << " out=" << args.out << '\n';
  return kOk;
}

// --- fit-dti ----------------------------------------------------------------

struct DtiArgs {
  std::string data;
  std::string out;
};

int cmd_fit_dti(const DtiArgs& args, const Common& common) {
  const VoxelDataset data = io::read_dataset(args.data);
  std::vector<TensorFit> fits(static_cast<std::size_t>(data.size()));
  parallel_for(data.size(), common.workers(), [&](Index i) {
    fits[static_cast<std::size_t>(i)] = dti_fit(data.scheme, data.signals.col(i));
  });
  std::string text = "voxel_id,mu_x,mu_y,mu_z,lambda_1,lambda_2,lambda_3,residual,isotropic\n";
  Index isotropic = 0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const TensorFit& f = fits[i];
    isotropic += f.isotropic ? 1 : 0;
    text += std::to_string(data.ids[i]);
    for (double v : {f.principal_direction.x(), f.principal_direction.y(), f.principal_direction.z(),
                     f.eigenvalues(2), f.eigenvalues(1), f.eigenvalues(0), f.residual})
      text += ',' + io::format_double(v);
    text += f.isotropic ? ",1\n" : ",0\n";
  }
  io::write_text(args.out, text);
  std::cout << "fit-dti: voxels=" << data.size() << " isotropic=" << isotropic << " out=" << args.out
            << '\n';
  return kOk;
}

// --- fit-amico --------------------------------------------------------------

struct AmicoArgs {
  std::string data;
  std::string out;
  std::string report;
  double alpha = 0.0;
  double beta_scale = 1e-3;
  GridArgs grid;
};

int cmd_fit_amico(const AmicoArgs& args, const Common& common) {
  const ParamGrid grid = args.grid.make();
  AmicoOptions options;
  options.alpha = args.alpha;
  options.beta_scale = args.beta_scale;
  if (!(options.alpha >= 0.0) || !(options.beta_scale >= 0.0))
    throw ConfigError("--alpha and --beta-scale must be nonnegative");
  const VoxelDataset data = io::read_dataset(args.data);
  const SphereQuadrature quad = SphereQuadrature::make_default();
  const std::vector<AmicoResult> results =
      amico_batch(data.scheme, data.signals, grid, {}, quad, options, common.workers());

  std::vector<io::AmicoRow> rows;
  std::vector<Microstructure> estimates;
  Index unconverged = 0;
  Index zero_aniso = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const AmicoResult& r = results[i];
    rows.push_back({data.ids[i], r.estimate, r.tensor.principal_direction, r.tensor.residual});
    estimates.push_back(r.estimate);
    unconverged += r.solver.converged ? 0 : 1;
    zero_aniso += r.fractions_summary.zero_anisotropic ? 1 : 0;
  }
  io::write_amico_results(args.out, rows);

  std::ostringstream summary;
  summary << "voxels=" << data.size() << "\nunconverged=" << unconverged
          << "\nzero_anisotropic=" << zero_aniso << '\n';
  if (data.targets) summary << evaluate("amico", estimates, *data.targets).to_metrics();
  std::cout << summary.str();
  if (!args.report.empty()) io::write_text(args.report, summary.str());
  if (unconverged > 0)
    std::cerr << "fit-amico: " << unconverged << " voxel solves hit the iteration limit\n";
  return kOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string history;
  std::string model = "medn";
  std::string init = "random";
  TrainConfig config;
  bool keep_last = false;
  Index hidden = 301;
  int layers = 8;
  double lambda = 0.01;
  DictionaryInit dict_init;
};

int cmd_train(TrainArgs args, const Common& common) {
  if (args.model != "medn" && args.model != "mlp") throw ConfigError("--model must be medn or mlp");
  if (args.init != "random" && args.init != "dictionary")
    throw ConfigError("--init must be random or dictionary");
  args.config.keep_best = !args.keep_last;
  args.config.threads = common.workers();
  args.config.validate();
  if (args.model == "medn" && args.init == "dictionary" && args.dict_init.hidden() != args.hidden)
    throw ConfigError("--hidden must equal init-orientations * init-vic * init-kappa + 1 (" +
                      std::to_string(args.dict_init.hidden()) + ")");

  const VoxelDataset data = io::read_dataset(args.data);
  if (!data.targets) throw DataError(args.data + ": dataset has no targets to train on");
  if (data.size() < 10) throw DataError(args.data + ": need at least 10 training voxels");
  TrainingSet set{network_inputs(data.scheme, data.signals), to_matrix(*data.targets)};

  TrainHistory history;
  if (args.model == "medn") {
    MednShape shape;
    shape.inputs = set.signals.rows();
    shape.hidden = args.hidden;
    shape.layers = args.layers;
    shape.lambda = args.lambda;
    MednWeights<double> initial =
        args.init == "dictionary"
            ? init_medn_from_dictionary(data.scheme, args.dict_init, shape, {},
                                        SphereQuadrature::make_default())
            : init_weights_random(shape, mix_seed(args.config.seed, 1));
    auto [weights, hist] = train_medn(std::move(initial), set, args.config);
    io::write_medn_weights(args.out, weights);
    history = std::move(hist);
  } else {
    MlpShape shape;
    shape.inputs = set.signals.rows();
    auto [weights, hist] = train_mlp(init_mlp(shape, mix_seed(args.config.seed, 1)), set, args.config);
    io::write_mlp_weights(args.out, weights);
    history = std::move(hist);
  }
  if (!args.history.empty()) io::write_history(args.history, history);

  std::cout << "train: model=" << args.model << " init=" << args.init
            << " training=" << history.training_count << " validation=" << history.validation_count
            << '\n';
  for (const EpochRecord& e : history.epochs) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %2d  train_loss %.6f  val_loss %.6f\n", e.epoch,
                  e.train.total(), e.validation.total());
    std::cout << line;
  }
  std::cout << "best_epoch=" << history.best_epoch << " out=" << args.out << '\n';
  return kOk;
}

// --- predict ----------------------------------------------------------------

struct PredictArgs {
  std::string weights;
  std::string data;
  std::string out;
  std::string raw;
};

int cmd_predict(const PredictArgs& args, const Common& common) {
  const VoxelDataset data = io::read_dataset(args.data);
  std::vector<Microstructure> raw;
  std::vector<Microstructure> clamped;
  const io::ModelKind kind = io::detect_model(args.weights);
  if (kind == io::ModelKind::medn) {
    const MednWeights<double> weights = io::read_medn_weights(args.weights);
    clamped = predict_batch(weights, model_inputs(data, weights.inputs()), &raw, common.workers());
  } else {
    const MlpWeights weights = io::read_mlp_weights(args.weights);
    clamped = mlp_predict_batch(weights, model_inputs(data, weights.inputs()), &raw, common.workers());
  }
  io::write_predictions(args.out, data.ids, clamped);
  if (!args.raw.empty()) io::write_predictions(args.raw, data.ids, raw);
  std::cout << "predict: model=" << (kind == io::ModelKind::medn ? "medn" : "mlp")
            << " voxels=" << data.size() << " out=" << args.out << '\n';
  return kOk;
}

// --- evaluate ---------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string name = "medn";
  std::vector<std::string> compare;
  std::string gold;
  std::string out;
};

// Values reordered to follow `ids`; every id must be present.
std::vector<Microstructure> aligned(const io::Predictions& p, const std::vector<std::int64_t>& ids,
                                    const std::string& path) {
  if (p.ids == ids) return p.values;
  std::map<std::int64_t, std::size_t> where;
  for (std::size_t i = 0; i < p.ids.size(); ++i) where[p.ids[i]] = i;
  std::vector<Microstructure> out;
  for (std::int64_t id : ids) {
    const auto it = where.find(id);
    if (it == where.end()) throw DataError(path + ": no row for voxel " + std::to_string(id));
    out.push_back(p.values[it->second]);
  }
  return out;
}

io::Predictions read_gold(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open '" + path + "'");
  char head[21] = {};
  const std::size_t got = std::fread(head, 1, 20, f);
  std::fclose(f);
  if (std::string(head, got) != "# medn voxel-dataset") return io::read_predictions(path);
  const VoxelDataset data = io::read_dataset(path);
  if (!data.targets) throw DataError(path + ": dataset has no targets");
  return {data.ids, *data.targets};
}

int cmd_evaluate(const EvalArgs& args) {
  const io::Predictions gold = read_gold(args.gold);
  if (gold.ids.empty()) throw DataError(args.gold + ": no voxels");
  const std::vector<Microstructure> pred = aligned(io::read_predictions(args.pred), gold.ids, args.pred);
  EvalReport report = evaluate(args.name, pred, gold.values);
  for (const std::string& spec : args.compare) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--compare expects NAME=PATH");
    const std::string path = spec.substr(eq + 1);
    add_comparison(report, spec.substr(0, eq), pred,
                   aligned(io::read_predictions(path), gold.ids, path), gold.values);
  }
  const std::string text = report.to_metrics();
  std::cout << text;
  if (!args.out.empty()) io::write_text(args.out, text);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microstructure estimation: synthetic data, AMICO and the MEDN network"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file supplying option defaults (flags override)");
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (0 = all cores)")
      ->capture_default_str();
  app.add_flag("--strict-deterministic", common.strict,
               "Single-threaded bit-reproducible execution");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic voxel dataset");
  gen_cmd->add_option("--scheme", gen.scheme, "Scheme file the signals are generated on")
      ->required()
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--subset-scheme", gen.subset_scheme,
                      "Keep only these gradients (entries must appear in --scheme)")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--targets", gen.targets,
                      "truth: analytic parameters; amico: AMICO on the full --scheme")
      ->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "Voxel count")->capture_default_str();
  gen_cmd->add_option("--snr", gen.snr, "Signal-to-noise ratio relative to S0 = 1")
      ->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "none, gaussian or rician")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--first-id", gen.first_id, "Identifier of the first voxel")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();
  add_grid_options(gen_cmd, gen.grid);

  DictArgs dict;
  auto* dict_cmd = app.add_subcommand("build-dict", "Export a response dictionary");
  dict_cmd->add_option("--scheme", dict.scheme, "Scheme file")->required()->check(CLI::ExistingFile);
  dict_cmd->add_option("--mu", dict.mu, "Mean orientation")->expected(3)->delimiter(',');
  dict_cmd->add_option("--orientations", dict.orientations,
                       "Expanded dictionary over this many repulsion directions");
  dict_cmd->add_option("--seed", dict.seed, "Seed of the repulsion directions")->capture_default_str();
  dict_cmd->add_option("--out", dict.out, "Binary dictionary file")->required();
  dict_cmd->add_option("--csv", dict.csv, "Also write a CSV copy");
  add_grid_options(dict_cmd, dict.grid);

  DtiArgs dti;
  auto* dti_cmd = app.add_subcommand("fit-dti", "Log-linear tensor fit per voxel");
  dti_cmd->add_option("--data", dti.data, "Dataset file")->required()->check(CLI::ExistingFile);
  dti_cmd->add_option("--out", dti.out, "Output CSV")->required();

  AmicoArgs amico;
  auto* amico_cmd = app.add_subcommand("fit-amico", "AMICO estimate per voxel");
  amico_cmd->add_option("--data", amico.data, "Dataset file")->required()->check(CLI::ExistingFile);
  amico_cmd->add_option("--out", amico.out, "Output CSV")->required();
  amico_cmd->add_option("--report", amico.report, "Write the summary report here too");
  amico_cmd->add_option("--alpha", amico.alpha, "l2 weight")->capture_default_str();
  amico_cmd->add_option("--beta-scale", amico.beta_scale, "l1 weight relative to ||Phi^T y||_inf")
      ->capture_default_str();
  add_grid_options(amico_cmd, amico.grid);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train MEDN or the MLP baseline");
  train_cmd->add_option("--data", train.data, "Training dataset with targets")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Weights file")->required();
  train_cmd->add_option("--history", train.history, "Per-epoch loss CSV");
  train_cmd->add_option("--model", train.model, "medn or mlp")->capture_default_str();
  train_cmd->add_option("--init", train.init, "MEDN initialization: random or dictionary")
      ->capture_default_str();
  train_cmd->add_option("--epochs", train.config.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", train.config.batch_size)->capture_default_str();
  train_cmd->add_option("--learning-rate", train.config.adam.learning_rate)->capture_default_str();
  train_cmd->add_option("--validation-fraction", train.config.validation_fraction)
      ->capture_default_str();
  train_cmd->add_option("--seed", train.config.seed)->capture_default_str();
  train_cmd->add_flag("--keep-last", train.keep_last,
                      "Keep the last epoch's weights instead of the best validation epoch");
  train_cmd->add_option("--hidden", train.hidden, "MEDN hidden width N")->capture_default_str();
  train_cmd->add_option("--layers", train.layers, "MEDN unrolled layers")->capture_default_str();
  train_cmd->add_option("--lambda", train.lambda, "MEDN threshold")->capture_default_str();
  train_cmd->add_option("--init-orientations", train.dict_init.orientations)->capture_default_str();
  train_cmd->add_option("--init-vic", train.dict_init.n_vic)->capture_default_str();
  train_cmd->add_option("--init-kappa", train.dict_init.n_kappa)->capture_default_str();

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Apply trained weights to a dataset");
  predict_cmd->add_option("--weights", predict.weights, "Weights file (MEDN or MLP)")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", predict.data, "Dataset file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", predict.out, "Clamped predictions CSV")->required();
  predict_cmd->add_option("--raw", predict.raw, "Unclamped predictions CSV");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "MADs and paired t-tests against a gold standard");
  eval_cmd->add_option("--pred", eval.pred, "Predictions CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--name", eval.name, "Method name in the report")->capture_default_str();
  eval_cmd->add_option("--compare", eval.compare, "Comparator NAME=PATH (repeatable)");
  eval_cmd->add_option("--gold", eval.gold, "Dataset with targets, or a predictions CSV")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval.out, "Write the report here too");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, common);
    if (*dict_cmd) return cmd_build_dict(dict);
    if (*dti_cmd) return cmd_fit_dti(dti, common);
    if (*amico_cmd) return cmd_fit_amico(amico, common);
    if (*train_cmd) return cmd_train(train, common);
    if (*predict_cmd) return cmd_predict(predict, common);
    if (*eval_cmd) return cmd_evaluate(eval);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
