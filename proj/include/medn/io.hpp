#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "medn/datagen.hpp"
#include "medn/dictionary.hpp"
#include "medn/mlp.hpp"
#include "medn/network.hpp"
#include "medn/training.hpp"

namespace medn::io {

namespace fs = std::filesystem;

/// Scheme text: one "gx gy gz b" line per gradient, '#' lines ignored. A b = 0
/// line may carry a zero direction, which is read as e_z.
AcquisitionScheme read_scheme(const fs::path& path);
AcquisitionScheme parse_scheme(const std::string& text);
void write_scheme(const fs::path& path, const AcquisitionScheme& scheme);
std::string format_scheme(const AcquisitionScheme& scheme);

/// Voxel dataset text file:
///   # medn voxel-dataset version=1 K=<K> voxels=<n> targets=<0|1> truth=<0|1>
///   K scheme lines "gx gy gz b"
///   CSV column header, then one row per voxel:
///   id, K signals[, v_ic, v_iso, od][, v_ic, v_iso, kappa, mu_x, mu_y, mu_z]
void write_dataset(const fs::path& path, const VoxelDataset& data);
VoxelDataset read_dataset(const fs::path& path);

/// Little-endian dictionary: "MDN1", K and width as uint32, row-major float64
/// entries, then a text trailer listing orientations and atom parameters.
void write_dictionary(const fs::path& path, const Dictionary& dict);
Dictionary read_dictionary(const fs::path& path);
void write_dictionary_csv(const fs::path& path, const Dictionary& dict);

/// Little-endian weights: "MDNW", version, K, N, T as uint32, lambda and tau as
/// float64, W, S, H row-major float64, then the FNV-1a 64 checksum of all
/// preceding bytes.
void write_medn_weights(const fs::path& path, const MednWeights<double>& weights);
MednWeights<double> read_medn_weights(const fs::path& path);

/// Same layout idea for the MLP baseline under magic "MDNM": version, layer
/// count, per-layer (rows, cols), dropout, then each layer's weights and bias.
void write_mlp_weights(const fs::path& path, const MlpWeights& weights);
MlpWeights read_mlp_weights(const fs::path& path);

enum class ModelKind { medn, mlp };
/// Kind of a weights file from its magic.
ModelKind detect_model(const fs::path& path);

/// "voxel_id,v_ic,v_iso,od" rows.
void write_predictions(const fs::path& path, const std::vector<std::int64_t>& ids,
                       const std::vector<Microstructure>& values);

struct Predictions {
  std::vector<std::int64_t> ids;
  std::vector<Microstructure> values;
};
/// Reads any CSV with voxel_id, v_ic, v_iso and od columns.
Predictions read_predictions(const fs::path& path);

struct AmicoRow {
  std::int64_t id = 0;
  Microstructure estimate;
  Vector3d mu = Vector3d::UnitZ();
  double residual = 0.0;
};
/// "voxel_id,v_ic,v_iso,od,mu_x,mu_y,mu_z,residual" rows.
void write_amico_results(const fs::path& path, const std::vector<AmicoRow>& rows);

void write_history(const fs::path& path, const TrainHistory& history);

void write_text(const fs::path& path, const std::string& text);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace medn::io
