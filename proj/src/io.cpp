#include "medn/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

namespace medn::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written from little-endian hosts only");

namespace {

constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kWeightsVersion = 1;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

double parse_double(std::string_view s, const std::string& where) {
  s = trim(s);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError(where + ": cannot parse number '" + std::string(s) + "'");
  return value;
}

std::int64_t parse_int(std::string_view s, const std::string& where) {
  s = trim(s);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError(where + ": cannot parse integer '" + std::string(s) + "'");
  return value;
}

// Value of "key=value" among whitespace-separated header tokens.
std::string_view header_field(const std::vector<std::string_view>& tokens, std::string_view key,
                              const std::string& where) {
  for (std::string_view tok : tokens) {
    if (tok.size() > key.size() && tok.substr(0, key.size()) == key && tok[key.size()] == '=')
      return tok.substr(key.size() + 1);
  }
  throw DataError(where + ": header is missing '" + std::string(key) + "'");
}

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    buffer_.append(static_cast<const char*>(data), n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  template <typename Derived>
  void matrix(const Eigen::MatrixBase<Derived>& m) {
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
  std::string& buffer() { return buffer_; }

 private:
  std::string buffer_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string where) : data_(data), where_(std::move(where)) {}
  void bytes(void* out, std::size_t n) {
    if (pos_ + n > data_.size()) throw DataError(where_ + ": truncated file");
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, sizeof v); return v; }
  double f64() { double v; bytes(&v, sizeof v); return v; }
  MatrixXd matrix(Index rows, Index cols) {
    MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) m(r, c) = f64();
    return m;
  }
  std::size_t position() const { return pos_; }
  std::string_view rest() const { return data_.substr(pos_); }

 private:
  std::string_view data_;
  std::string where_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void expect_magic(ByteReader& in, const char (&magic)[5], const std::string& where) {
  char got[4];
  in.bytes(got, 4);
  if (std::memcmp(got, magic, 4) != 0) throw DataError(where + ": wrong file type (bad magic)");
}

// Checksummed payload: verifies the trailing FNV-1a and returns the payload.
std::string_view verified_payload(const std::string& bytes, const std::string& where) {
  if (bytes.size() < 8) throw DataError(where + ": truncated file");
  const std::string_view payload(bytes.data(), bytes.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (stored != fnv1a64(payload)) throw DataError(where + ": checksum mismatch");
  return payload;
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

AcquisitionScheme parse_scheme(const std::string& text) {
  std::vector<Vector3d> dirs;
  std::vector<double> bvals;
  int line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_ws(line);
    const std::string where = "scheme line " + std::to_string(line_no);
    if (fields.size() != 4) throw DataError(where + ": expected 4 fields 'gx gy gz b'");
    Vector3d g(parse_double(fields[0], where), parse_double(fields[1], where),
               parse_double(fields[2], where));
    const double b = parse_double(fields[3], where);
    if (b == 0.0 && g.norm() == 0.0) g = Vector3d::UnitZ();
    if (std::abs(g.norm() - 1.0) > 1e-6) throw DataError(where + ": direction is not unit norm");
    if (b < 0.0) throw DataError(where + ": negative b-value");
    dirs.push_back(g);
    bvals.push_back(b);
  }
  if (dirs.empty()) throw DataError("scheme: no gradients");
  Matrix3Xd d(3, static_cast<Index>(dirs.size()));
  for (std::size_t i = 0; i < dirs.size(); ++i) d.col(static_cast<Index>(i)) = dirs[i];
  return AcquisitionScheme(std::move(d), Eigen::Map<VectorXd>(bvals.data(), static_cast<Index>(bvals.size())));
}

AcquisitionScheme read_scheme(const fs::path& path) {
  try {
    return parse_scheme(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_scheme(const AcquisitionScheme& scheme) {
  std::string out;
  for (Index k = 0; k < scheme.size(); ++k) {
    const Vector3d g = scheme.direction(k);
    out += format_double(g.x()) + ' ' + format_double(g.y()) + ' ' + format_double(g.z()) + ' ' +
           format_double(scheme.bvalue(k)) + '\n';
  }
  return out;
}

void write_scheme(const fs::path& path, const AcquisitionScheme& scheme) {
  write_file(path, "# gx gy gz b(s/mm^2)\n" + format_scheme(scheme));
}

void write_dataset(const fs::path& path, const VoxelDataset& data) {
  data.validate();
  const Index k_count = data.scheme.size();
  std::string out = "# medn voxel-dataset version=" + std::to_string(kDatasetVersion) +
                    " K=" + std::to_string(k_count) + " voxels=" + std::to_string(data.size()) +
                    " targets=" + (data.targets ? "1" : "0") + " truth=" + (data.truth ? "1" : "0") +
                    '\n';
  out += format_scheme(data.scheme);
  out += "id";
  for (Index k = 0; k < k_count; ++k) out += ",s" + std::to_string(k);
  if (data.targets) out += ",v_ic,v_iso,od";
  if (data.truth) out += ",true_v_ic,true_v_iso,true_kappa,true_mu_x,true_mu_y,true_mu_z";
  out += '\n';
  for (Index i = 0; i < data.size(); ++i) {
    const auto slot = static_cast<std::size_t>(i);
    out += std::to_string(data.ids[slot]);
    for (Index k = 0; k < k_count; ++k) (out += ',') += format_double(data.signals(k, i));
    if (data.targets) {
      const Microstructure& t = (*data.targets)[slot];
      out += ',' + format_double(t.v_ic) + ',' + format_double(t.v_iso) + ',' + format_double(t.od);
    }
    if (data.truth) {
      const TissueParams& p = (*data.truth)[slot];
      out += ',' + format_double(p.v_ic) + ',' + format_double(p.v_iso) + ',' +
             format_double(p.kappa) + ',' + format_double(p.mu.x()) + ',' +
             format_double(p.mu.y()) + ',' + format_double(p.mu.z());
    }
    out += '\n';
  }
  write_file(path, out);
}

VoxelDataset read_dataset(const fs::path& path) {
  const std::string where = path.string();
  const std::string text = read_file(path);
  const auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]).substr(0, 20) != "# medn voxel-dataset")
    throw DataError(where + ": not a voxel dataset file");
  const auto header = split_ws(lines[0]);
  const auto version = parse_int(header_field(header, "version", where), where);
  if (version != kDatasetVersion)
    throw DataError(where + ": unsupported dataset version " + std::to_string(version));
  const Index k_count = parse_int(header_field(header, "K", where), where);
  const Index n = parse_int(header_field(header, "voxels", where), where);
  const bool has_targets = parse_int(header_field(header, "targets", where), where) != 0;
  const bool has_truth = parse_int(header_field(header, "truth", where), where) != 0;
  if (k_count < 1 || n < 0) throw DataError(where + ": invalid header counts");
  if (lines.size() < static_cast<std::size_t>(k_count + 2))
    throw DataError(where + ": truncated scheme block");

  std::string scheme_text;
  for (Index k = 1; k <= k_count; ++k) (scheme_text += lines[static_cast<std::size_t>(k)]) += '\n';
  VoxelDataset data;
  data.scheme = parse_scheme(scheme_text);
  if (data.scheme.size() != k_count) throw DataError(where + ": scheme block length != K");

  const Index expected_cols = 1 + k_count + (has_targets ? 3 : 0) + (has_truth ? 6 : 0);
  const auto columns = split(trim(lines[static_cast<std::size_t>(k_count + 1)]), ',');
  if (static_cast<Index>(columns.size()) != expected_cols || trim(columns[0]) != "id")
    throw DataError(where + ": column header does not match K/targets/truth");

  data.signals.resize(k_count, n);
  data.ids.resize(static_cast<std::size_t>(n));
  if (has_targets) data.targets.emplace(static_cast<std::size_t>(n));
  if (has_truth) data.truth.emplace(static_cast<std::size_t>(n));
  std::size_t line_index = static_cast<std::size_t>(k_count + 2);
  for (Index i = 0; i < n; ++i, ++line_index) {
    if (line_index >= lines.size() || trim(lines[line_index]).empty())
      throw DataError(where + ": fewer voxel rows than declared");
    const std::string row_where = where + " row " + std::to_string(i + 1);
    const auto fields = split(trim(lines[line_index]), ',');
    if (static_cast<Index>(fields.size()) != expected_cols)
      throw DataError(row_where + ": wrong number of columns");
    const auto slot = static_cast<std::size_t>(i);
    data.ids[slot] = parse_int(fields[0], row_where);
    for (Index k = 0; k < k_count; ++k)
      data.signals(k, i) = parse_double(fields[static_cast<std::size_t>(1 + k)], row_where);
    std::size_t c = static_cast<std::size_t>(1 + k_count);
    if (has_targets) {
      Microstructure& t = (*data.targets)[slot];
      t.v_ic = parse_double(fields[c++], row_where);
      t.v_iso = parse_double(fields[c++], row_where);
      t.od = parse_double(fields[c++], row_where);
    }
    if (has_truth) {
      TissueParams& p = (*data.truth)[slot];
      p.v_ic = parse_double(fields[c++], row_where);
      p.v_iso = parse_double(fields[c++], row_where);
      p.kappa = parse_double(fields[c++], row_where);
      p.mu.x() = parse_double(fields[c++], row_where);
      p.mu.y() = parse_double(fields[c++], row_where);
      p.mu.z() = parse_double(fields[c++], row_where);
    }
  }
  for (; line_index < lines.size(); ++line_index)
    if (!trim(lines[line_index]).empty()) throw DataError(where + ": more voxel rows than declared");
  data.validate();
  return data;
}

void write_dictionary(const fs::path& path, const Dictionary& dict) {
  ByteWriter out;
  out.bytes("MDN1", 4);
  out.u32(static_cast<std::uint32_t>(dict.rows()));
  out.u32(static_cast<std::uint32_t>(dict.width()));
  out.matrix(dict.matrix);
  std::string trailer = "orientations " + std::to_string(dict.orientations.size()) + '\n';
  for (const Vector3d& o : dict.orientations)
    trailer += format_double(o.x()) + ' ' + format_double(o.y()) + ' ' + format_double(o.z()) + '\n';
  trailer += "atoms " + std::to_string(dict.atoms.size()) + '\n';
  for (const AtomMeta& a : dict.atoms)
    trailer += std::to_string(a.orientation) + ' ' + format_double(a.vic) + ' ' + format_double(a.kappa) + '\n';
  trailer += "isotropic " + std::to_string(dict.n_aniso) + '\n';
  out.bytes(trailer.data(), trailer.size());
  write_file(path, out.buffer());
}

Dictionary read_dictionary(const fs::path& path) {
  const std::string where = path.string();
  const std::string bytes = read_file(path);
  ByteReader in(bytes, where);
  expect_magic(in, "MDN1", where);
  const Index rows = in.u32();
  const Index cols = in.u32();
  Dictionary dict;
  dict.matrix = in.matrix(rows, cols);
  std::istringstream trailer{std::string(in.rest())};
  std::string word;
  std::size_t count = 0;
  if (!(trailer >> word >> count) || word != "orientations") throw DataError(where + ": bad trailer");
  dict.orientations.resize(count);
  for (Vector3d& o : dict.orientations)
    if (!(trailer >> o.x() >> o.y() >> o.z())) throw DataError(where + ": bad orientation entry");
  if (!(trailer >> word >> count) || word != "atoms") throw DataError(where + ": bad trailer");
  dict.atoms.resize(count);
  for (AtomMeta& a : dict.atoms)
    if (!(trailer >> a.orientation >> a.vic >> a.kappa)) throw DataError(where + ": bad atom entry");
  if (!(trailer >> word >> dict.n_aniso) || word != "isotropic") throw DataError(where + ": bad trailer");
  if (dict.n_aniso + 1 != cols || static_cast<Index>(dict.atoms.size()) != dict.n_aniso)
    throw DataError(where + ": trailer does not match the matrix width");
  return dict;
}

void write_dictionary_csv(const fs::path& path, const Dictionary& dict) {
  std::string out = "gradient";
  for (const AtomMeta& a : dict.atoms)
    out += ",o" + std::to_string(a.orientation) + "_vic" + format_double(a.vic) + "_kappa" +
           format_double(a.kappa);
  out += ",iso\n";
  for (Index k = 0; k < dict.rows(); ++k) {
    out += std::to_string(k);
    for (Index j = 0; j < dict.width(); ++j) (out += ',') += format_double(dict.matrix(k, j));
    out += '\n';
  }
  write_file(path, out);
}

void write_medn_weights(const fs::path& path, const MednWeights<double>& weights) {
  weights.validate();
  ByteWriter out;
  out.bytes("MDNW", 4);
  out.u32(kWeightsVersion);
  out.u32(static_cast<std::uint32_t>(weights.inputs()));
  out.u32(static_cast<std::uint32_t>(weights.hidden()));
  out.u32(static_cast<std::uint32_t>(weights.layers));
  out.f64(weights.lambda);
  out.f64(weights.tau);
  out.matrix(weights.W);
  out.matrix(weights.S);
  out.matrix(weights.H);
  out.u64(fnv1a64(out.buffer()));
  write_file(path, out.buffer());
}

MednWeights<double> read_medn_weights(const fs::path& path) {
  const std::string where = path.string();
  const std::string bytes = read_file(path);
  ByteReader in(verified_payload(bytes, where), where);
  expect_magic(in, "MDNW", where);
  const std::uint32_t version = in.u32();
  if (version != kWeightsVersion)
    throw DataError(where + ": unsupported weights version " + std::to_string(version));
  const Index k = in.u32();
  const Index n = in.u32();
  MednWeights<double> w;
  w.layers = static_cast<int>(in.u32());
  w.lambda = in.f64();
  w.tau = in.f64();
  if (n < 2) throw DataError(where + ": hidden width below 2");
  w.W = in.matrix(n, k);
  w.S = in.matrix(n, n);
  w.H = in.matrix(2, n - 1);
  if (!in.rest().empty()) throw DataError(where + ": trailing bytes after weights");
  w.validate();
  return w;
}

void write_mlp_weights(const fs::path& path, const MlpWeights& weights) {
  ByteWriter out;
  out.bytes("MDNM", 4);
  out.u32(kWeightsVersion);
  out.u32(static_cast<std::uint32_t>(weights.weights.size()));
  for (const MatrixXd& w : weights.weights) {
    out.u32(static_cast<std::uint32_t>(w.rows()));
    out.u32(static_cast<std::uint32_t>(w.cols()));
  }
  out.f64(weights.dropout);
  for (std::size_t l = 0; l < weights.weights.size(); ++l) {
    out.matrix(weights.weights[l]);
    out.matrix(weights.biases[l]);
  }
  out.u64(fnv1a64(out.buffer()));
  write_file(path, out.buffer());
}

MlpWeights read_mlp_weights(const fs::path& path) {
  const std::string where = path.string();
  const std::string bytes = read_file(path);
  ByteReader in(verified_payload(bytes, where), where);
  expect_magic(in, "MDNM", where);
  const std::uint32_t version = in.u32();
  if (version != kWeightsVersion)
    throw DataError(where + ": unsupported weights version " + std::to_string(version));
  const std::uint32_t layers = in.u32();
  std::vector<std::pair<Index, Index>> shapes;
  for (std::uint32_t l = 0; l < layers; ++l) {
    const Index rows = in.u32();
    const Index cols = in.u32();
    shapes.emplace_back(rows, cols);
  }
  MlpWeights w;
  w.dropout = in.f64();
  for (const auto& [rows, cols] : shapes) {
    w.weights.push_back(in.matrix(rows, cols));
    w.biases.push_back(in.matrix(rows, 1).col(0));
  }
  if (!in.rest().empty()) throw DataError(where + ": trailing bytes after weights");
  if (w.weights.empty()) throw DataError(where + ": no layers");
  return w;
}

ModelKind detect_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (std::memcmp(magic, "MDNW", 4) == 0) return ModelKind::medn;
  if (std::memcmp(magic, "MDNM", 4) == 0) return ModelKind::mlp;
  throw DataError(path.string() + ": not a weights file");
}

void write_predictions(const fs::path& path, const std::vector<std::int64_t>& ids,
                       const std::vector<Microstructure>& values) {
  if (ids.size() != values.size()) throw DimensionError("write_predictions: id/value counts differ");
  std::string out = "voxel_id,v_ic,v_iso,od\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    out += std::to_string(ids[i]) + ',' + format_double(values[i].v_ic) + ',' +
           format_double(values[i].v_iso) + ',' + format_double(values[i].od) + '\n';
  write_file(path, out);
}

Predictions read_predictions(const fs::path& path) {
  const std::string where = path.string();
  const std::string text = read_file(path);
  const auto lines = split(text, '\n');
  if (lines.empty()) throw DataError(where + ": empty file");
  const auto header = split(trim(lines[0]), ',');
  auto column = [&](std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == name) return i;
    throw DataError(where + ": missing column '" + std::string(name) + "'");
  };
  const std::size_t c_id = column("voxel_id");
  const std::size_t c_vic = column("v_ic");
  const std::size_t c_viso = column("v_iso");
  const std::size_t c_od = column("od");
  Predictions out;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const std::string_view line = trim(lines[l]);
    if (line.empty()) continue;
    const std::string row_where = where + " line " + std::to_string(l + 1);
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) throw DataError(row_where + ": wrong number of columns");
    out.ids.push_back(parse_int(fields[c_id], row_where));
    out.values.push_back({parse_double(fields[c_vic], row_where),
                          parse_double(fields[c_viso], row_where),
                          parse_double(fields[c_od], row_where)});
  }
  return out;
}

void write_amico_results(const fs::path& path, const std::vector<AmicoRow>& rows) {
  std::string out = "voxel_id,v_ic,v_iso,od,mu_x,mu_y,mu_z,residual\n";
  for (const AmicoRow& r : rows)
    out += std::to_string(r.id) + ',' + format_double(r.estimate.v_ic) + ',' +
           format_double(r.estimate.v_iso) + ',' + format_double(r.estimate.od) + ',' +
           format_double(r.mu.x()) + ',' + format_double(r.mu.y()) + ',' +
           format_double(r.mu.z()) + ',' + format_double(r.residual) + '\n';
  write_file(path, out);
}

void write_history(const fs::path& path, const TrainHistory& history) {
  std::string out =
      "epoch,train_loss,train_v_ic,train_v_iso,train_od,val_loss,val_v_ic,val_v_iso,val_od\n";
  for (const EpochRecord& e : history.epochs)
    out += std::to_string(e.epoch) + ',' + format_double(e.train.total()) + ',' +
           format_double(e.train.v_ic) + ',' + format_double(e.train.v_iso) + ',' +
           format_double(e.train.od) + ',' + format_double(e.validation.total()) + ',' +
           format_double(e.validation.v_ic) + ',' + format_double(e.validation.v_iso) + ',' +
           format_double(e.validation.od) + '\n';
  write_file(path, out);
}

void write_text(const fs::path& path, const std::string& text) { write_file(path, text); }

}  // namespace medn::io
