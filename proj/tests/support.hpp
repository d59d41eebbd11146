#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "medn/types.hpp"

namespace medn::test {

inline std::filesystem::path data_dir() { return MEDN_DATA_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("medn_tests_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

inline MatrixXd uniform_matrix(Index rows, Index cols, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = u(rng);
  return m;
}

inline Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector3d v(g(rng), g(rng), g(rng));
  return v.normalized();
}

// Composite Simpson rule on [a, b] with `panels` (even) subintervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

// Largest relative difference between two arrays, with differences measured
// against max(|a|, |b|, floor).
inline double max_relative_error(const MatrixXd& a, const MatrixXd& b, double floor) {
  const auto denom = a.cwiseAbs().cwiseMax(b.cwiseAbs()).array().max(floor);
  return ((a - b).cwiseAbs().array() / denom).maxCoeff();
}

}  // namespace medn::test
