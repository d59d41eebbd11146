#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "medn/microstructure.hpp"
#include "medn/types.hpp"

namespace medn {

/// Regularized incomplete beta function I_x(a, b), continued fraction to the
/// given relative tolerance.
double regularized_incomplete_beta(double a, double b, double x, double tolerance = 1e-10);

/// Two-sided tail probability P(|T| >= |t|) of Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  Index n = 0;
  /// Zero variance of the differences.
  bool degenerate = false;
};

/// Paired Student's t-test on d = a - b. Zero variance gives p = 1 when the
/// mean difference is zero and p = 0 otherwise (t = +-inf), flagged degenerate.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

enum class Quantity { v_ic = 0, v_iso = 1, od = 2 };
inline constexpr std::array<Quantity, 3> kQuantities{Quantity::v_ic, Quantity::v_iso, Quantity::od};
const char* name(Quantity q);
double component(const Microstructure& m, Quantity q);

/// Per-voxel absolute errors of one quantity.
std::vector<double> absolute_errors(std::span<const Microstructure> predicted,
                                    std::span<const Microstructure> gold, Quantity q);

/// Mean absolute difference for each quantity, indexed by Quantity.
std::array<double, 3> mean_absolute_difference(std::span<const Microstructure> predicted,
                                               std::span<const Microstructure> gold);

struct Comparison {
  std::string comparator;
  std::array<double, 3> comparator_mad{};
  /// Test on errors(method) - errors(comparator); negative t favours the method.
  std::array<TTestResult, 3> tests{};
};

struct EvalReport {
  std::string method;
  Index count = 0;
  std::array<double, 3> mad{};
  std::vector<Comparison> comparisons;

  /// Flat key=value text.
  std::string to_metrics() const;
};

EvalReport evaluate(const std::string& method, std::span<const Microstructure> predicted,
                    std::span<const Microstructure> gold);

/// Adds the comparator's MADs and paired t-tests on absolute errors.
void add_comparison(EvalReport& report, const std::string& comparator,
                    std::span<const Microstructure> predicted,
                    std::span<const Microstructure> comparator_predicted,
                    std::span<const Microstructure> gold);

}  // namespace medn
