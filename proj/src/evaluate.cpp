#include "medn/evaluate.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "medn/error.hpp"

namespace medn {

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x, double tolerance) {
  constexpr double kTiny = 1e-300;
  constexpr int kMaxTerms = 10000;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxTerms; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < tolerance) return h;
  }
  throw NumericError("incomplete beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x, double tolerance) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a + 1) / (a + b + 2); use symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x, tolerance) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x, tolerance) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw DomainError("student t: degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("paired_t_test: sample lengths differ");
  if (a.size() < 2) throw DimensionError("paired_t_test: need at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dev = (a[i] - b[i]) - mean;
    ss += dev * dev;
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  TTestResult result;
  result.n = static_cast<Index>(a.size());
  if (sd == 0.0) {
    result.degenerate = true;
    if (mean == 0.0) {
      result.t = 0.0;
      result.p = 1.0;
    } else {
      result.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
      result.p = 0.0;
    }
    return result;
  }
  result.t = mean / (sd / std::sqrt(n));
  result.p = student_t_two_sided_p(result.t, n - 1.0);
  return result;
}

const char* name(Quantity q) {
  switch (q) {
    case Quantity::v_ic: return "v_ic";
    case Quantity::v_iso: return "v_iso";
    case Quantity::od: return "od";
  }
  return "?";
}

double component(const Microstructure& m, Quantity q) {
  switch (q) {
    case Quantity::v_ic: return m.v_ic;
    case Quantity::v_iso: return m.v_iso;
    case Quantity::od: return m.od;
  }
  return 0.0;
}

std::vector<double> absolute_errors(std::span<const Microstructure> predicted,
                                    std::span<const Microstructure> gold, Quantity q) {
  if (predicted.size() != gold.size()) throw DimensionError("evaluate: list lengths differ");
  std::vector<double> out(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i)
    out[i] = std::abs(component(predicted[i], q) - component(gold[i], q));
  return out;
}

std::array<double, 3> mean_absolute_difference(std::span<const Microstructure> predicted,
                                               std::span<const Microstructure> gold) {
  if (predicted.size() != gold.size()) throw DimensionError("evaluate: list lengths differ");
  if (predicted.empty()) throw DimensionError("evaluate: empty lists");
  std::array<double, 3> mad{};
  for (Quantity q : kQuantities) {
    double sum = 0.0;
    for (double e : absolute_errors(predicted, gold, q)) sum += e;
    mad[static_cast<std::size_t>(q)] = sum / static_cast<double>(predicted.size());
  }
  return mad;
}

EvalReport evaluate(const std::string& method, std::span<const Microstructure> predicted,
                    std::span<const Microstructure> gold) {
  EvalReport report;
  report.method = method;
  report.mad = mean_absolute_difference(predicted, gold);
  report.count = static_cast<Index>(predicted.size());
  return report;
}

void add_comparison(EvalReport& report, const std::string& comparator,
                    std::span<const Microstructure> predicted,
                    std::span<const Microstructure> comparator_predicted,
                    std::span<const Microstructure> gold) {
  Comparison cmp;
  cmp.comparator = comparator;
  cmp.comparator_mad = mean_absolute_difference(comparator_predicted, gold);
  for (Quantity q : kQuantities) {
    const std::vector<double> mine = absolute_errors(predicted, gold, q);
    const std::vector<double> theirs = absolute_errors(comparator_predicted, gold, q);
    cmp.tests[static_cast<std::size_t>(q)] = paired_t_test(mine, theirs);
  }
  report.comparisons.push_back(std::move(cmp));
}

std::string EvalReport::to_metrics() const {
  std::ostringstream out;
  out.precision(10);
  out << "method=" << method << '\n' << "count=" << count << '\n';
  for (Quantity q : kQuantities) out << "mad." << name(q) << '=' << mad[static_cast<std::size_t>(q)] << '\n';
  for (const Comparison& cmp : comparisons) {
    const std::string prefix = "vs." + cmp.comparator + '.';
    for (Quantity q : kQuantities) {
      const auto i = static_cast<std::size_t>(q);
      out << prefix << "mad." << name(q) << '=' << cmp.comparator_mad[i] << '\n'
          << prefix << "t." << name(q) << '=' << cmp.tests[i].t << '\n'
          << prefix << "p." << name(q) << '=' << cmp.tests[i].p << '\n'
          << prefix << "degenerate." << name(q) << '=' << (cmp.tests[i].degenerate ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

}  // namespace medn
