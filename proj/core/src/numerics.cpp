#include "sdeabc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/toms748_solve.hpp>

namespace sdeabc {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440084436210484904;
constexpr double kSqrt2 = 1.41421356237309504880168872420969808;

}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double std_normal_ccdf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_log_pdf(double x) { return -kLogSqrt2Pi - 0.5 * x * x; }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("std_normal_quantile: p must lie in (0, 1), got " + std::to_string(p));
  }
  // Rational initializer for erfc^-1, then one Newton step on the tail that
  // keeps full relative precision.
  const bool upper = p > 0.5;
  const double tail = upper ? 1.0 - p : p;
  double x = -kSqrt2 * boost::math::erfc_inv(2.0 * tail);
  const double density = std_normal_pdf(x);
  if (density > 0.0) {
    x -= (std_normal_cdf(x) - tail) / density;
  }
  return upper ? -x : x;
}

double find_root_bracketed(const std::function<double(double)>& f, double lo, double hi,
                           double tol) {
  if (lo > hi) std::swap(lo, hi);
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if (std::signbit(f_lo) == std::signbit(f_hi) || std::isnan(f_lo) || std::isnan(f_hi)) {
    throw BracketError("find_root_bracketed: f(lo) and f(hi) do not bracket a root");
  }

  // TOMS 748 interpolates with a bisection safeguard. The residual check lets
  // flat functions stop early once |f| is within tolerance.
  struct ResidualReached {
    double y;
  };
  auto guarded = [&](double y) {
    const double v = f(y);
    if (std::abs(v) <= tol) throw ResidualReached{y};
    return v;
  };
  auto narrow = [tol](double a, double b) {
    return std::abs(b - a) <= tol * std::max(1.0, std::min(std::abs(a), std::abs(b)));
  };
  std::uintmax_t iterations = kRootIterationCap;
  try {
    const auto [a, b] =
        boost::math::tools::toms748_solve(guarded, lo, hi, f_lo, f_hi, narrow, iterations);
    if (iterations >= kRootIterationCap && !narrow(a, b)) {
      throw ConvergenceError("find_root_bracketed: no convergence after " +
                             std::to_string(kRootIterationCap) + " iterations");
    }
    return 0.5 * (a + b);
  } catch (const ResidualReached& hit) {
    return hit.y;
  }
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("log_sum_exp: empty input");
  }
  const double top = *std::max_element(values.begin(), values.end());
  if (top == -std::numeric_limits<double>::infinity()) return top;
  if (std::isinf(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

}  // namespace sdeabc
