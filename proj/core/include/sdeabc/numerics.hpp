#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "sdeabc/errors.hpp"

namespace sdeabc {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640561764;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438186;

/// Standard normal CDF, Phi(x). Saturates to 0/1 in the tails.
double std_normal_cdf(double x);

/// Upper tail 1 - Phi(x), computed without cancellation.
double std_normal_ccdf(double x);

double std_normal_pdf(double x);
double std_normal_log_pdf(double x);

/// Inverse of Phi on (0, 1). Throws DomainError outside the open interval.
double std_normal_quantile(double p);

/// Bracketed root of a continuous function with a sign change on [lo, hi].
///
/// Returns y with |f(y)| <= tol, or with a final bracket narrower than
/// tol * max(1, |y|). Throws BracketError when f(lo) and f(hi) share a sign and
/// ConvergenceError after `kRootIterationCap` function evaluations.
double find_root_bracketed(const std::function<double(double)>& f, double lo, double hi,
                           double tol);

inline constexpr std::uintmax_t kRootIterationCap = 200;

/// log(sum(exp(v))) evaluated by shifting with the maximum. -inf entries are allowed.
double log_sum_exp(std::span<const double> values);

}  // namespace sdeabc
