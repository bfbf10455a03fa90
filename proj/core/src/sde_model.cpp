#include "sdeabc/sde_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sdeabc/errors.hpp"
#include "sdeabc/numerics.hpp"

namespace sdeabc {

void MixtureParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("mixture: alpha must lie in (0, 1)");
  if (!(sigma1 > 0.0 && sigma2 > 0.0)) throw DomainError("mixture: sigmas must be positive");
  if (!std::isfinite(mu1) || !std::isfinite(mu2)) throw DomainError("mixture: non-finite mean");
}

ModelParams::ModelParams(const LogEta& log_values) : log_(log_values) {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!std::isfinite(log_[i])) {
      throw DomainError("ModelParams: " + std::string(kParamNames[i]) + " is not finite");
    }
  }
  if (!(log_[kLogAlpha] < 0.0)) throw DomainError("ModelParams: log_alpha must be negative");
}

ModelParams ModelParams::from_natural(double theta, double kappa, double gamma, double mu1,
                                      double mu2, double sigma1, double sigma2, double alpha) {
  return ModelParams(LogEta{std::log(theta), std::log(kappa), std::log(gamma), std::log(mu1),
                            std::log(mu2), std::log(sigma1), std::log(sigma2),
                            std::log(alpha)});
}

ModelParams ModelParams::simulation_study_truth() {
  return ModelParams(LogEta{-5.914, -0.620, 0.061, 3.24, 3.43, -0.616, -0.472, -0.622});
}

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.empty()) throw DataError("TimeGrid: empty");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i])) {
      throw DataError("TimeGrid: non-finite time at index " + std::to_string(i));
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw DataError("TimeGrid: times not strictly increasing at index " + std::to_string(i));
    }
  }
}

TimeGrid TimeGrid::regular(double t_start, double spacing, std::size_t n) {
  if (n == 0) throw DataError("TimeGrid::regular: n must be positive");
  if (!(spacing > 0.0)) throw DataError("TimeGrid::regular: spacing must be positive");
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = t_start + static_cast<double>(i) * spacing;
  return TimeGrid(std::move(t));
}

TimeSeries::TimeSeries(TimeGrid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw DataError("TimeSeries: " + std::to_string(values_.size()) + " values for " +
                    std::to_string(grid_.size()) + " times");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw DataError("TimeSeries: non-finite value at index " + std::to_string(i));
    }
  }
}

GaussianMoments ou_transition(double rate, double x, double dt, double stationary_var) {
  const double decay = std::exp(-rate * dt);
  // -expm1 keeps the variance accurate for small rate * dt.
  return {x * decay, -stationary_var * std::expm1(-2.0 * rate * dt)};
}

double mixture_cdf(const MixtureParams& psi, double y) {
  return psi.alpha * std_normal_cdf((y - psi.mu1) / psi.sigma1) +
         (1.0 - psi.alpha) * std_normal_cdf((y - psi.mu2) / psi.sigma2);
}

double mixture_ccdf(const MixtureParams& psi, double y) {
  return psi.alpha * std_normal_ccdf((y - psi.mu1) / psi.sigma1) +
         (1.0 - psi.alpha) * std_normal_ccdf((y - psi.mu2) / psi.sigma2);
}

double mixture_pdf(const MixtureParams& psi, double y) {
  return psi.alpha * std_normal_pdf((y - psi.mu1) / psi.sigma1) / psi.sigma1 +
         (1.0 - psi.alpha) * std_normal_pdf((y - psi.mu2) / psi.sigma2) / psi.sigma2;
}

namespace {

constexpr int kQuantileIterationCap = 200;
constexpr double kQuantileStepTolerance = 1e-13;

// Solves F(y) = prob (or 1 - F(y) = prob when `upper`) for a tail probability
// prob <= 1/2 given z = Phi^{-1}(prob on the lower scale).
//
// Each component's own quantile mu_k + sigma_k z brackets the mixture quantile:
// both component CDFs are <= p at the smaller one and >= p at the larger one.
// Newton steps run inside that bracket and fall back to bisection when a step
// leaves it.
double solve_mixture_tail(const MixtureParams& psi, double prob, double z, bool upper) {
  const double y1 = psi.mu1 + psi.sigma1 * z;
  const double y2 = psi.mu2 + psi.sigma2 * z;
  double lo = std::min(y1, y2);
  double hi = std::max(y1, y2);
  if (lo == hi) return lo;

  // g is increasing in y on both scales.
  auto g = [&](double y) { return upper ? prob - mixture_ccdf(psi, y) : mixture_cdf(psi, y) - prob; };
  const double tol = kQuantileTolerance * prob;

  double g_lo = g(lo);
  double g_hi = g(hi);
  if (g_lo == 0.0) return lo;
  if (g_hi == 0.0) return hi;
  // Rounding in the tails can break the sign condition by a few ulps; widen.
  double width = hi - lo;
  for (int k = 0; g_lo > 0.0 && k < 60; ++k, width *= 2.0) g_lo = g(lo -= width);
  for (int k = 0; g_hi < 0.0 && k < 60; ++k, width *= 2.0) g_hi = g(hi += width);
  if (g_lo > 0.0 || g_hi < 0.0) throw ConvergenceError("mixture_quantile: could not bracket root");

  // Start from the linear interpolant of the bracket.
  double y = lo - g_lo * (hi - lo) / (g_hi - g_lo);
  if (!(y > lo && y < hi)) y = 0.5 * (lo + hi);
  // Converged once the probability residual is within tolerance and the Newton
  // step is negligible in y; the second test matters where the density between
  // well-separated modes is tiny and F is nearly flat over a long stretch.
  for (int it = 0; it < kQuantileIterationCap; ++it) {
    const double gy = g(y);
    if (gy == 0.0) return y;
    if (gy < 0.0) {
      lo = y;
    } else {
      hi = y;
    }
    const double y_tol = kQuantileStepTolerance * std::max(1.0, std::abs(y));
    if (hi - lo <= y_tol) return 0.5 * (lo + hi);
    const double slope = mixture_pdf(psi, y);
    const double step = slope > 0.0 ? gy / slope : std::numeric_limits<double>::infinity();
    if (std::abs(gy) <= tol && std::abs(step) <= y_tol) return y - step;
    double next = y - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    y = next;
  }
  throw ConvergenceError("mixture_quantile: no convergence after " +
                         std::to_string(kQuantileIterationCap) + " iterations");
}

constexpr double kTailClamp = 1e-15;

}  // namespace

double mixture_quantile(const MixtureParams& psi, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("mixture_quantile: p must lie in (0, 1), got " + std::to_string(p));
  }
  const double z = std_normal_quantile(p);
  if (p > 0.5) return solve_mixture_tail(psi, 1.0 - p, z, /*upper=*/true);
  return solve_mixture_tail(psi, p, z, /*upper=*/false);
}

double tau(const MixtureParams& psi, double x) {
  if (!std::isfinite(x)) throw DomainError("tau: x must be finite");
  // The clamp applies from |x| ~ 7.94 on (where the tail reaches 1e-15), which
  // keeps tau continuous and monotone across the switch.
  const bool upper = x > 0.0;
  const double tail = upper ? std_normal_ccdf(x) : std_normal_cdf(x);
  if (tail < kTailClamp) {
    const double z = std_normal_quantile(kTailClamp);
    return solve_mixture_tail(psi, kTailClamp, upper ? -z : z, upper);
  }
  return solve_mixture_tail(psi, tail, x, upper);
}

namespace {

void simulate_ou_into(double rate, double stationary_var, double start,
                      std::span<const double> times, RngStream& rng, std::vector<double>& out) {
  out.resize(times.size());
  if (times.empty()) return;
  out[0] = start;
  double prev_dt = -1.0;
  double decay = 0.0;
  double sd = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    if (dt != prev_dt) {
      const GaussianMoments m = ou_transition(rate, 1.0, dt, stationary_var);
      decay = m.mean;
      sd = std::sqrt(m.variance);
      prev_dt = dt;
    }
    out[i] = out[i - 1] * decay + sd * rng.normal();
  }
}

}  // namespace

TimeSeries simulate_latent(const ModelParams& params, const TimeGrid& grid, double x0,
                           RngStream& rng) {
  std::vector<double> x;
  simulate_ou_into(params.theta(), 1.0, x0, grid.times(), rng, x);
  return TimeSeries(grid, std::move(x));
}

TimeSeries simulate_error(const ModelParams& params, const TimeGrid& grid, RngStream& rng) {
  std::vector<double> u;
  const double gamma = params.gamma();
  simulate_ou_into(params.kappa(), gamma * gamma, 0.0, grid.times(), rng, u);
  return TimeSeries(grid, std::move(u));
}

void simulate_observed_into(const ModelParams& params, std::span<const double> times,
                            double x0, RngStream& rng, std::vector<double>& z_out,
                            std::vector<double>& latent_scratch) {
  const MixtureParams psi = params.mixture();
  const double gamma = params.gamma();
  simulate_ou_into(params.theta(), 1.0, x0, times, rng, latent_scratch);
  simulate_ou_into(params.kappa(), gamma * gamma, 0.0, times, rng, z_out);
  for (std::size_t i = 0; i < times.size(); ++i) z_out[i] += tau(psi, latent_scratch[i]);
}

ObservedPath simulate_observed(const ModelParams& params, const TimeGrid& grid, double x0,
                               RngStream& rng) {
  std::vector<double> z;
  std::vector<double> x;
  simulate_observed_into(params, grid.times(), x0, rng, z, x);
  return {TimeSeries(grid, std::move(z)), TimeSeries(grid, std::move(x))};
}

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t q, bool keep_last) {
  if (q == 0) throw DomainError("subsample: q must be positive");
  std::vector<std::size_t> idx;
  idx.reserve(n / q + 2);
  for (std::size_t i = 0; i < n; i += q) idx.push_back(i);
  if (keep_last && n > 0 && idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}

TimeGrid subsample(const TimeGrid& grid, std::size_t q, bool keep_last) {
  std::vector<double> t;
  for (std::size_t i : subsample_indices(grid.size(), q, keep_last)) t.push_back(grid[i]);
  return TimeGrid(std::move(t));
}

TimeSeries subsample(const TimeSeries& series, std::size_t q, bool keep_last) {
  const auto idx = subsample_indices(series.size(), q, keep_last);
  std::vector<double> t;
  std::vector<double> v;
  t.reserve(idx.size());
  v.reserve(idx.size());
  for (std::size_t i : idx) {
    t.push_back(series.times()[i]);
    v.push_back(series.values()[i]);
  }
  return TimeSeries(TimeGrid(std::move(t)), std::move(v));
}

}  // namespace sdeabc
