#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "sdeabc/rng.hpp"

namespace sdeabc {

inline constexpr std::size_t kNumParams = 8;

/// Log-scale parameter vector in storage order.
using LogEta = std::array<double, kNumParams>;

/// Column / key names of the log-parameters, in storage order.
inline constexpr std::array<std::string_view, kNumParams> kParamNames = {
    "log_theta", "log_kappa", "log_gamma",  "log_mu1",
    "log_mu2",   "log_sigma1", "log_sigma2", "log_alpha"};

enum ParamIndex : std::size_t {
  kLogTheta = 0,
  kLogKappa,
  kLogGamma,
  kLogMu1,
  kLogMu2,
  kLogSigma1,
  kLogSigma2,
  kLogAlpha,
};

/// Two-component Gaussian mixture defining the stationary law of tau(X).
struct MixtureParams {
  double alpha;
  double mu1;
  double mu2;
  double sigma1;
  double sigma2;

  /// Throws DomainError unless 0 < alpha < 1 and both sigmas are positive.
  void validate() const;
};

/// Model parameters (theta, kappa, gamma, mu1, mu2, sigma1, sigma2, alpha) held on
/// the natural-log scale. Natural-scale accessors exponentiate; alpha < 1 is
/// enforced through log_alpha < 0.
class ModelParams {
 public:
  ModelParams() = default;
  /// Throws DomainError if any component is non-finite or log_alpha >= 0.
  explicit ModelParams(const LogEta& log_values);

  static ModelParams from_natural(double theta, double kappa, double gamma, double mu1,
                                  double mu2, double sigma1, double sigma2, double alpha);

  const LogEta& log_values() const noexcept { return log_; }

  double theta() const { return std::exp(log_[kLogTheta]); }
  double kappa() const { return std::exp(log_[kLogKappa]); }
  double gamma() const { return std::exp(log_[kLogGamma]); }
  double mu1() const { return std::exp(log_[kLogMu1]); }
  double mu2() const { return std::exp(log_[kLogMu2]); }
  double sigma1() const { return std::exp(log_[kLogSigma1]); }
  double sigma2() const { return std::exp(log_[kLogSigma2]); }
  double alpha() const { return std::exp(log_[kLogAlpha]); }

  MixtureParams mixture() const { return {alpha(), mu1(), mu2(), sigma1(), sigma2()}; }

  /// "True values" column of the simulation-study table.
  static ModelParams simulation_study_truth();

 private:
  LogEta log_{};
};

/// Strictly increasing sampling times.
class TimeGrid {
 public:
  TimeGrid() = default;
  /// Throws DataError on an empty or non-increasing sequence.
  explicit TimeGrid(std::vector<double> times);
  static TimeGrid regular(double t_start, double spacing, std::size_t n);

  const std::vector<double>& times() const noexcept { return times_; }
  std::size_t size() const noexcept { return times_.size(); }
  double operator[](std::size_t i) const { return times_[i]; }
  double start() const { return times_.front(); }

 private:
  std::vector<double> times_;
};

/// One finite observation per grid time.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(TimeGrid grid, std::vector<double> values);

  const TimeGrid& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& times() const noexcept { return grid_.times(); }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

struct GaussianMoments {
  double mean;
  double variance;
};

/// Exact OU transition: mean x e^{-rate dt}, variance stationary_var (1 - e^{-2 rate dt}).
GaussianMoments ou_transition(double rate, double x, double dt, double stationary_var);

double mixture_cdf(const MixtureParams& psi, double y);
/// Survival function 1 - F(y), evaluated on the upper tail.
double mixture_ccdf(const MixtureParams& psi, double y);
double mixture_pdf(const MixtureParams& psi, double y);

/// Relative tolerance on the (smaller-tail) probability scale used by the
/// quantile solver. It is tighter than 1e-10 absolute everywhere.
inline constexpr double kQuantileTolerance = 1e-10;

/// F_psi^{-1}(p). Throws DomainError for p outside (0, 1) and ConvergenceError
/// if the solver stalls.
double mixture_quantile(const MixtureParams& psi, double p);

/// tau_psi(x) = F_psi^{-1}(Phi(x)). Phi(x) is clamped to [1e-15, 1 - 1e-15], so tau
/// is strictly increasing for |x| < 7.94 and constant beyond (covering |x| > 8).
double tau(const MixtureParams& psi, double x);

/// Exact latent OU path started at x0 on `grid` (unit stationary variance, rate theta).
TimeSeries simulate_latent(const ModelParams& params, const TimeGrid& grid, double x0,
                           RngStream& rng);

/// Error OU path with U(t0) = 0, rate kappa and stationary variance gamma^2.
TimeSeries simulate_error(const ModelParams& params, const TimeGrid& grid, RngStream& rng);

struct ObservedPath {
  TimeSeries z;
  TimeSeries x;
};

/// Z = tau(X) + U on `grid`. The latent path is drawn first, then the error path.
ObservedPath simulate_observed(const ModelParams& params, const TimeGrid& grid, double x0,
                               RngStream& rng);

/// Allocation-free variant used inside samplers: writes Z into `z_out` (resized to
/// the grid length) and uses `latent_scratch` as working storage.
void simulate_observed_into(const ModelParams& params, std::span<const double> times,
                            double x0, RngStream& rng, std::vector<double>& z_out,
                            std::vector<double>& latent_scratch);

/// Indices {0, q, 2q, ...} of an n-point series, plus n - 1 when it is off the
/// stride and `keep_last` is set.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t q, bool keep_last = true);

TimeGrid subsample(const TimeGrid& grid, std::size_t q, bool keep_last = true);
TimeSeries subsample(const TimeSeries& series, std::size_t q, bool keep_last = true);

}  // namespace sdeabc
