#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sdeabc/abc_sampler.hpp"
#include "sdeabc/adaptive_metropolis.hpp"
#include "sdeabc/rng.hpp"
#include "sdeabc/sde_model.hpp"

namespace sdeabc {

/// Law of the latent state at the first observation time.
enum class InitialLaw { kFixed, kStationary };

enum class Resampling { kMultinomial, kSystematic };

struct FilterSettings {
  std::size_t particles = 100;
  InitialLaw x0_law = InitialLaw::kFixed;
  double x0 = 0.0;
  Resampling resampling = Resampling::kMultinomial;
};

/// Particle cloud at one observation time.
struct ParticleSystem {
  std::vector<double> latent_values;   // x particles (pre-transform)
  std::vector<double> transformed;     // tau(x) cache
  std::vector<double> log_weights;
  std::vector<std::size_t> parent_index;
  std::size_t time_index = 0;

  std::size_t size() const noexcept { return latent_values.size(); }
};

struct LikelihoodEstimate {
  double log_value;
  std::size_t n_particles;
  std::size_t n_replicates;
};

/// log of the Gaussian density of Z_i given Z_{i-1} = z_prev and the latent pair:
/// mean tau_i + e^{-kappa dt} (z_prev - tau_prev), SD gamma sqrt(1 - e^{-2 kappa dt}).
double obs_logdensity_increment(double z_i, double z_prev, double tau_i, double tau_prev_parent,
                                double gamma, double kappa, double dt);

/// log[(1/gamma) phi((z_0 - tau_0) / gamma)].
double initial_log_weight(double z_0, double tau_0, double gamma);

using ParticleObserver = std::function<void(const ParticleSystem&)>;

/// Bootstrap particle filter estimate of log p(z | params). Returns -inf when the
/// weights of some step all vanish. `observer` sees the system after weighting at
/// every observation time.
double bootstrap_filter(const ModelParams& params, const TimeSeries& data,
                        const FilterSettings& settings, RngStream& rng,
                        const ParticleObserver& observer = {});

/// Error-process law at the first observation time for the Kalman oracle. The
/// particle filter's initial weight corresponds to kStationary.
enum class ErrorStartLaw { kStationary, kZero };

/// Exact log-likelihood for the linear case tau(x) = x via a Kalman filter on
/// (X, U) observed through their sum. Throws DomainError unless the mixture is the
/// degenerate single standard component (alpha ~ 1, mu1 ~ 0, sigma1 ~ 1).
double kalman_loglik(const ModelParams& params, const TimeSeries& data, InitialLaw x0_law,
                     double x0, ErrorStartLaw u0_law = ErrorStartLaw::kStationary);

/// Parameters whose tau is the identity to within ~1e-12 (for the Kalman oracle).
ModelParams linear_degenerate_params(double theta, double kappa, double gamma);

/// Worker threads for replicate filters: $SDEABC_WORKERS if set, otherwise the
/// hardware concurrency; always capped at `replicates`.
std::size_t default_worker_count(std::size_t replicates);

/// Mean of M independent filter likelihoods on the natural scale:
/// log_sum_exp(replicate log-liks) - log M. Replicate j uses streams[j].
LikelihoodEstimate averaged_loglik(const ModelParams& params, const TimeSeries& data,
                                   const FilterSettings& settings, std::span<RngStream> streams,
                                   std::size_t workers = 1);

/// Log-likelihood (estimate) at a log-parameter vector. May consume `rng`.
using LogLikelihoodFn = std::function<double(std::span<const double> log_eta, RngStream& rng)>;

struct PmmhConfig {
  std::uint64_t iterations = 0;
  AdaptSettings adapt;
  std::optional<std::vector<double>> eta_start;
  std::uint64_t progress_every = 0;
};

struct PmmhTallies {
  std::uint64_t iterations = 0;
  std::uint64_t outside_prior = 0;  // rejected without evaluating the likelihood
  std::uint64_t degenerate = 0;     // likelihood estimate was -inf
  std::uint64_t accepted = 0;

  double acceptance_rate() const {
    return iterations ? static_cast<double>(accepted) / static_cast<double>(iterations) : 0.0;
  }
};

struct PmmhResult {
  ChainTrace chain;  // aux = current log-likelihood estimate
  PmmhTallies tallies;
};

using PmmhProgressFn = std::function<void(std::uint64_t iteration, const PmmhTallies&)>;

/// Pseudo-marginal Metropolis-Hastings with uniform box priors and the adaptive
/// random-walk proposal. The likelihood estimate is carried with the state.
PmmhResult pmmh(const LogLikelihoodFn& loglik, const BoxPrior& prior, const PmmhConfig& cfg,
                RngStream& rng, const PmmhProgressFn& progress = {});

struct SdePmmhSettings {
  FilterSettings filter;
  std::size_t replicates = 4;  // M
  std::size_t workers = 1;
  /// Debug switch: constant likelihood, so the chain should sample the prior.
  bool ignore_data = false;
};

/// PMMH for the SDE model with averaged_loglik as the likelihood estimator.
/// Each iteration derives M fresh replicate streams from `rng`.
PmmhResult pmmh(const TimeSeries& data, const PriorSpec& prior, const SdePmmhSettings& settings,
                const PmmhConfig& cfg, RngStream& rng, const PmmhProgressFn& progress = {});

}  // namespace sdeabc
