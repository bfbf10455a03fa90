#include "sdeabc/pmcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include <Eigen/Dense>

#include "sdeabc/errors.hpp"
#include "sdeabc/numerics.hpp"

namespace sdeabc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double obs_logdensity_increment(double z_i, double z_prev, double tau_i, double tau_prev_parent,
                                double gamma, double kappa, double dt) {
  const double decay = std::exp(-kappa * dt);
  const double sd = gamma * std::sqrt(-std::expm1(-2.0 * kappa * dt));
  const double resid = z_i - tau_i - decay * (z_prev - tau_prev_parent);
  return std_normal_log_pdf(resid / sd) - std::log(sd);
}

double initial_log_weight(double z_0, double tau_0, double gamma) {
  return std_normal_log_pdf((z_0 - tau_0) / gamma) - std::log(gamma);
}

namespace {

void resample(const std::vector<double>& log_weights, Resampling scheme, RngStream& rng,
              std::vector<std::size_t>& parents, std::vector<double>& scratch) {
  const std::size_t n = log_weights.size();
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  scratch.resize(n);
  for (std::size_t l = 0; l < n; ++l) scratch[l] = std::exp(log_weights[l] - top);
  parents.resize(n);
  if (scheme == Resampling::kMultinomial) {
    std::discrete_distribution<std::size_t> pick(scratch.begin(), scratch.end());
    for (std::size_t l = 0; l < n; ++l) parents[l] = pick(rng.engine());
    return;
  }
  double total = 0.0;
  for (double w : scratch) total += w;
  const double step = total / static_cast<double>(n);
  double u = rng.uniform() * step;
  double cumulative = scratch[0];
  std::size_t j = 0;
  for (std::size_t l = 0; l < n; ++l) {
    while (u > cumulative && j + 1 < n) cumulative += scratch[++j];
    parents[l] = j;
    u += step;
  }
}

}  // namespace

double bootstrap_filter(const ModelParams& params, const TimeSeries& data,
                        const FilterSettings& settings, RngStream& rng,
                        const ParticleObserver& observer) {
  const std::size_t n_part = settings.particles;
  if (n_part < 2) throw ConfigError("bootstrap_filter: need at least 2 particles");
  if (data.size() == 0) throw DataError("bootstrap_filter: empty data");

  const MixtureParams psi = params.mixture();
  const double theta = params.theta();
  const double kappa = params.kappa();
  const double gamma = params.gamma();
  const auto& z = data.values();
  const auto& t = data.times();
  const double log_n = std::log(static_cast<double>(n_part));

  ParticleSystem sys;
  sys.latent_values.resize(n_part);
  sys.transformed.resize(n_part);
  sys.log_weights.resize(n_part);
  sys.parent_index.resize(n_part);
  for (std::size_t l = 0; l < n_part; ++l) {
    sys.latent_values[l] = settings.x0_law == InitialLaw::kFixed ? settings.x0 : rng.normal();
    sys.parent_index[l] = l;
  }
  if (settings.x0_law == InitialLaw::kFixed) {
    std::fill(sys.transformed.begin(), sys.transformed.end(), tau(psi, settings.x0));
  } else {
    for (std::size_t l = 0; l < n_part; ++l) sys.transformed[l] = tau(psi, sys.latent_values[l]);
  }
  for (std::size_t l = 0; l < n_part; ++l) {
    sys.log_weights[l] = initial_log_weight(z[0], sys.transformed[l], gamma);
  }
  double loglik = log_sum_exp(sys.log_weights) - log_n;
  if (observer) observer(sys);
  if (!std::isfinite(loglik)) return kNegInf;

  std::vector<double> next_latent(n_part);
  std::vector<double> next_tau(n_part);
  std::vector<double> scratch;
  for (std::size_t i = 1; i < data.size(); ++i) {
    resample(sys.log_weights, settings.resampling, rng, sys.parent_index, scratch);
    const double dt = t[i] - t[i - 1];
    const GaussianMoments step = ou_transition(theta, 1.0, dt, 1.0);
    const double sd = std::sqrt(step.variance);
    for (std::size_t l = 0; l < n_part; ++l) {
      const std::size_t parent = sys.parent_index[l];
      next_latent[l] = sys.latent_values[parent] * step.mean + sd * rng.normal();
      next_tau[l] = tau(psi, next_latent[l]);
      // Weight uses the particle's own parent tau and the previous observation.
      sys.log_weights[l] = obs_logdensity_increment(z[i], z[i - 1], next_tau[l],
                                                    sys.transformed[parent], gamma, kappa, dt);
    }
    sys.latent_values.swap(next_latent);
    sys.transformed.swap(next_tau);
    sys.time_index = i;
    const double increment = log_sum_exp(sys.log_weights) - log_n;
    if (observer) observer(sys);
    if (!std::isfinite(increment)) return kNegInf;
    loglik += increment;
  }
  return loglik;
}

ModelParams linear_degenerate_params(double theta, double kappa, double gamma) {
  // mu1 = e^-60 ~ 0, sigma1 = 1, alpha = 1 - 1e-13; the second component is irrelevant.
  return ModelParams(LogEta{std::log(theta), std::log(kappa), std::log(gamma), -60.0, 0.0, 0.0,
                            0.0, -1e-13});
}

double kalman_loglik(const ModelParams& params, const TimeSeries& data, InitialLaw x0_law,
                     double x0, ErrorStartLaw u0_law) {
  if (!(params.alpha() > 1.0 - 1e-9 && std::abs(params.mu1()) < 1e-9 &&
        std::abs(params.sigma1() - 1.0) < 1e-9)) {
    throw DomainError("kalman_loglik: requires the degenerate identity transform");
  }
  const double theta = params.theta();
  const double kappa = params.kappa();
  const double gamma2 = params.gamma() * params.gamma();

  Eigen::Vector2d mean(x0_law == InitialLaw::kFixed ? x0 : 0.0, 0.0);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  cov(0, 0) = x0_law == InitialLaw::kFixed ? 0.0 : 1.0;
  cov(1, 1) = u0_law == ErrorStartLaw::kStationary ? gamma2 : 0.0;
  const Eigen::RowVector2d h(1.0, 1.0);

  double loglik = 0.0;
  const auto& z = data.values();
  const auto& t = data.times();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (i > 0) {
      const double dt = t[i] - t[i - 1];
      const Eigen::Matrix2d transition =
          Eigen::Vector2d(std::exp(-theta * dt), std::exp(-kappa * dt)).asDiagonal();
      Eigen::Matrix2d noise = Eigen::Matrix2d::Zero();
      noise(0, 0) = -std::expm1(-2.0 * theta * dt);
      noise(1, 1) = -gamma2 * std::expm1(-2.0 * kappa * dt);
      mean = transition * mean;
      cov = transition * cov * transition.transpose() + noise;
    }
    const double innovation_var = h * cov * h.transpose();
    if (!(innovation_var > 0.0)) {
      throw DomainError("kalman_loglik: degenerate observation variance at index " +
                        std::to_string(i));
    }
    const double innovation = z[i] - h * mean;
    loglik += -kLogSqrt2Pi - 0.5 * std::log(innovation_var) -
              0.5 * innovation * innovation / innovation_var;
    const Eigen::Vector2d gain = cov * h.transpose() / innovation_var;
    mean += gain * innovation;
    cov = (cov - gain * h * cov).eval();
    cov = 0.5 * (cov + cov.transpose()).eval();
  }
  return loglik;
}

std::size_t default_worker_count(std::size_t replicates) {
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SDEABC_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) workers = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      // Ignore malformed values.
    }
  }
  return std::max<std::size_t>(1, std::min(workers, replicates));
}

LikelihoodEstimate averaged_loglik(const ModelParams& params, const TimeSeries& data,
                                   const FilterSettings& settings, std::span<RngStream> streams,
                                   std::size_t workers) {
  const std::size_t m = streams.size();
  if (m == 0) throw ConfigError("averaged_loglik: need at least one replicate stream");
  std::vector<double> replicate(m);
  workers = std::clamp<std::size_t>(workers, 1, m);
  if (workers == 1) {
    for (std::size_t j = 0; j < m; ++j) replicate[j] = bootstrap_filter(params, data, settings, streams[j]);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < m; j += workers) {
          replicate[j] = bootstrap_filter(params, data, settings, streams[j]);
        }
      });
    }
  }
  // Sorting fixes the summation order, so the result does not depend on how
  // replicates were assigned to streams.
  std::sort(replicate.begin(), replicate.end());
  return {log_sum_exp(replicate) - std::log(static_cast<double>(m)), settings.particles, m};
}

PmmhResult pmmh(const LogLikelihoodFn& loglik, const BoxPrior& prior, const PmmhConfig& cfg,
                RngStream& rng, const PmmhProgressFn& progress) {
  std::vector<std::string> errors;
  prior.validate(errors);
  if (cfg.iterations == 0) errors.push_back("iterations: must be positive");
  if (!errors.empty()) {
    std::string msg = "invalid PMMH configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  const std::size_t dim = prior.dimension();
  AdaptSettings adapt = cfg.adapt;
  if (adapt.initial_sd.empty()) {
    for (double w : prior.width()) adapt.initial_sd.push_back(0.02 * w);
  }
  AdaptiveProposal proposal(adapt, dim);

  std::vector<double> eta;
  double ll = kNegInf;
  constexpr int kStartAttempts = 1000;
  for (int attempt = 0; attempt < kStartAttempts && !std::isfinite(ll); ++attempt) {
    eta = cfg.eta_start ? *cfg.eta_start : prior.draw(rng);
    ll = loglik(eta, rng);
  }
  if (!std::isfinite(ll)) throw ConvergenceError("pmmh: no starting point with finite likelihood");

  PmmhResult result{ChainTrace(dim), {}};
  result.chain.reserve(cfg.iterations);
  proposal.observe(eta);
  for (std::uint64_t r = 0; r < cfg.iterations; ++r) {
    std::vector<double> eta_prop = proposal.propose(eta, rng);
    bool accepted = false;
    bool outside = false;
    if (!prior.contains(eta_prop)) {
      outside = true;
      ++result.tallies.outside_prior;
    } else {
      const double ll_prop = loglik(eta_prop, rng);
      if (!std::isfinite(ll_prop)) {
        ++result.tallies.degenerate;
      } else if (std::log(rng.uniform()) < ll_prop - ll) {
        accepted = true;
        ++result.tallies.accepted;
        eta = std::move(eta_prop);
        ll = ll_prop;
      }
    }
    ++result.tallies.iterations;
    result.chain.push(r + 1, eta, ll, accepted, outside);
    proposal.observe(eta);
    if (progress && cfg.progress_every > 0 && (r + 1) % cfg.progress_every == 0) {
      progress(r + 1, result.tallies);
    }
  }
  return result;
}

PmmhResult pmmh(const TimeSeries& data, const PriorSpec& prior, const SdePmmhSettings& settings,
                const PmmhConfig& cfg, RngStream& rng, const PmmhProgressFn& progress) {
  if (settings.replicates == 0) throw ConfigError("replicates: must be positive");
  LogLikelihoodFn estimator = [&](std::span<const double> log_eta, RngStream& chain_rng) -> double {
    if (settings.ignore_data) return 0.0;
    LogEta eta;
    std::copy_n(log_eta.begin(), kNumParams, eta.begin());
    try {
      const ModelParams params(eta);
      std::vector<RngStream> streams;
      streams.reserve(settings.replicates);
      const std::uint64_t base = chain_rng.next_u64();
      for (std::size_t j = 0; j < settings.replicates; ++j) streams.emplace_back(base, j);
      return averaged_loglik(params, data, settings.filter, streams, settings.workers).log_value;
    } catch (const DomainError&) {
      return kNegInf;
    } catch (const ConvergenceError&) {
      return kNegInf;
    }
  };
  return pmmh(estimator, prior.eta, cfg, rng, progress);
}

}  // namespace sdeabc
