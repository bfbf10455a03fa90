#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdeabc/adaptive_metropolis.hpp"
#include "sdeabc/rng.hpp"
#include "sdeabc/sde_model.hpp"
#include "sdeabc/summaries.hpp"

namespace sdeabc {

/// Independent uniform priors on a box (log scale for the SDE parameters).
struct BoxPrior {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dimension() const noexcept { return lo.size(); }
  bool contains(std::span<const double> x) const;
  std::vector<double> draw(RngStream& rng) const;
  std::vector<double> width() const;
  /// Collects violations (lo >= hi, length mismatch) into `errors`.
  void validate(std::vector<std::string>& errors) const;
};

/// Uniform box prior on log-eta plus an Exp(delta_rate) prior on the ABC tolerance.
struct PriorSpec {
  BoxPrior eta;
  double delta_rate = 0.2;

  /// Priors of the n = 355 simulation study.
  static PriorSpec simulation_study();
};

struct AbcConfig {
  std::uint64_t iterations = 0;  // R
  double delta_start = 0.5;
  double delta_max = 0.8;
  double delta_minmax = 0.47;
  std::uint64_t update_period = 3000;  // g; 0 disables delta_max updates
  double update_percentile = 99.0;     // m
  double logdelta_step_var = 0.2;
  std::uint64_t thin = 10;
  std::uint64_t burn_in = 0;
  std::size_t subsample_factor = 1;  // q
  double x0 = 0.0;
  AdaptSettings adapt;
  /// When false every proposal is simulated before the accept test (reference variant).
  bool early_rejection = true;
  /// Starting log-eta. When empty, `start_pilot_draws` prior draws are each
  /// simulated once and the one closest to the data (smallest kernel distance)
  /// becomes the start; 1 gives a plain prior draw.
  std::optional<std::vector<double>> eta_start;
  std::uint64_t start_pilot_draws = 1000;
  /// Emit a progress callback every this many iterations (0 = never).
  std::uint64_t progress_every = 0;

  /// Every violated constraint, as "key: message" strings.
  std::vector<std::string> validate() const;
};

/// One stored iteration. `aux` is the tolerance delta for ABC chains and the
/// log-likelihood estimate for PMMH chains.
struct ChainRecord {
  std::uint64_t iteration;
  std::span<const double> log_eta;
  double aux;
  bool accepted;
  bool early_rejected;
};

/// Column-major-free flat storage of a chain: one row per iteration.
class ChainTrace {
 public:
  explicit ChainTrace(std::size_t dim = kNumParams) : dim_(dim) {}

  void reserve(std::size_t rows);
  void push(std::uint64_t iteration, std::span<const double> log_eta, double aux, bool accepted,
            bool early_rejected);

  std::size_t size() const noexcept { return iterations_.size(); }
  bool empty() const noexcept { return iterations_.empty(); }
  std::size_t dimension() const noexcept { return dim_; }
  ChainRecord operator[](std::size_t i) const;
  std::span<const double> aux_values() const noexcept { return aux_; }

 private:
  std::size_t dim_;
  std::vector<std::uint64_t> iterations_;
  std::vector<double> values_;
  std::vector<double> aux_;
  std::vector<std::uint8_t> flags_;
};

struct AbcTallies {
  std::uint64_t iterations = 0;
  std::uint64_t early_rejected = 0;
  std::uint64_t simulated = 0;
  std::uint64_t simulation_failures = 0;
  std::uint64_t kernel_rejected = 0;
  std::uint64_t ratio_rejected = 0;
  std::uint64_t accepted = 0;

  double acceptance_rate() const {
    return iterations ? static_cast<double>(accepted) / static_cast<double>(iterations) : 0.0;
  }
};

struct DeltaMaxUpdate {
  std::uint64_t iteration;
  double value;
};

struct AbcRunResult {
  ChainTrace chain;
  AbcTallies tallies;
  std::vector<DeltaMaxUpdate> delta_max_updates;
  /// Last iteration at which delta_max changed value (0 if it never did).
  std::uint64_t last_delta_max_change = 0;
  double final_delta_max = 0.0;
  std::vector<double> eta_start;
};

struct AbcProgress {
  std::uint64_t iteration;
  double delta;
  double delta_max;
  const AbcTallies& tallies;
};

/// Summary statistics of one simulated data set, or nullopt if the simulation
/// failed (counted as a kernel rejection).
using SummarySimulator =
    std::function<std::optional<SummaryVector>(std::span<const double> log_eta, RngStream& rng)>;

/// Everything the ABC-MCMC engine needs about the model and data.
struct AbcProblem {
  BoxPrior prior;
  double delta_rate = 0.2;
  SummarySpec spec;
  SummaryVector data_summary;
  SummarySimulator simulate;
};

/// Builds the SDE problem: S_n(data) once, simulations on the q-subsampled grid
/// started at cfg.x0.
AbcProblem make_sde_abc_problem(const TimeSeries& data, const SummarySpec& spec,
                                const PriorSpec& prior, const AbcConfig& cfg);

struct RejectionResult {
  std::vector<std::vector<double>> draws;
  std::uint64_t simulations = 0;
  bool truncated = false;
};

/// Plain ABC rejection: prior draws kept when their simulated summaries pass
/// the kernel at `delta`. Stops early (truncated = true) after `max_simulations`.
RejectionResult abc_rejection(const AbcProblem& problem, double delta, std::size_t count,
                              std::uint64_t max_simulations, RngStream& rng);

struct LogDeltaProposal {
  double value;
  double log_forward;
  double log_reverse;
};

/// Gaussian random walk on log delta truncated above at logdelta_max. The
/// forward and reverse log densities include their own truncation normalizers.
LogDeltaProposal propose_logdelta(double current_logdelta, double logdelta_max,
                                  double step_var, RngStream& rng);

/// Log density of the truncated walk from `from` to `to`.
double logdelta_log_density(double from, double to, double logdelta_max, double step_var);

/// Prior-and-proposal part of the MH ratio. Zero when eta' leaves the prior box.
/// Includes exp(-rate (delta' - delta)), the truncation-normalizer ratio and the
/// Jacobian delta' / delta of the log-scale walk.
double early_reject_ratio(std::span<const double> eta_prop, double delta_prop,
                          std::span<const double> eta_cur, double delta_cur,
                          const BoxPrior& prior, double delta_rate,
                          const LogDeltaProposal& proposal);

/// max(m-th percentile of history, delta_minmax).
double update_delta_max(std::span<const double> history, double m, double delta_minmax);

using AbcProgressFn = std::function<void(const AbcProgress&)>;

/// Early-rejection ABC-MCMC over (eta, delta).
AbcRunResult abc_mcmc(const AbcProblem& problem, const AbcConfig& cfg, RngStream& rng,
                      const AbcProgressFn& progress = {});

AbcRunResult abc_mcmc(const TimeSeries& data, const SummarySpec& spec, const PriorSpec& prior,
                      const AbcConfig& cfg, RngStream& rng, const AbcProgressFn& progress = {});

struct FilteredDraws {
  std::vector<std::vector<double>> draws;
  /// Set when nothing survived the filter (delta_star too small).
  bool empty_warning = false;
};

/// Drops `burn_in` records, keeps every `thin`-th, then keeps rows with aux <= delta_star.
FilteredDraws filter_chain(const ChainTrace& chain, double delta_star, std::uint64_t thin,
                           std::uint64_t burn_in);

/// filter_chain for an ABC run; throws ConfigError when burn_in does not cover
/// the delta_max annealing phase.
FilteredDraws filter_abc_run(const AbcRunResult& run, double delta_star, std::uint64_t thin,
                             std::uint64_t burn_in);

struct PosteriorSummary {
  double mean;
  double lower;  // 2.5th percentile
  double upper;  // 97.5th percentile
};

inline constexpr std::size_t kMinPosteriorDraws = 100;

/// Componentwise mean and central 95% interval. Throws DataError with fewer
/// than kMinPosteriorDraws draws.
std::vector<PosteriorSummary> posterior_summary(const std::vector<std::vector<double>>& draws);

/// Per-bin posterior means and naive SDs against delta (data behind the
/// "posterior mean vs delta" plot), with acceptance tallies per bin.
struct DeltaBin {
  double center;
  double lower;
  double upper;
  std::uint64_t count;
  std::uint64_t accepted;
  std::uint64_t early_rejected;
  std::vector<double> mean;
  std::vector<double> sd;
};

std::vector<DeltaBin> delta_bins(const ChainTrace& chain, std::size_t n_bins,
                                 std::uint64_t burn_in = 0);

}  // namespace sdeabc
