#include "sdeabc/abc_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdeabc/errors.hpp"
#include "sdeabc/numerics.hpp"

namespace sdeabc {

bool BoxPrior::contains(std::span<const double> x) const {
  if (x.size() != lo.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
  }
  return true;
}

std::vector<double> BoxPrior::draw(RngStream& rng) const {
  std::vector<double> x(lo.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform();
  return x;
}

std::vector<double> BoxPrior::width() const {
  std::vector<double> w(lo.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = hi[i] - lo[i];
  return w;
}

void BoxPrior::validate(std::vector<std::string>& errors) const {
  if (lo.size() != hi.size()) {
    errors.push_back("prior: lower and upper bound lists differ in length");
    return;
  }
  if (lo.empty()) errors.push_back("prior: no parameters");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i])) {
      errors.push_back("prior: component " + std::to_string(i) + " has lo >= hi");
    }
  }
}

PriorSpec PriorSpec::simulation_study() {
  PriorSpec p;
  p.eta.lo = {-7.0, -1.5, -0.7, 3.1, 3.3, -2.5, -2.5, -1.5};
  p.eta.hi = {-5.3, 0.3, 0.5, 3.3, 3.7, 1.0, 1.0, -0.05};
  p.delta_rate = 0.2;
  return p;
}

std::vector<std::string> AbcConfig::validate() const {
  std::vector<std::string> errors;
  if (iterations == 0) errors.push_back("iterations: must be positive");
  if (!(delta_max > 0.0)) errors.push_back("delta_max: must be positive");
  if (!(delta_minmax > 0.0)) errors.push_back("delta_minmax: must be positive");
  if (!(delta_start > 0.0)) errors.push_back("delta_start: must be positive");
  if (!(delta_minmax < delta_max)) {
    errors.push_back("delta_minmax, delta_max: delta_minmax must be smaller than delta_max");
  }
  if (!(delta_start <= delta_max)) {
    errors.push_back("delta_start, delta_max: delta_start must not exceed delta_max");
  }
  if (!(update_percentile > 0.0 && update_percentile < 100.0)) {
    errors.push_back("update_percentile: must lie in (0, 100)");
  }
  if (!(logdelta_step_var > 0.0)) errors.push_back("logdelta_step_var: must be positive");
  if (thin == 0) errors.push_back("thin: must be positive");
  if (subsample_factor == 0) errors.push_back("subsample_factor: must be positive");
  if (!std::isfinite(x0)) errors.push_back("x0: must be finite");
  if (!(adapt.epsilon >= 0.0)) errors.push_back("adapt.epsilon: must be non-negative");
  if (start_pilot_draws == 0) errors.push_back("start_pilot_draws: must be positive");
  for (double sd : adapt.initial_sd) {
    if (!(sd > 0.0)) {
      errors.push_back("adapt.initial_sd: entries must be positive");
      break;
    }
  }
  return errors;
}

void ChainTrace::reserve(std::size_t rows) {
  iterations_.reserve(rows);
  values_.reserve(rows * dim_);
  aux_.reserve(rows);
  flags_.reserve(rows);
}

void ChainTrace::push(std::uint64_t iteration, std::span<const double> log_eta, double aux,
                      bool accepted, bool early_rejected) {
  iterations_.push_back(iteration);
  values_.insert(values_.end(), log_eta.begin(), log_eta.begin() + static_cast<std::ptrdiff_t>(dim_));
  aux_.push_back(aux);
  flags_.push_back(static_cast<std::uint8_t>((accepted ? 1u : 0u) | (early_rejected ? 2u : 0u)));
}

ChainRecord ChainTrace::operator[](std::size_t i) const {
  return {iterations_[i], std::span<const double>(values_).subspan(i * dim_, dim_), aux_[i],
          (flags_[i] & 1u) != 0, (flags_[i] & 2u) != 0};
}

AbcProblem make_sde_abc_problem(const TimeSeries& data, const SummarySpec& spec,
                                const PriorSpec& prior, const AbcConfig& cfg) {
  if (prior.eta.dimension() != kNumParams) {
    throw ConfigError("prior: expected " + std::to_string(kNumParams) + " parameters");
  }
  if (!spec.acf_lags_data().empty() && spec.subsample_factor() != cfg.subsample_factor) {
    throw ConfigError("summary spec lag ratio " + std::to_string(spec.subsample_factor()) +
                      " does not match subsample_factor " + std::to_string(cfg.subsample_factor));
  }
  AbcProblem problem;
  problem.prior = prior.eta;
  problem.delta_rate = prior.delta_rate;
  problem.spec = spec;
  problem.data_summary = summarize(data, spec, SummaryRole::kData);

  const TimeGrid sim_grid = subsample(data.grid(), cfg.subsample_factor);
  const double x0 = cfg.x0;
  problem.simulate = [sim_grid, spec, x0, z = std::vector<double>(), x = std::vector<double>()](
                         std::span<const double> log_eta,
                         RngStream& rng) mutable -> std::optional<SummaryVector> {
    try {
      LogEta eta;
      std::copy_n(log_eta.begin(), kNumParams, eta.begin());
      const ModelParams params(eta);
      simulate_observed_into(params, sim_grid.times(), x0, rng, z, x);
      return summarize(std::span<const double>(z), spec, SummaryRole::kSimulated);
    } catch (const DomainError&) {
      return std::nullopt;
    } catch (const ConvergenceError&) {
      return std::nullopt;
    } catch (const DataError&) {
      return std::nullopt;
    }
  };
  return problem;
}

RejectionResult abc_rejection(const AbcProblem& problem, double delta, std::size_t count,
                              std::uint64_t max_simulations, RngStream& rng) {
  if (!(delta > 0.0)) throw DomainError("abc_rejection: delta must be positive");
  RejectionResult out;
  out.draws.reserve(count);
  while (out.draws.size() < count) {
    if (out.simulations >= max_simulations) {
      out.truncated = true;
      break;
    }
    std::vector<double> eta = problem.prior.draw(rng);
    ++out.simulations;
    const auto s = problem.simulate(eta, rng);
    if (s && kernel_accept(*s, problem.data_summary, delta, problem.spec) == 1) {
      out.draws.push_back(std::move(eta));
    }
  }
  return out;
}

double logdelta_log_density(double from, double to, double logdelta_max, double step_var) {
  const double s = std::sqrt(step_var);
  if (to > logdelta_max) return -std::numeric_limits<double>::infinity();
  return std_normal_log_pdf((to - from) / s) - std::log(s) -
         std::log(std_normal_cdf((logdelta_max - from) / s));
}

LogDeltaProposal propose_logdelta(double current_logdelta, double logdelta_max,
                                  double step_var, RngStream& rng) {
  const double s = std::sqrt(step_var);
  double value;
  do {
    value = current_logdelta + s * rng.normal();
  } while (value > logdelta_max);
  // The Gaussian kernels cancel between directions; only the truncation
  // normalizers differ.
  const double kernel = std_normal_log_pdf((value - current_logdelta) / s) - std::log(s);
  return {value, kernel - std::log(std_normal_cdf((logdelta_max - current_logdelta) / s)),
          kernel - std::log(std_normal_cdf((logdelta_max - value) / s))};
}

double early_reject_ratio(std::span<const double> eta_prop, double delta_prop,
                          std::span<const double> eta_cur, double delta_cur,
                          const BoxPrior& prior, double delta_rate,
                          const LogDeltaProposal& proposal) {
  (void)eta_cur;  // uniform prior: pi(eta_cur) is constant inside the box
  if (!prior.contains(eta_prop)) return 0.0;
  const double log_ratio = -delta_rate * (delta_prop - delta_cur) + std::log(delta_prop) -
                           std::log(delta_cur) + proposal.log_reverse - proposal.log_forward;
  return std::exp(log_ratio);
}

double update_delta_max(std::span<const double> history, double m, double delta_minmax) {
  std::vector<double> sorted(history.begin(), history.end());
  std::sort(sorted.begin(), sorted.end());
  return std::max(sorted_percentile(sorted, m / 100.0), delta_minmax);
}

AbcRunResult abc_mcmc(const AbcProblem& problem, const AbcConfig& cfg, RngStream& rng,
                      const AbcProgressFn& progress) {
  if (const auto errors = cfg.validate(); !errors.empty()) {
    std::string msg = "invalid ABC configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  const std::size_t dim = problem.prior.dimension();
  AdaptSettings adapt = cfg.adapt;
  if (adapt.initial_sd.empty()) {
    // Default initial steps: 2% of each prior range.
    for (double w : problem.prior.width()) adapt.initial_sd.push_back(0.02 * w);
  }
  AdaptiveProposal proposal(adapt, dim);

  // Step 0: starting state.
  std::vector<double> eta;
  std::optional<SummaryVector> s_cur;
  if (cfg.eta_start) {
    eta = *cfg.eta_start;
    if (eta.size() != dim) throw ConfigError("eta_start: wrong number of components");
    constexpr int kStartAttempts = 1000;
    for (int attempt = 0; attempt < kStartAttempts && !s_cur; ++attempt) {
      s_cur = problem.simulate(eta, rng);
    }
  } else {
    // Best of several prior draws; failed simulations do not count towards the budget.
    const std::uint64_t wanted = std::max<std::uint64_t>(cfg.start_pilot_draws, 1);
    const std::uint64_t max_tries = 1000 * wanted;
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t done = 0;
    for (std::uint64_t tries = 0; done < wanted && tries < max_tries; ++tries) {
      std::vector<double> candidate = problem.prior.draw(rng);
      auto s = problem.simulate(candidate, rng);
      if (!s) continue;
      ++done;
      const double dist = kernel_distance(*s, problem.data_summary, 1.0, problem.spec.weights_diag());
      if (!s_cur || dist < best) {
        best = dist;
        eta = std::move(candidate);
        s_cur = std::move(s);
      }
    }
  }
  if (!s_cur) throw ConvergenceError("abc_mcmc: could not simulate a starting data set");

  AbcRunResult result;
  result.chain = ChainTrace(dim);
  result.chain.reserve(cfg.iterations);
  result.eta_start = eta;
  AbcTallies& tally = result.tallies;

  double delta = cfg.delta_start;
  double delta_max = cfg.delta_max;
  const double threshold = kernel_threshold(problem.spec.dimension(), problem.spec.weights_diag());
  std::vector<double> delta_states;
  delta_states.reserve(cfg.iterations + 1);
  delta_states.push_back(delta);
  proposal.observe(eta);

  for (std::uint64_t r = 0; r < cfg.iterations; ++r) {
    // Step 1: update delta_max at multiples of g, then propose.
    if (cfg.update_period > 0 && r > 0 && r % cfg.update_period == 0) {
      const auto window = std::span<const double>(delta_states).subspan(r - cfg.update_period, cfg.update_period);
      const double updated = std::max(
          update_delta_max(window, cfg.update_percentile, cfg.delta_minmax), delta);
      if (updated != delta_max) {
        delta_max = updated;
        result.last_delta_max_change = r;
      }
      result.delta_max_updates.push_back({r, delta_max});
    }
    std::vector<double> eta_prop = proposal.propose(eta, rng);
    const LogDeltaProposal ld =
        propose_logdelta(std::log(delta), std::log(delta_max), cfg.logdelta_step_var, rng);
    const double delta_prop = std::exp(ld.value);
    const double ratio =
        early_reject_ratio(eta_prop, delta_prop, eta, delta, problem.prior, problem.delta_rate, ld);

    // Step 2.
    const double omega = rng.uniform();
    bool accepted = false;
    bool early = false;
    if (cfg.early_rejection && omega > ratio) {
      early = true;
      ++tally.early_rejected;
    } else {
      ++tally.simulated;
      auto s_prop = problem.simulate(eta_prop, rng);
      if (!s_prop) {
        ++tally.simulation_failures;
        ++tally.kernel_rejected;
      } else if (!(kernel_distance(*s_prop, problem.data_summary, delta_prop,
                                   problem.spec.weights_diag()) < threshold)) {
        ++tally.kernel_rejected;
      } else if (omega <= ratio) {
        accepted = true;
        ++tally.accepted;
        eta = std::move(eta_prop);
        delta = delta_prop;
        s_cur = std::move(s_prop);
      } else {
        ++tally.ratio_rejected;
      }
    }
    ++tally.iterations;
    result.chain.push(r + 1, eta, delta, accepted, early);
    delta_states.push_back(delta);
    proposal.observe(eta);

    if (progress && cfg.progress_every > 0 && (r + 1) % cfg.progress_every == 0) {
      progress(AbcProgress{r + 1, delta, delta_max, tally});
    }
  }
  result.final_delta_max = delta_max;
  return result;
}

AbcRunResult abc_mcmc(const TimeSeries& data, const SummarySpec& spec, const PriorSpec& prior,
                      const AbcConfig& cfg, RngStream& rng, const AbcProgressFn& progress) {
  return abc_mcmc(make_sde_abc_problem(data, spec, prior, cfg), cfg, rng, progress);
}

FilteredDraws filter_chain(const ChainTrace& chain, double delta_star, std::uint64_t thin,
                           std::uint64_t burn_in) {
  if (chain.empty()) throw DataError("filter_chain: empty chain");
  if (thin == 0) throw ConfigError("filter_chain: thin must be positive");
  FilteredDraws out;
  for (std::size_t i = burn_in; i < chain.size(); i += thin) {
    const ChainRecord rec = chain[i];
    if (rec.aux <= delta_star) out.draws.emplace_back(rec.log_eta.begin(), rec.log_eta.end());
  }
  out.empty_warning = out.draws.empty();
  return out;
}

FilteredDraws filter_abc_run(const AbcRunResult& run, double delta_star, std::uint64_t thin,
                             std::uint64_t burn_in) {
  if (burn_in < run.last_delta_max_change) {
    throw ConfigError("burn_in " + std::to_string(burn_in) +
                      " ends before the last delta_max change at iteration " +
                      std::to_string(run.last_delta_max_change));
  }
  return filter_chain(run.chain, delta_star, thin, burn_in);
}

std::vector<PosteriorSummary> posterior_summary(const std::vector<std::vector<double>>& draws) {
  if (draws.size() < kMinPosteriorDraws) {
    throw DataError("posterior_summary: need at least " + std::to_string(kMinPosteriorDraws) +
                    " draws, got " + std::to_string(draws.size()));
  }
  const std::size_t dim = draws.front().size();
  std::vector<PosteriorSummary> out(dim);
  std::vector<double> column(draws.size());
  for (std::size_t j = 0; j < dim; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < draws.size(); ++i) {
      column[i] = draws[i][j];
      sum += column[i];
    }
    std::sort(column.begin(), column.end());
    out[j] = {sum / static_cast<double>(draws.size()), sorted_percentile(column, 0.025),
              sorted_percentile(column, 0.975)};
  }
  return out;
}

std::vector<DeltaBin> delta_bins(const ChainTrace& chain, std::size_t n_bins,
                                 std::uint64_t burn_in) {
  if (chain.size() <= burn_in) throw DataError("delta_bins: no records after burn-in");
  if (n_bins == 0) throw ConfigError("delta_bins: need at least one bin");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = burn_in; i < chain.size(); ++i) {
    lo = std::min(lo, chain[i].aux);
    hi = std::max(hi, chain[i].aux);
  }
  if (lo == hi) n_bins = 1;
  const double width = n_bins == 1 ? 0.0 : (hi - lo) / static_cast<double>(n_bins);
  const std::size_t dim = chain.dimension();

  std::vector<DeltaBin> bins(n_bins);
  std::vector<std::vector<double>> sum_sq(n_bins, std::vector<double>(dim, 0.0));
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lower = lo + width * static_cast<double>(b);
    bins[b].upper = b + 1 == n_bins ? hi : lo + width * static_cast<double>(b + 1);
    bins[b].center = 0.5 * (bins[b].lower + bins[b].upper);
    bins[b].count = bins[b].accepted = bins[b].early_rejected = 0;
    bins[b].mean.assign(dim, 0.0);
    bins[b].sd.assign(dim, 0.0);
  }
  for (std::size_t i = burn_in; i < chain.size(); ++i) {
    const ChainRecord rec = chain[i];
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((rec.aux - lo) / width) : 0;
    b = std::min(b, n_bins - 1);
    DeltaBin& bin = bins[b];
    ++bin.count;
    bin.accepted += rec.accepted ? 1 : 0;
    bin.early_rejected += rec.early_rejected ? 1 : 0;
    for (std::size_t j = 0; j < dim; ++j) {
      bin.mean[j] += rec.log_eta[j];
      sum_sq[b][j] += rec.log_eta[j] * rec.log_eta[j];
    }
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    DeltaBin& bin = bins[b];
    if (bin.count == 0) continue;
    const auto n = static_cast<double>(bin.count);
    for (std::size_t j = 0; j < dim; ++j) {
      bin.mean[j] /= n;
      const double var = n > 1 ? (sum_sq[b][j] - n * bin.mean[j] * bin.mean[j]) / (n - 1) : 0.0;
      bin.sd[j] = std::sqrt(std::max(var, 0.0));
    }
  }
  return bins;
}

}  // namespace sdeabc
