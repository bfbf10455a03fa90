#include "sdeabc/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "sdeabc/errors.hpp"
#include "sdeabc/io.hpp"
#include "sdeabc/numerics.hpp"
#include "sdeabc/rng.hpp"

namespace sdeabc {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

RunMetadata base_metadata(const RunConfig& cfg) {
  RunMetadata m;
  m.seed = cfg.seed;
  m.config_digest = cfg.digest;
  m.extra["mode"] = to_string(cfg.mode);
  return m;
}

std::string percent(double rate) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << 100.0 * rate << '%';
  return os.str();
}

// Records of `chain` with iteration <= burn_in (chain files may be strided).
std::uint64_t records_before(const ChainTrace& chain, std::uint64_t burn_in) {
  std::uint64_t k = 0;
  while (k < chain.size() && chain[k].iteration <= burn_in) ++k;
  return k;
}

void write_posterior_if_possible(const FilteredDraws& draws, const fs::path& path,
                                 const RunMetadata& meta, RunReport& report, std::ostream& log) {
  if (draws.empty_warning) {
    log << "warning: no draws survived the filter; posterior.csv not written\n";
    return;
  }
  if (draws.draws.size() < kMinPosteriorDraws) {
    log << "warning: only " << draws.draws.size() << " filtered draws (need "
        << kMinPosteriorDraws << "); posterior.csv not written\n";
    return;
  }
  write_posterior(posterior_summary(draws.draws), path);
  RunMetadata m = meta;
  m.extra["draws"] = std::to_string(draws.draws.size());
  write_metadata(path, m);
  report.outputs.push_back(path);
}

void run_simulate(const RunConfig& cfg, RunReport& report) {
  const fs::path out = cfg.output_dir / "data.csv";
  generate_dataset(*cfg.model, cfg.grid.n, cfg.grid.t_start, cfg.grid.spacing, cfg.x0, cfg.seed,
                   out, base_metadata(cfg));
  report.outputs = {out, metadata_path(out)};
}

void run_abc(const RunConfig& cfg, RunReport& report, std::ostream& log) {
  const TimeSeries data = read_timeseries(cfg.data);
  RngStream rng(cfg.seed, 0);
  AbcProgressFn progress;
  if (cfg.progress_every > 0) {
    progress = [&log](const AbcProgress& p) {
      log << "iter " << p.iteration << " delta " << format_real(p.delta) << " delta_max "
          << format_real(p.delta_max) << " accepted " << percent(p.tallies.acceptance_rate())
          << '\n';
    };
  }
  const AbcRunResult res = abc_mcmc(data, *cfg.summaries, cfg.prior, cfg.abc, rng, progress);
  report.acceptance_rate = res.tallies.acceptance_rate();

  RunMetadata meta = base_metadata(cfg);
  meta.extra["summary_spec"] = cfg.summaries->id();
  meta.extra["last_delta_max_change"] = std::to_string(res.last_delta_max_change);
  meta.extra["final_delta_max"] = format_real(res.final_delta_max);
  meta.extra["early_rejected"] = std::to_string(res.tallies.early_rejected);
  meta.extra["simulated"] = std::to_string(res.tallies.simulated);
  meta.extra["accepted"] = std::to_string(res.tallies.accepted);

  const fs::path chain_path = cfg.output_dir / "chain.csv";
  write_chain(res.chain, ChainKind::kAbc, chain_path, cfg.chain_stride);
  write_metadata(chain_path, meta);
  report.outputs.push_back(chain_path);

  const fs::path summary_path = cfg.output_dir / "data_summary.csv";
  write_summary_vector(summarize(data, *cfg.summaries, SummaryRole::kData), *cfg.summaries,
                       summary_path);
  write_metadata(summary_path, meta);
  report.outputs.push_back(summary_path);

  const fs::path diag_path = cfg.output_dir / "diagnostics.csv";
  write_diagnostics(delta_bins(res.chain, cfg.diagnostic_bins, cfg.abc.burn_in), diag_path);
  write_metadata(diag_path, meta);
  report.outputs.push_back(diag_path);

  if (cfg.abc.burn_in < res.last_delta_max_change) {
    throw ConfigError("abc.burn_in = " + std::to_string(cfg.abc.burn_in) +
                      " ends before the last delta_max change at iteration " +
                      std::to_string(res.last_delta_max_change) + "; chain written to " +
                      chain_path.string() + ", rerun summarize mode with a longer burn-in");
  }
  const FilteredDraws draws = filter_abc_run(res, cfg.delta_star, cfg.abc.thin, cfg.abc.burn_in);
  write_posterior_if_possible(draws, cfg.output_dir / "posterior.csv", meta, report, log);
}

void run_pmcmc(const RunConfig& cfg, RunReport& report, std::ostream& log) {
  const TimeSeries data = read_timeseries(cfg.data);
  RngStream rng(cfg.seed, 0);
  PmmhProgressFn progress;
  if (cfg.progress_every > 0) {
    progress = [&log](std::uint64_t it, const PmmhTallies& t) {
      log << "iter " << it << " accepted " << percent(t.acceptance_rate()) << '\n';
    };
  }
  const PmmhResult res = pmmh(data, cfg.prior, cfg.pmmh_settings, cfg.pmmh, rng, progress);
  report.acceptance_rate = res.tallies.acceptance_rate();

  RunMetadata meta = base_metadata(cfg);
  meta.extra["particles"] = std::to_string(cfg.pmmh_settings.filter.particles);
  meta.extra["replicates"] = std::to_string(cfg.pmmh_settings.replicates);
  meta.extra["accepted"] = std::to_string(res.tallies.accepted);

  const fs::path chain_path = cfg.output_dir / "chain.csv";
  write_chain(res.chain, ChainKind::kPmmh, chain_path, cfg.chain_stride);
  write_metadata(chain_path, meta);
  report.outputs.push_back(chain_path);

  const FilteredDraws draws = filter_chain(res.chain, std::numeric_limits<double>::infinity(),
                                           cfg.pmmh_thin, cfg.pmmh_burn_in);
  write_posterior_if_possible(draws, cfg.output_dir / "posterior.csv", meta, report, log);
}

void run_filter(const RunConfig& cfg, RunReport& report) {
  const TimeSeries data = read_timeseries(cfg.data);
  const std::size_t m = cfg.pmmh_settings.replicates;
  std::vector<RngStream> streams;
  streams.reserve(m);
  for (std::size_t j = 0; j < m; ++j) streams.emplace_back(cfg.seed, j);
  const LikelihoodEstimate est = averaged_loglik(*cfg.model, data, cfg.pmmh_settings.filter,
                                                 streams, cfg.pmmh_settings.workers);
  const fs::path out = cfg.output_dir / "loglik.csv";
  {
    std::ostringstream os;
    os << "particles,replicates,log_likelihood\n"
       << est.n_particles << ',' << est.n_replicates << ',' << format_real(est.log_value) << '\n';
    std::ofstream f;
    fs::create_directories(cfg.output_dir);
    f.open(out, std::ios::binary | std::ios::trunc);
    f << os.str();
    if (!f) throw DataError(out.string() + ": write failed");
  }
  write_metadata(out, base_metadata(cfg));
  report.outputs.push_back(out);
}

void run_summarize(const RunConfig& cfg, RunReport& report, std::ostream& log) {
  ChainKind kind;
  const ChainTrace chain = read_chain(cfg.summarize.chain, &kind);
  const std::uint64_t burn_records = records_before(chain, cfg.summarize.burn_in);
  if (burn_records >= chain.size()) {
    throw ConfigError("summarize.burn_in = " + std::to_string(cfg.summarize.burn_in) +
                      " discards the whole chain");
  }
  RunMetadata meta = base_metadata(cfg);
  meta.extra["chain"] = cfg.summarize.chain.filename().string();
  const bool abc = kind == ChainKind::kAbc;
  const double delta_star = abc && cfg.summarize.delta_star > 0.0
                                ? cfg.summarize.delta_star
                                : std::numeric_limits<double>::infinity();
  std::uint64_t accepted = 0;
  for (std::size_t i = burn_records; i < chain.size(); ++i) accepted += chain[i].accepted;
  report.acceptance_rate =
      static_cast<double>(accepted) / static_cast<double>(chain.size() - burn_records);

  if (abc) {
    const fs::path diag_path = cfg.output_dir / "diagnostics.csv";
    write_diagnostics(delta_bins(chain, cfg.diagnostic_bins, burn_records), diag_path);
    write_metadata(diag_path, meta);
    report.outputs.push_back(diag_path);
  }
  const FilteredDraws draws = filter_chain(chain, delta_star, cfg.summarize.thin, burn_records);
  write_posterior_if_possible(draws, cfg.output_dir / "posterior.csv", meta, report, log);
}

}  // namespace

RunReport execute(const RunConfig& cfg, std::ostream& log) {
  const auto start = Clock::now();
  RunReport report;
  switch (cfg.mode) {
    case RunMode::kSimulate: run_simulate(cfg, report); break;
    case RunMode::kAbc: run_abc(cfg, report, log); break;
    case RunMode::kPmcmc: run_pmcmc(cfg, report, log); break;
    case RunMode::kFilter: run_filter(cfg, report); break;
    case RunMode::kSummarize: run_summarize(cfg, report, log); break;
  }
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  std::ostringstream os;
  os << to_string(cfg.mode) << ':';
  if (cfg.mode != RunMode::kSimulate && cfg.mode != RunMode::kFilter) {
    os << " acceptance " << percent(report.acceptance_rate) << ',';
  }
  os << " wall " << std::fixed << std::setprecision(2) << report.wall_seconds << " s, outputs:";
  for (const auto& p : report.outputs) os << ' ' << p.string();
  report.summary = os.str();
  return report;
}

int report_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DomainError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConvergenceError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const BracketError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

int run_command(const fs::path& config, const std::vector<std::string>& overrides,
                std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = load_config(config, overrides);
    const RunReport report = execute(cfg, err);
    out << report.summary << '\n';
    return kExitOk;
  } catch (...) {
    return report_exception(err);
  }
}

namespace {

struct Check {
  std::string name;
  bool pass;
  std::string detail;
};

Check check_thresholds() {
  const double one[] = {1.0};
  const double two[] = {1.0, 1.0};
  const double t1 = kernel_threshold(1, one);
  const double t2 = kernel_threshold(2, two);
  const bool ok = std::abs(t1 - 0.25) <= 1e-12 && std::abs(t2 - std::numbers::inv_pi) <= 1e-12;
  std::ostringstream os;
  os << "threshold(1,[1]) = " << format_real(t1) << ", threshold(2,I) = " << format_real(t2);
  return {"kernel thresholds", ok, os.str()};
}

Check check_volumes(RngStream& rng) {
  constexpr std::size_t kSamples = 200000;
  std::ostringstream os;
  bool ok = true;
  const std::vector<std::vector<double>> cases{{1.0}, {1.0, 1.0}, {1.0, 1.0, 1.0}, {100.0, 1.0, 0.25}};
  for (const auto& a : cases) {
    const double c = kernel_threshold(a.size(), a);
    double box = 1.0;
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      r[i] = std::sqrt(c / a[i]);
      box *= 2.0 * r[i];
    }
    std::size_t inside = 0;
    for (std::size_t s = 0; s < kSamples; ++s) {
      double q = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double w = r[i] * (2.0 * rng.uniform() - 1.0);
        q += a[i] * w * w;
      }
      inside += q < c;
    }
    const double p = static_cast<double>(inside) / kSamples;
    const double vol = p * box;
    const double se = box * std::sqrt(p * (1.0 - p) / kSamples);
    ok = ok && std::abs(vol - 1.0) <= 4.0 * se;
    os << "d=" << a.size() << " vol=" << std::setprecision(5) << vol << " ";
  }
  return {"kernel unit volume", ok, os.str()};
}

Check check_quantiles(RngStream& rng) {
  constexpr int kCases = 2000;
  double worst = 0.0;
  bool monotone = true;
  for (int k = 0; k < kCases; ++k) {
    MixtureParams psi;
    psi.alpha = 0.05 + 0.9 * rng.uniform();
    psi.mu1 = -5.0 + 10.0 * rng.uniform();
    psi.mu2 = psi.mu1 + 5.0 * rng.uniform();
    psi.sigma1 = 0.1 + 2.9 * rng.uniform();
    psi.sigma2 = 0.1 + 2.9 * rng.uniform();
    const double p = rng.uniform();
    worst = std::max(worst, std::abs(mixture_cdf(psi, mixture_quantile(psi, p)) - p));
    const double a = 6.0 * (2.0 * rng.uniform() - 1.0);
    const double b = a + 1e-3 + rng.uniform();
    monotone = monotone && tau(psi, a) < tau(psi, b);
  }
  std::ostringstream os;
  os << "max |F(Q(p)) - p| = " << format_real(worst) << (monotone ? "" : ", tau not monotone");
  return {"quantile round trip", worst <= 1e-10 && monotone, os.str()};
}

Check check_kalman(std::uint64_t seed) {
  constexpr std::size_t kReplicates = 30;
  const ModelParams params = linear_degenerate_params(0.05, 0.5, 0.5);
  RngStream data_rng(seed, 1000);
  const TimeSeries data =
      simulate_observed(params, TimeGrid::regular(1.0, 1.0, 100), 0.0, data_rng).z;
  const double exact = kalman_loglik(params, data, InitialLaw::kFixed, 0.0);
  FilterSettings fs;
  fs.particles = 200;
  fs.x0 = 0.0;
  std::vector<double> values;
  for (std::size_t j = 0; j < kReplicates; ++j) {
    RngStream rng(seed, 2000 + j);
    values.push_back(bootstrap_filter(params, data, fs, rng));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= kReplicates;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (kReplicates - 1) / kReplicates);
  std::ostringstream os;
  os << "kalman " << format_real(exact) << ", filter mean " << format_real(mean) << " (se "
     << std::setprecision(3) << se << ")";
  return {"particle filter vs kalman", std::abs(mean - exact) <= 3.0 * se, os.str()};
}

}  // namespace

int verify_command(std::ostream& out, std::uint64_t seed) {
  std::vector<Check> checks;
  try {
    RngStream rng(seed, 0);
    checks.push_back(check_thresholds());
    checks.push_back(check_volumes(rng));
    checks.push_back(check_quantiles(rng));
    checks.push_back(check_kalman(seed));
  } catch (...) {
    return report_exception(out);
  }
  bool all = true;
  for (const auto& c : checks) {
    out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    all = all && c.pass;
  }
  return all ? kExitOk : kExitNumerical;
}

}  // namespace sdeabc
