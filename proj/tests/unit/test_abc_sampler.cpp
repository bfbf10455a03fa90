#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "../support/stats.hpp"
#include "sdeabc/abc_sampler.hpp"
#include "sdeabc/errors.hpp"
#include "sdeabc/numerics.hpp"

using namespace sdeabc;
using namespace sdeabc::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One parameter, theta ~ U(-5, 5); data summary = mean of 20 N(theta, 1) draws.
AbcProblem toy_problem(double observed_mean = 1.0) {
  AbcProblem p;
  p.prior.lo = {-5.0};
  p.prior.hi = {5.0};
  p.delta_rate = 0.2;
  p.spec = SummarySpec({}, {}, {0.5}, {1.0});
  p.data_summary = {{observed_mean}, p.spec.id()};
  const std::string id = p.spec.id();
  p.simulate = [id](std::span<const double> eta, RngStream& rng) -> std::optional<SummaryVector> {
    double s = 0.0;
    for (int i = 0; i < 20; ++i) s += eta[0] + rng.normal();
    return SummaryVector{{s / 20.0}, id};
  };
  return p;
}

// Kernel always passes: the simulator reproduces the observed summary.
AbcProblem flat_problem(std::size_t dim) {
  AbcProblem p;
  p.prior.lo.assign(dim, -1.0);
  p.prior.hi.assign(dim, 2.0);
  p.delta_rate = 0.2;
  p.spec = SummarySpec({}, {}, {0.5}, {1.0});
  p.data_summary = {{0.0}, p.spec.id()};
  const SummaryVector s = p.data_summary;
  p.simulate = [s](std::span<const double>, RngStream&) -> std::optional<SummaryVector> { return s; };
  return p;
}

AbcConfig base_config(std::uint64_t iterations) {
  AbcConfig c;
  c.iterations = iterations;
  c.delta_start = 0.5;
  c.delta_max = 0.8;
  c.delta_minmax = 0.47;
  c.update_period = 3000;
  c.thin = 1;
  return c;
}

}  // namespace

TEST(BoxPrior, ContainsDrawValidate) {
  BoxPrior b{{0.0, -1.0}, {1.0, 1.0}};
  EXPECT_TRUE(b.contains(std::vector<double>{0.5, 0.0}));
  EXPECT_FALSE(b.contains(std::vector<double>{1.5, 0.0}));
  RngStream rng(61);
  for (int i = 0; i < 1000; ++i) ASSERT_TRUE(b.contains(b.draw(rng)));
  std::vector<std::string> errors;
  b.validate(errors);
  EXPECT_TRUE(errors.empty());
  BoxPrior bad{{0.0, 2.0}, {1.0, 1.0}};
  bad.validate(errors);
  EXPECT_EQ(errors.size(), 1u);
  const PriorSpec sim = PriorSpec::simulation_study();
  EXPECT_EQ(sim.eta.lo[0], -7.0);
  EXPECT_EQ(sim.eta.hi[7], -0.05);
  EXPECT_EQ(sim.delta_rate, 0.2);
}

TEST(AbcConfig, ValidationNamesKeys) {
  AbcConfig c = base_config(10);
  c.delta_minmax = 0.9;
  c.delta_start = 1.0;
  c.update_percentile = 100.0;
  const auto errors = c.validate();
  ASSERT_EQ(errors.size(), 3u);
  EXPECT_NE(errors[0].find("delta_minmax"), std::string::npos);
  EXPECT_NE(errors[0].find("delta_max"), std::string::npos);
}

TEST(ProposeLogDelta, SupportAndNormalizers) {
  RngStream rng(62);
  const double max = std::log(0.8);
  for (int i = 0; i < 10000; ++i) {
    const LogDeltaProposal p = propose_logdelta(max, max, 0.2, rng);
    ASSERT_LE(p.value, max);
  }
  // Effectively untruncated: forward and reverse densities agree.
  const LogDeltaProposal far = propose_logdelta(0.0, 1e6, 0.2, rng);
  EXPECT_NEAR(far.log_forward, far.log_reverse, 1e-12);
  // Centre one step below the bound: normalizer Phi(1).
  const double s = std::sqrt(0.2);
  const double center = max - s;
  const double to = center - 0.1;
  const double expected = std_normal_log_pdf(-0.1 / s) - std::log(s) - std::log(0.8413447460685429);
  EXPECT_NEAR(logdelta_log_density(center, to, max, 0.2), expected, 1e-14);
  EXPECT_EQ(logdelta_log_density(center, max + 0.01, max, 0.2), -kInf);
}

TEST(ProposeLogDelta, SamplesTruncatedNormal) {
  RngStream rng(63);
  const double s = std::sqrt(0.2);
  const double center = 0.0, max = 0.3;
  std::vector<double> draws(20000);
  for (double& v : draws) v = propose_logdelta(center, max, 0.2, rng).value;
  const double z_max = std_normal_cdf((max - center) / s);
  const double d = ks_statistic(draws, [&](double x) { return std_normal_cdf((x - center) / s) / z_max; });
  EXPECT_LT(d, ks_critical_1pct(draws.size()));
}

TEST(EarlyRejectRatio, Examples) {
  const BoxPrior box{{0.0}, {1.0}};
  LogDeltaProposal untruncated{std::log(0.5), 0.0, 0.0};
  const std::vector<double> in{0.5}, out{1.5};
  EXPECT_EQ(early_reject_ratio(out, 0.5, in, 0.5, box, 0.2, untruncated), 0.0);
  EXPECT_NEAR(early_reject_ratio(in, 0.5, in, 0.5, box, 0.2, untruncated), 1.0, 1e-15);
  LogDeltaProposal step{std::log(0.4), 0.0, 0.0};
  EXPECT_NEAR(early_reject_ratio(in, 0.4, in, 0.5, box, 0.2, step), 0.8161610720214046, 1e-12);
  // Normalizer ratio enters multiplicatively.
  LogDeltaProposal trunc{std::log(0.4), -0.1, -0.3};
  EXPECT_NEAR(early_reject_ratio(in, 0.4, in, 0.5, box, 0.2, trunc),
              0.8161610720214046 * std::exp(-0.2), 1e-12);
}

TEST(EarlyRejectRatio, JacobianMatchesChangeOfVariables) {
  // Density of delta = e^L when L has density h: h(log d) / d. The ratio of the
  // Exp prior in log-delta coordinates is exp(-rate (d' - d)) d' / d.
  const double rate = 0.2, d = 0.5, dp = 0.4;
  auto log_density_logscale = [&](double delta) { return std::log(rate) - rate * delta + std::log(delta); };
  const BoxPrior box{{0.0}, {1.0}};
  const std::vector<double> eta{0.5};
  LogDeltaProposal step{std::log(dp), 0.0, 0.0};
  EXPECT_NEAR(early_reject_ratio(eta, dp, eta, d, box, rate, step),
              std::exp(log_density_logscale(dp) - log_density_logscale(d)), 1e-14);
}

TEST(UpdateDeltaMax, Examples) {
  const std::vector<double> high(3000, 0.6), low(3000, 0.3);
  EXPECT_EQ(update_delta_max(high, 99, 0.47), 0.6);
  EXPECT_EQ(update_delta_max(low, 99, 0.47), 0.47);
  RngStream rng(64);
  std::vector<double> u(3000);
  for (double& v : u) v = rng.uniform();
  EXPECT_NEAR(update_delta_max(u, 99, 0.01), 0.99, 0.01);
}

TEST(AbcRejection, HugeDeltaSamplesPrior) {
  const AbcProblem p = toy_problem();
  RngStream rng(65);
  const RejectionResult r = abc_rejection(p, 1e6, 1000, 1000000, rng);
  ASSERT_EQ(r.draws.size(), 1000u);
  EXPECT_FALSE(r.truncated);
  EXPECT_EQ(r.simulations, 1000u);
  const double d = ks_statistic(column(r.draws, 0), [](double x) { return (x + 5.0) / 10.0; });
  EXPECT_LT(d, ks_critical_1pct(1000));
}

TEST(AbcRejection, SmallDeltaConcentratesNearTruth) {
  const AbcProblem p = toy_problem(1.0);
  RngStream rng(66);
  const RejectionResult r = abc_rejection(p, 0.05, 300, 10000000, rng);
  ASSERT_EQ(r.draws.size(), 300u);
  const auto x = column(r.draws, 0);
  // Posterior approx N(1, 1/20).
  EXPECT_NEAR(mean(x), 1.0, 4.0 * std::sqrt(0.05 / 300.0) + 0.01);
  EXPECT_LT(variance(x), 0.1);
}

TEST(AbcRejection, CapTruncates) {
  const AbcProblem p = toy_problem(1.0);
  RngStream rng(67);
  const RejectionResult r = abc_rejection(p, 1e-9, 10, 500, rng);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.simulations, 500u);
  EXPECT_LT(r.draws.size(), 10u);
}

TEST(AbcMcmc, SupportInvariantsAndTallies) {
  const AbcProblem p = toy_problem(1.0);
  AbcConfig cfg = base_config(30000);
  RngStream rng(68);
  const AbcRunResult res = abc_mcmc(p, cfg, rng);
  ASSERT_EQ(res.chain.size(), cfg.iterations);
  const auto& t = res.tallies;
  EXPECT_EQ(t.iterations, cfg.iterations);
  EXPECT_EQ(t.early_rejected + t.simulated, t.iterations);
  EXPECT_EQ(t.kernel_rejected + t.ratio_rejected + t.accepted, t.simulated);
  EXPECT_GT(t.early_rejected, 0u);
  EXPECT_GT(t.accepted, 0u);

  std::size_t u = 0;
  double current_max = cfg.delta_max;
  double previous_max = cfg.delta_max;
  std::uint64_t accepted = 0;
  for (std::size_t i = 0; i < res.chain.size(); ++i) {
    const ChainRecord rec = res.chain[i];
    ASSERT_EQ(rec.iteration, i + 1);
    while (u < res.delta_max_updates.size() && res.delta_max_updates[u].iteration < rec.iteration) {
      current_max = res.delta_max_updates[u].value;
      ASSERT_LE(current_max, previous_max);
      ASSERT_GE(current_max, cfg.delta_minmax);
      previous_max = current_max;
      ++u;
    }
    ASSERT_LE(rec.aux, current_max);
    ASSERT_TRUE(p.prior.contains(rec.log_eta));
    ASSERT_FALSE(rec.accepted && rec.early_rejected);
    accepted += rec.accepted;
  }
  EXPECT_EQ(accepted, t.accepted);
  EXPECT_EQ(res.final_delta_max, current_max);
}

TEST(AbcMcmc, Reproducible) {
  const AbcProblem p = toy_problem(1.0);
  const AbcConfig cfg = base_config(5000);
  RngStream a(69), b(69);
  const AbcRunResult ra = abc_mcmc(p, cfg, a);
  const AbcRunResult rb = abc_mcmc(p, cfg, b);
  ASSERT_EQ(ra.chain.size(), rb.chain.size());
  for (std::size_t i = 0; i < ra.chain.size(); ++i) {
    ASSERT_EQ(ra.chain[i].aux, rb.chain[i].aux);
    ASSERT_EQ(ra.chain[i].log_eta[0], rb.chain[i].log_eta[0]);
    ASSERT_EQ(ra.chain[i].accepted, rb.chain[i].accepted);
  }
}

TEST(AbcMcmc, DetailedBalanceWithKernelForcedOn) {
  // Kernel always passes, delta_max fixed: target is U(box) x Exp(rate) on (0, delta_max].
  const AbcProblem p = flat_problem(2);
  AbcConfig cfg = base_config(400000);
  cfg.delta_start = 1.0;
  cfg.delta_max = 4.0;
  cfg.delta_minmax = 0.1;
  cfg.update_period = 0;
  cfg.adapt.enabled = false;
  cfg.adapt.initial_sd = {1.0, 1.0};
  RngStream rng(70);
  const AbcRunResult res = abc_mcmc(p, cfg, rng);
  const FilteredDraws draws = filter_chain(res.chain, kInf, 200, 10000);
  std::vector<double> deltas;
  for (std::size_t i = 10000; i < res.chain.size(); i += 200) deltas.push_back(res.chain[i].aux);
  const double norm = 1.0 - std::exp(-0.2 * 4.0);
  EXPECT_LT(ks_statistic(deltas, [&](double d) { return (1.0 - std::exp(-0.2 * d)) / norm; }),
            ks_critical_1pct(deltas.size()));
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_LT(ks_statistic(column(draws.draws, j), [](double x) { return (x + 1.0) / 3.0; }),
              ks_critical_1pct(draws.draws.size()))
        << j;
  }
}

TEST(AbcMcmc, HugeDeltaRunSamplesPrior) {
  const AbcProblem p = toy_problem(1.0);
  AbcConfig cfg = base_config(200000);
  cfg.delta_start = 1e5;
  cfg.delta_max = 1e6;
  cfg.delta_minmax = 1e5;
  cfg.update_period = 0;
  // delta has its own Exp prior and would drift down to O(1); pin it near 1e5.
  cfg.logdelta_step_var = 1e-12;
  cfg.adapt.enabled = false;
  cfg.adapt.initial_sd = {3.0};
  RngStream rng(71);
  const AbcRunResult res = abc_mcmc(p, cfg, rng);
  // Every simulated proposal passes the kernel.
  EXPECT_EQ(res.tallies.kernel_rejected, 0u);
  const FilteredDraws draws = filter_chain(res.chain, kInf, 100, 1000);
  EXPECT_LT(ks_statistic(column(draws.draws, 0), [](double x) { return (x + 5.0) / 10.0; }),
            ks_critical_1pct(draws.draws.size()));
}

TEST(FilterChain, Examples) {
  ChainTrace chain(1);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const double v = static_cast<double>(i);
    chain.push(i + 1, std::vector<double>{v}, 0.1 + 0.01 * v, i % 3 == 0, false);
  }
  const FilteredDraws all = filter_chain(chain, kInf, 1, 0);
  EXPECT_EQ(all.draws.size(), 100u);
  EXPECT_FALSE(all.empty_warning);
  const FilteredDraws thinned = filter_chain(chain, kInf, 10, 20);
  ASSERT_EQ(thinned.draws.size(), 8u);
  EXPECT_EQ(thinned.draws[0][0], 20.0);
  EXPECT_EQ(thinned.draws[1][0], 30.0);
  const FilteredDraws filtered = filter_chain(chain, 0.5, 1, 0);
  EXPECT_EQ(filtered.draws.size(), 41u);
  const FilteredDraws none = filter_chain(chain, 0.05, 1, 0);
  EXPECT_TRUE(none.empty_warning);
  EXPECT_TRUE(none.draws.empty());
}

TEST(FilterChain, BurnInMustCoverAnnealing) {
  AbcRunResult run;
  run.chain = ChainTrace(1);
  for (std::uint64_t i = 0; i < 10; ++i) run.chain.push(i + 1, std::vector<double>{0.0}, 0.1, false, false);
  run.last_delta_max_change = 6;
  EXPECT_THROW(filter_abc_run(run, 1.0, 1, 5), ConfigError);
  EXPECT_EQ(filter_abc_run(run, 1.0, 1, 6).draws.size(), 4u);
}

TEST(PosteriorSummary, Examples) {
  const std::vector<std::vector<double>> constant(100, std::vector<double>{2.5, -1.0});
  const auto c = posterior_summary(constant);
  EXPECT_EQ(c[0].mean, 2.5);
  EXPECT_EQ(c[0].lower, 2.5);
  EXPECT_EQ(c[0].upper, 2.5);
  EXPECT_EQ(c[1].mean, -1.0);
  EXPECT_THROW(posterior_summary(std::vector<std::vector<double>>(99, std::vector<double>{1.0})), DataError);
  RngStream rng(72);
  std::vector<std::vector<double>> normals(1000000, std::vector<double>(1));
  for (auto& r : normals) r[0] = rng.normal();
  const auto n = posterior_summary(normals);
  EXPECT_NEAR(n[0].mean, 0.0, 0.004);
  EXPECT_NEAR(n[0].lower, -1.959963984540054, 0.01);
  EXPECT_NEAR(n[0].upper, 1.959963984540054, 0.01);
}

TEST(DeltaBins, ConstantDeltaSingleBinAndMonotoneCentres) {
  ChainTrace flat(2);
  for (std::uint64_t i = 0; i < 50; ++i) flat.push(i + 1, std::vector<double>{1.0, 2.0}, 0.3, i % 2 == 0, i % 2 == 1);
  const auto one = delta_bins(flat, 20);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].count, 50u);
  EXPECT_EQ(one[0].accepted, 25u);
  EXPECT_EQ(one[0].early_rejected, 25u);
  EXPECT_EQ(one[0].mean[1], 2.0);
  EXPECT_EQ(one[0].sd[0], 0.0);

  ChainTrace ramp(1);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    ramp.push(i + 1, std::vector<double>{static_cast<double>(i)}, 0.2 + 0.0005 * i, false, false);
  }
  const auto bins = delta_bins(ramp, 10);
  ASSERT_EQ(bins.size(), 10u);
  std::uint64_t total = 0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    total += bins[b].count;
    if (b) {
      ASSERT_GT(bins[b].center, bins[b - 1].center);
      ASSERT_GT(bins[b].mean[0], bins[b - 1].mean[0]);
    }
  }
  EXPECT_EQ(total, 1000u);
}
