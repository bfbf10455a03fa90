#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "sdeabc/config.hpp"
#include "sdeabc/errors.hpp"
#include "sdeabc/io.hpp"
#include "sdeabc/run.hpp"

namespace fs = std::filesystem;
using namespace sdeabc;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("sdeabc_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

const std::string kSimulate =
    "[run]\nmode = simulate\nseed = 355\noutput_dir = out\n"
    "[model]\npreset = simulation_study\nx0 = -2.45\n"
    "[grid]\nn = 355\nt_start = 1\nspacing = 70\n";

const std::string kAbcBase =
    "[run]\nmode = abc\nseed = 7\ndata = data.csv\noutput_dir = abc\n"
    "[model]\nx0 = -2.45\n"
    "[summaries]\nacf_lags = 2, 5, 10, 15\n"
    "percentile_levels = 0.15, 0.30, 0.45, 0.60, 0.75, 0.90\n"
    "weights = 100, 100, 100, 100, 1, 1, 1, 1, 1, 1\n"
    "[abc]\niterations = 3000\nupdate_period = 1000\nburn_in = 2000\ndelta_star = 5\n"
    "start_pilot_draws = 50\n";

std::string expected_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(TimeseriesIo, RoundTripIsBitExact) {
  TempDir dir;
  std::mt19937_64 eng(1);
  std::normal_distribution<double> nd;
  std::vector<double> t, v;
  double now = 0.0;
  for (int i = 0; i < 100; ++i) {
    now += std::exp(nd(eng));
    t.push_back(now);
    v.push_back(nd(eng) * 1e3);
  }
  const TimeSeries s(TimeGrid(t), v);
  write_timeseries(s, dir / "s.csv");
  const TimeSeries r = read_timeseries(dir / "s.csv");
  EXPECT_EQ(r.times(), s.times());
  EXPECT_EQ(r.values(), s.values());
  EXPECT_EQ(lines(slurp(dir / "s.csv")).front(), "time,value");
}

TEST(TimeseriesIo, ShuffledTimesNameRow) {
  TempDir dir;
  write_text(dir / "bad.csv", "time,value\n1,0.5\n3,0.1\n2,0.2\n4,0.0\n");
  const std::string msg = expected_error([&] { read_timeseries(dir / "bad.csv"); });
  EXPECT_NE(msg.find("row 4"), std::string::npos) << msg;
  EXPECT_NE(msg.find("increasing"), std::string::npos) << msg;
  EXPECT_THROW(read_timeseries(dir / "bad.csv"), DataError);
}

TEST(TimeseriesIo, SchemaErrors) {
  TempDir dir;
  write_text(dir / "empty.csv", "");
  EXPECT_THROW(read_timeseries(dir / "empty.csv"), DataError);
  write_text(dir / "header.csv", "t,z\n1,2\n");
  EXPECT_THROW(read_timeseries(dir / "header.csv"), DataError);
  write_text(dir / "cell.csv", "time,value\n1,abc\n");
  const std::string msg = expected_error([&] { read_timeseries(dir / "cell.csv"); });
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  write_text(dir / "cols.csv", "time,value\n1,2,3\n");
  EXPECT_THROW(read_timeseries(dir / "cols.csv"), DataError);
  EXPECT_THROW(read_timeseries(dir / "missing.csv"), DataError);
}

TEST(TimeseriesIo, FormatRealRoundTrips) {
  std::mt19937_64 eng(2);
  for (int i = 0; i < 10000; ++i) {
    const double x = std::ldexp(static_cast<double>(eng() >> 11), static_cast<int>(eng() % 200) - 150);
    EXPECT_EQ(std::stod(format_real(x)), x);
  }
}

TEST(GenerateDataset, GridAndMetadata) {
  TempDir dir;
  RunMetadata meta{42, "abc123", {}};
  const TimeSeries s = generate_dataset(ModelParams::simulation_study_truth(), 355, 1.0, 70.0, -2.45,
                                        42, dir / "d.csv", meta);
  ASSERT_EQ(s.size(), 355u);
  EXPECT_EQ(s.times().back(), 24781.0);
  const TimeSeries r = read_timeseries(dir / "d.csv");
  EXPECT_EQ(r.values(), s.values());
  const auto j = nlohmann::json::parse(slurp(metadata_path(dir / "d.csv")));
  EXPECT_EQ(j["seed"], 42);
  EXPECT_EQ(j["config_digest"], "abc123");
  EXPECT_EQ(j["version"], software_version());
  EXPECT_TRUE(j["extra"].contains("log_theta"));

  const TimeSeries two = generate_dataset(ModelParams::simulation_study_truth(), 2, 0.0, 1.0, 0.0, 1,
                                          dir / "two.csv", meta);
  EXPECT_EQ(lines(slurp(dir / "two.csv")).size(), 3u);
  EXPECT_THROW(generate_dataset(ModelParams::simulation_study_truth(), 1, 0.0, 1.0, 0.0, 1,
                                dir / "one.csv", meta),
               ConfigError);
  EXPECT_THROW(generate_dataset(ModelParams::simulation_study_truth(), 5, 0.0, 0.0, 0.0, 1,
                                dir / "flat.csv", meta),
               ConfigError);
}

TEST(ChainIo, ThreeRecordsColumnOrder) {
  TempDir dir;
  ChainTrace chain;
  std::vector<double> eta(kNumParams);
  for (std::uint64_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < kNumParams; ++j) eta[j] = 0.1 * static_cast<double>(i + j);
    chain.push(i, eta, 0.5 + static_cast<double>(i), i == 1, i == 2);
  }
  write_chain(chain, ChainKind::kAbc, dir / "c.csv");
  const auto rows = lines(slurp(dir / "c.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0],
            "iter,log_theta,log_kappa,log_gamma,log_mu1,log_mu2,log_sigma1,log_sigma2,log_alpha,"
            "delta,accepted,early_rejected");
  ChainKind kind = ChainKind::kPmmh;
  const ChainTrace back = read_chain(dir / "c.csv", &kind);
  EXPECT_EQ(kind, ChainKind::kAbc);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].iteration, chain[i].iteration);
    EXPECT_EQ(back[i].aux, chain[i].aux);
    EXPECT_EQ(back[i].accepted, chain[i].accepted);
    EXPECT_EQ(back[i].early_rejected, chain[i].early_rejected);
    for (std::size_t j = 0; j < kNumParams; ++j) EXPECT_EQ(back[i].log_eta[j], chain[i].log_eta[j]);
  }
  write_chain(chain, ChainKind::kPmmh, dir / "p.csv", 2);
  const auto prow = lines(slurp(dir / "p.csv"));
  ASSERT_EQ(prow.size(), 3u);
  EXPECT_NE(prow[0].find(",loglik_estimate,"), std::string::npos);

  EXPECT_THROW(write_chain(ChainTrace{}, ChainKind::kAbc, dir / "e.csv"), DataError);
}

TEST(DiagnosticsIo, ConstantDeltaSingleBinAndMonotoneCenters) {
  TempDir dir;
  ChainTrace flat;
  std::vector<double> eta(kNumParams, 0.0);
  for (std::uint64_t i = 0; i < 50; ++i) flat.push(i, eta, 0.4, false, false);
  const auto one = delta_bins(flat, 20);
  EXPECT_EQ(one.size(), 1u);
  write_diagnostics(one, dir / "d1.csv");
  EXPECT_EQ(lines(slurp(dir / "d1.csv")).size(), 2u);

  ChainTrace spread;
  std::mt19937_64 eng(3);
  std::exponential_distribution<double> ex(2.0);
  for (std::uint64_t i = 0; i < 2000; ++i) spread.push(i, eta, ex(eng), i % 3 == 0, i % 5 == 0);
  const auto bins = delta_bins(spread, 15);
  write_diagnostics(bins, dir / "d.csv");
  const auto rows = lines(slurp(dir / "d.csv"));
  EXPECT_EQ(rows[0].rfind("delta_center,delta_lower,delta_upper,count,accepted,early_rejected,mean_log_theta", 0), 0u);
  EXPECT_EQ(rows.size(), bins.size() + 1);
  for (std::size_t b = 1; b < bins.size(); ++b) EXPECT_GT(bins[b].center, bins[b - 1].center);
}

TEST(Config, DigestSha256Reference) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, SimulateParsesAndOverridesChangeDigest) {
  const RunConfig a = parse_config(kSimulate, {}, "/base");
  EXPECT_EQ(a.mode, RunMode::kSimulate);
  EXPECT_EQ(a.seed, 355u);
  EXPECT_EQ(a.grid.n, 355u);
  EXPECT_EQ(a.output_dir, fs::path("/base/out"));
  ASSERT_TRUE(a.model.has_value());
  EXPECT_EQ(a.model->log_values(), ModelParams::simulation_study_truth().log_values());

  const RunConfig b = parse_config(kSimulate, {"run.seed=356", "grid.n=10"}, "/base");
  EXPECT_EQ(b.seed, 356u);
  EXPECT_EQ(b.grid.n, 10u);
  EXPECT_NE(a.digest, b.digest);
  EXPECT_EQ(a.digest, parse_config(kSimulate, {}, "/elsewhere").digest);
  // Reordering or commenting the file does not change the effective settings.
  EXPECT_EQ(a.digest, parse_config("; comment\n" + kSimulate, {}, "/base").digest);
}

TEST(Config, DeltaOrderingErrorNamesBothKeys) {
  const std::string msg = expected_error(
      [] { parse_config(kAbcBase + "delta_max = 0.5\ndelta_minmax = 0.6\n", {}, "/b"); });
  EXPECT_NE(msg.find("abc.delta_minmax"), std::string::npos) << msg;
  EXPECT_NE(msg.find("abc.delta_max"), std::string::npos) << msg;
}

TEST(Config, AllErrorsReportedAtOnce) {
  const std::string text =
      "[run]\nmode = abc\ndata = d.csv\n"
      "[abc]\niterations = 0\ndelta_start = -1\n";
  const std::string msg = expected_error([&] { parse_config(text, {}, "/b"); });
  for (const char* key : {"run.seed", "summaries.acf_lags", "abc.iterations", "abc.delta_start",
                          "abc.delta_star"}) {
    EXPECT_NE(msg.find(key), std::string::npos) << key << " missing from: " << msg;
  }
}

TEST(Config, UnknownModeAndKeysRejected) {
  EXPECT_THROW(parse_config("[run]\nmode = fly\nseed = 1\n", {}, "/b"), ConfigError);
  const std::string msg =
      expected_error([] { parse_config(kSimulate + "[abc]\ndelta_maxx = 1\n", {}, "/b"); });
  EXPECT_NE(msg.find("abc.delta_maxx"), std::string::npos) << msg;
  EXPECT_THROW(parse_config(kSimulate, {"grid.n"}, "/b"), ConfigError);
  EXPECT_THROW(parse_config(kSimulate, {"grid.bogus=1"}, "/b"), ConfigError);
  EXPECT_THROW(parse_config(kSimulate, {"grid.n=abc"}, "/b"), ConfigError);
}

TEST(Config, ModeRequirements) {
  EXPECT_THROW(parse_config("[run]\nmode = filter\nseed = 1\n", {}, "/b"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nmode = summarize\nseed = 1\n", {}, "/b"), ConfigError);
  const RunConfig abc = parse_config(kAbcBase, {}, "/b");
  ASSERT_TRUE(abc.summaries.has_value());
  EXPECT_EQ(abc.summaries->dimension(), 10u);
  EXPECT_EQ(abc.data, fs::path("/b/data.csv"));
  EXPECT_DOUBLE_EQ(abc.abc.x0, -2.45);
}

TEST(RunCommand, UnknownModeIsConfigExit) {
  TempDir dir;
  write_text(dir / "c.ini", "[run]\nmode = teleport\nseed = 1\n");
  std::ostringstream out, err;
  EXPECT_EQ(run_command(dir / "c.ini", {}, out, err), kExitConfig);
  EXPECT_NE(err.str().find("run.mode"), std::string::npos) << err.str();
  EXPECT_EQ(run_command(dir / "missing.ini", {}, out, err), kExitConfig);
}

TEST(RunCommand, SimulateWritesDatasetAndReplaysByteIdentically) {
  TempDir dir;
  write_text(dir / "sim.ini", kSimulate);
  std::ostringstream out, err;
  ASSERT_EQ(run_command(dir / "sim.ini", {}, out, err), kExitOk) << err.str();
  const fs::path data = dir / "out/data.csv";
  ASSERT_TRUE(fs::exists(data));
  ASSERT_TRUE(fs::exists(metadata_path(data)));
  EXPECT_NE(out.str().find("data.csv"), std::string::npos);
  EXPECT_EQ(read_timeseries(data).times().back(), 24781.0);

  const std::string first = slurp(data);
  auto meta_first = nlohmann::json::parse(slurp(metadata_path(data)));
  EXPECT_EQ(meta_first["seed"], 355);
  EXPECT_EQ(meta_first["config_digest"], load_config(dir / "sim.ini").digest);
  ASSERT_EQ(run_command(dir / "sim.ini", {}, out, err), kExitOk);
  auto meta_second = nlohmann::json::parse(slurp(metadata_path(data)));
  EXPECT_EQ(slurp(data), first);
  meta_first.erase("created_utc");
  meta_second.erase("created_utc");
  EXPECT_EQ(meta_first, meta_second);

  ASSERT_EQ(run_command(dir / "sim.ini", {"run.seed=1"}, out, err), kExitOk);
  EXPECT_NE(slurp(data), first);
}

TEST(RunCommand, BadDataIsDataExit) {
  TempDir dir;
  write_text(dir / "data.csv", "time,value\n2,1\n1,1\n");
  write_text(dir / "abc.ini", kAbcBase);
  std::ostringstream out, err;
  EXPECT_EQ(run_command(dir / "abc.ini", {}, out, err), kExitData);
  EXPECT_NE(err.str().find("row 3"), std::string::npos) << err.str();
}

TEST(RunCommand, AbcFilterPmcmcSummarizePipeline) {
  TempDir dir;
  write_text(dir / "sim.ini", kSimulate);
  std::ostringstream out, err;
  ASSERT_EQ(run_command(dir / "sim.ini", {"grid.n=60", "run.output_dir=."}, out, err), kExitOk);

  write_text(dir / "abc.ini", kAbcBase);
  ASSERT_EQ(run_command(dir / "abc.ini", {}, out, err), kExitOk) << err.str();
  for (const char* f : {"abc/chain.csv", "abc/diagnostics.csv", "abc/data_summary.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_TRUE(fs::exists(metadata_path(dir / f))) << f;
  }
  EXPECT_EQ(read_chain(dir / "abc/chain.csv").size(), 3000u);
  EXPECT_NE(out.str().find("acceptance"), std::string::npos);

  // A burn-in shorter than the annealing phase is refused after the chain is stored.
  std::ostringstream out2, err2;
  EXPECT_EQ(run_command(dir / "abc.ini", {"abc.burn_in=0", "run.output_dir=abc0"}, out2, err2),
            kExitConfig);
  EXPECT_TRUE(fs::exists(dir / "abc0/chain.csv"));

  write_text(dir / "filter.ini",
             "[run]\nmode = filter\nseed = 3\ndata = data.csv\noutput_dir = filter\n"
             "[model]\npreset = simulation_study\nx0 = -2.45\n"
             "[filter]\nparticles = 50\nreplicates = 3\n");
  ASSERT_EQ(run_command(dir / "filter.ini", {}, out, err), kExitOk) << err.str();
  const auto ll = lines(slurp(dir / "filter/loglik.csv"));
  ASSERT_EQ(ll.size(), 2u);
  EXPECT_EQ(ll[0], "particles,replicates,log_likelihood");

  write_text(dir / "pmcmc.ini",
             "[run]\nmode = pmcmc\nseed = 5\ndata = data.csv\noutput_dir = pm\n"
             "[model]\nx0 = -2.45\n"
             "[filter]\nparticles = 20\nreplicates = 1\n"
             "[pmcmc]\niterations = 300\nburn_in = 100\nthin = 1\n");
  ASSERT_EQ(run_command(dir / "pmcmc.ini", {}, out, err), kExitOk) << err.str();
  ChainKind kind = ChainKind::kAbc;
  EXPECT_EQ(read_chain(dir / "pm/chain.csv", &kind).size(), 300u);
  EXPECT_EQ(kind, ChainKind::kPmmh);
  EXPECT_TRUE(fs::exists(dir / "pm/posterior.csv"));

  write_text(dir / "sum.ini",
             "[run]\nmode = summarize\nseed = 0\noutput_dir = sum\n"
             "[summarize]\nchain = abc/chain.csv\nburn_in = 2000\ndelta_star = 1e9\n");
  ASSERT_EQ(run_command(dir / "sum.ini", {}, out, err), kExitOk) << err.str();
  const auto post = lines(slurp(dir / "sum/posterior.csv"));
  ASSERT_EQ(post.size(), kNumParams + 1);
  EXPECT_EQ(post[0], "parameter,mean,q025,q975");
  EXPECT_EQ(post[1].rfind("log_theta,", 0), 0u);
}

TEST(Verify, AllChecksPass) {
  std::ostringstream out;
  EXPECT_EQ(verify_command(out, 1), kExitOk) << out.str();
  EXPECT_EQ(out.str().find("FAIL"), std::string::npos) << out.str();
}
