#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sdeabc/abc_sampler.hpp"
#include "sdeabc/sde_model.hpp"

namespace sdeabc {

/// Provenance recorded next to every output file as `<file>.meta.json`.
struct RunMetadata {
  std::uint64_t seed = 0;
  std::string config_digest;
  std::map<std::string, std::string> extra;
};

std::string software_version();

/// Shortest-round-trip-safe text form of a double (17 significant digits).
std::string format_real(double v);

/// CSV with header `time,value`. Throws DataError naming the path and row.
TimeSeries read_timeseries(const std::filesystem::path& path);
void write_timeseries(const TimeSeries& series, const std::filesystem::path& path);

/// Writes `<path>.meta.json` with seed, config digest, version, RNG algorithm and extras.
void write_metadata(const std::filesystem::path& output, const RunMetadata& meta);
std::filesystem::path metadata_path(const std::filesystem::path& output);

/// Simulates n observations on t_i = t_start + i * spacing and writes the CSV
/// plus its metadata sidecar.
TimeSeries generate_dataset(const ModelParams& params, std::size_t n, double t_start,
                            double spacing, double x0, std::uint64_t seed,
                            const std::filesystem::path& path, const RunMetadata& meta);

enum class ChainKind { kAbc, kPmmh };

/// Header for a chain file: iter, the eight log-parameters, delta or
/// loglik_estimate, accepted, early_rejected.
std::vector<std::string> chain_columns(ChainKind kind);

/// Writes every `stride`-th record (stride 1 = all).
void write_chain(const ChainTrace& chain, ChainKind kind, const std::filesystem::path& path,
                 std::uint64_t stride = 1);
ChainTrace read_chain(const std::filesystem::path& path, ChainKind* kind = nullptr);

/// Delta-binned posterior means / SDs with per-bin tallies.
void write_diagnostics(const std::vector<DeltaBin>& bins, const std::filesystem::path& path);

void write_posterior(const std::vector<PosteriorSummary>& summary,
                     const std::filesystem::path& path);

void write_summary_vector(const SummaryVector& s, const SummarySpec& spec,
                          const std::filesystem::path& path);

}  // namespace sdeabc
