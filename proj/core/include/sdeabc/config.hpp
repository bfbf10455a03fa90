#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdeabc/abc_sampler.hpp"
#include "sdeabc/pmcmc.hpp"
#include "sdeabc/sde_model.hpp"
#include "sdeabc/summaries.hpp"

namespace sdeabc {

enum class RunMode { kSimulate, kAbc, kPmcmc, kFilter, kSummarize };

std::string to_string(RunMode mode);

struct GridConfig {
  std::size_t n = 0;
  double t_start = 1.0;
  double spacing = 1.0;
};

struct SummarizeConfig {
  std::filesystem::path chain;
  std::uint64_t burn_in = 0;  // in iterations
  std::uint64_t thin = 1;     // in records of the chain file
  /// Upper tolerance filter for ABC chains; ignored for PMCMC chains.
  double delta_star = 0.0;
};

/// Fully parsed and validated run configuration.
struct RunConfig {
  RunMode mode = RunMode::kSimulate;
  std::uint64_t seed = 0;
  std::uint64_t progress_every = 0;
  std::filesystem::path data;
  std::filesystem::path output_dir;

  std::optional<ModelParams> model;
  double x0 = 0.0;
  GridConfig grid;

  std::optional<SummarySpec> summaries;
  PriorSpec prior;

  AbcConfig abc;
  double delta_star = 0.0;
  std::size_t diagnostic_bins = 20;
  std::uint64_t chain_stride = 1;

  PmmhConfig pmmh;
  SdePmmhSettings pmmh_settings;
  std::uint64_t pmmh_burn_in = 0;
  std::uint64_t pmmh_thin = 1;

  SummarizeConfig summarize;

  /// SHA-256 of the effective key/value set after overrides.
  std::string digest;
};

/// Reads an INI-style file (`[section]` headers, `key = value` lines, `;` or `#`
/// comment lines), applies `section.key=value` overrides and validates every
/// field. Relative paths resolve against the config file's directory. Throws
/// ConfigError listing every violation at once.
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

/// Same as load_config for text already in memory; paths resolve against `base_dir`.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                       const std::filesystem::path& base_dir);

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string& bytes);

}  // namespace sdeabc
