#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sdeabc/sde_model.hpp"

namespace sdeabc {

enum class SummaryRole { kData, kSimulated };

/// Which statistics make up S_n (data) and S_n' (simulated), plus the diagonal of
/// the kernel weight matrix A. Entries are ordered [acf block; percentile block].
class SummarySpec {
 public:
  SummarySpec() = default;
  /// Throws ConfigError on length mismatches, non-positive lags or weights, or
  /// percentile levels that are not strictly increasing inside (0, 1).
  SummarySpec(std::vector<std::size_t> acf_lags_data, std::vector<std::size_t> acf_lags_sim,
              std::vector<double> percentile_levels, std::vector<double> weights_diag);

  /// Lags given on the data grid, matched to a subsampled simulation grid with
  /// stride q. A data lag L becomes simulated lag round(L / q) (at least 1) and
  /// the data lag is reset to round(L / q) * q, so both sides measure the same
  /// time separation.
  static SummarySpec with_subsampling(const std::vector<std::size_t>& data_lags, std::size_t q,
                                      std::vector<double> percentile_levels,
                                      std::vector<double> weights_diag);

  const std::vector<std::size_t>& acf_lags(SummaryRole role) const {
    return role == SummaryRole::kData ? lags_data_ : lags_sim_;
  }
  const std::vector<std::size_t>& acf_lags_data() const noexcept { return lags_data_; }
  const std::vector<std::size_t>& acf_lags_sim() const noexcept { return lags_sim_; }
  const std::vector<double>& percentile_levels() const noexcept { return levels_; }
  const std::vector<double>& weights_diag() const noexcept { return weights_; }
  std::size_t dimension() const noexcept { return weights_.size(); }
  /// Common ratio data_lag / sim_lag (1 when no lags are used).
  std::size_t subsample_factor() const noexcept { return factor_; }

  /// Canonical text form; two specs with equal ids produce comparable vectors.
  const std::string& id() const noexcept { return id_; }

 private:
  std::vector<std::size_t> lags_data_;
  std::vector<std::size_t> lags_sim_;
  std::vector<double> levels_;
  std::vector<double> weights_;
  std::size_t factor_ = 1;
  std::string id_;
};

struct SummaryVector {
  std::vector<double> values;
  std::string spec_id;
};

/// Divisor-n sample autocorrelation r(k) for each lag. Throws DataError if the
/// series is shorter than max(lag) + 2 or has zero variance.
std::vector<double> autocorrelation(std::span<const double> values,
                                    std::span<const std::size_t> lags);
std::vector<double> autocorrelation(const TimeSeries& series, std::span<const std::size_t> lags);

/// Empirical percentiles by linear interpolation at 1-based rank (n - 1) p + 1.
std::vector<double> percentiles(std::span<const double> values, std::span<const double> levels);
std::vector<double> percentiles(const TimeSeries& series, std::span<const double> levels);

/// Percentile of already sorted values (same interpolation rule).
double sorted_percentile(std::span<const double> sorted, double level);

SummaryVector summarize(std::span<const double> values, const SummarySpec& spec,
                        SummaryRole role);
SummaryVector summarize(const TimeSeries& series, const SummarySpec& spec, SummaryRole role);

/// Right-hand side c of the uniform kernel w^T A w < c, chosen so the ellipsoid
/// has unit volume: c = pi^{-1} (Gamma(d/2) d/2)^{2/d} |A|^{1/d}.
double kernel_threshold(std::size_t d_s, std::span<const double> weights_diag);

/// Weighted quadratic form w^T A w with w = |s_sim - s_data| / delta.
double kernel_distance(const SummaryVector& s_sim, const SummaryVector& s_data, double delta,
                       std::span<const double> weights_diag);

/// 1 if the scaled discrepancy falls inside the unit-volume ellipsoid, else 0.
/// Throws ConfigError when the vectors do not conform to `spec`.
int kernel_accept(const SummaryVector& s_sim, const SummaryVector& s_data, double delta,
                  const SummarySpec& spec);

}  // namespace sdeabc
