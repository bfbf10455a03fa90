#include "sdeabc/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sdeabc/errors.hpp"

namespace sdeabc {

SummarySpec::SummarySpec(std::vector<std::size_t> acf_lags_data,
                         std::vector<std::size_t> acf_lags_sim,
                         std::vector<double> percentile_levels, std::vector<double> weights_diag)
    : lags_data_(std::move(acf_lags_data)),
      lags_sim_(std::move(acf_lags_sim)),
      levels_(std::move(percentile_levels)),
      weights_(std::move(weights_diag)) {
  if (lags_data_.size() != lags_sim_.size()) {
    throw ConfigError("SummarySpec: data and simulated lag lists differ in length");
  }
  for (std::size_t i = 0; i < lags_data_.size(); ++i) {
    if (lags_data_[i] == 0 || lags_sim_[i] == 0) throw ConfigError("SummarySpec: lags must be positive");
    if (lags_data_[i] % lags_sim_[i] != 0) {
      throw ConfigError("SummarySpec: data lag " + std::to_string(lags_data_[i]) +
                        " is not a multiple of simulated lag " + std::to_string(lags_sim_[i]));
    }
    const std::size_t ratio = lags_data_[i] / lags_sim_[i];
    if (i == 0) {
      factor_ = ratio;
    } else if (ratio != factor_) {
      throw ConfigError("SummarySpec: data/simulated lag ratios differ across entries");
    }
  }
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (!(levels_[i] > 0.0 && levels_[i] < 1.0)) {
      throw ConfigError("SummarySpec: percentile levels must lie in (0, 1)");
    }
    if (i > 0 && !(levels_[i] > levels_[i - 1])) {
      throw ConfigError("SummarySpec: percentile levels must be strictly increasing");
    }
  }
  if (weights_.size() != lags_data_.size() + levels_.size()) {
    throw ConfigError("SummarySpec: expected " + std::to_string(lags_data_.size() + levels_.size()) +
                      " weights, got " + std::to_string(weights_.size()));
  }
  if (weights_.empty()) throw ConfigError("SummarySpec: no statistics selected");
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("SummarySpec: weights must be positive");
  }
  std::ostringstream os;
  os.precision(17);
  os << "acf[";
  for (std::size_t i = 0; i < lags_data_.size(); ++i) {
    os << (i ? "," : "") << lags_data_[i] << '/' << lags_sim_[i];
  }
  os << "];pct[";
  for (std::size_t i = 0; i < levels_.size(); ++i) os << (i ? "," : "") << levels_[i];
  os << "];A[";
  for (std::size_t i = 0; i < weights_.size(); ++i) os << (i ? "," : "") << weights_[i];
  os << ']';
  id_ = os.str();
}

SummarySpec SummarySpec::with_subsampling(const std::vector<std::size_t>& data_lags,
                                          std::size_t q, std::vector<double> percentile_levels,
                                          std::vector<double> weights_diag) {
  if (q == 0) throw ConfigError("SummarySpec: subsampling factor must be positive");
  std::vector<std::size_t> data;
  std::vector<std::size_t> sim;
  for (std::size_t lag : data_lags) {
    const auto sim_lag = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(lag) / static_cast<double>(q))));
    sim.push_back(sim_lag);
    data.push_back(sim_lag * q);
  }
  return SummarySpec(std::move(data), std::move(sim), std::move(percentile_levels),
                     std::move(weights_diag));
}

std::vector<double> autocorrelation(std::span<const double> values,
                                    std::span<const std::size_t> lags) {
  const std::size_t n = values.size();
  std::size_t max_lag = 0;
  for (std::size_t k : lags) max_lag = std::max(max_lag, k);
  if (n < max_lag + 2) {
    throw DataError("autocorrelation: series of length " + std::to_string(n) +
                    " too short for lag " + std::to_string(max_lag));
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double denom = 0.0;
  for (double v : values) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) throw DataError("autocorrelation: constant series");

  std::vector<double> out;
  out.reserve(lags.size());
  for (std::size_t k : lags) {
    double num = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) num += (values[i] - mean) * (values[i + k] - mean);
    out.push_back(num / denom);
  }
  return out;
}

std::vector<double> autocorrelation(const TimeSeries& series, std::span<const std::size_t> lags) {
  return autocorrelation(std::span<const double>(series.values()), lags);
}

double sorted_percentile(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw DataError("percentiles: empty series");
  const double h = static_cast<double>(sorted.size() - 1) * level;  // 0-based rank
  const double floor_h = std::floor(h);
  const auto lo = static_cast<std::size_t>(std::clamp(floor_h, 0.0, static_cast<double>(sorted.size() - 1)));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - floor_h;
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> percentiles(std::span<const double> values, std::span<const double> levels) {
  if (values.empty()) throw DataError("percentiles: empty series");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(levels.size());
  for (double p : levels) out.push_back(sorted_percentile(sorted, p));
  return out;
}

std::vector<double> percentiles(const TimeSeries& series, std::span<const double> levels) {
  return percentiles(std::span<const double>(series.values()), levels);
}

SummaryVector summarize(std::span<const double> values, const SummarySpec& spec,
                        SummaryRole role) {
  SummaryVector out;
  out.spec_id = spec.id();
  out.values = autocorrelation(values, spec.acf_lags(role));
  const auto pct = percentiles(values, spec.percentile_levels());
  out.values.insert(out.values.end(), pct.begin(), pct.end());
  return out;
}

SummaryVector summarize(const TimeSeries& series, const SummarySpec& spec, SummaryRole role) {
  return summarize(std::span<const double>(series.values()), spec, role);
}

double kernel_threshold(std::size_t d_s, std::span<const double> weights_diag) {
  const double d = static_cast<double>(d_s);
  // Work in logs: Gamma(d/2) overflows quickly for large d.
  double log_det = 0.0;
  for (double w : weights_diag) log_det += std::log(w);
  const double log_c = -std::log(std::numbers::pi) +
                       (2.0 / d) * (std::lgamma(0.5 * d) + std::log(0.5 * d)) + log_det / d;
  return std::exp(log_c);
}

double kernel_distance(const SummaryVector& s_sim, const SummaryVector& s_data, double delta,
                       std::span<const double> weights_diag) {
  double q = 0.0;
  for (std::size_t i = 0; i < weights_diag.size(); ++i) {
    const double w = std::abs(s_sim.values[i] - s_data.values[i]) / delta;
    q += weights_diag[i] * w * w;
  }
  return q;
}

int kernel_accept(const SummaryVector& s_sim, const SummaryVector& s_data, double delta,
                  const SummarySpec& spec) {
  const std::size_t d = spec.dimension();
  if (s_sim.values.size() != d || s_data.values.size() != d || s_sim.spec_id != spec.id() ||
      s_data.spec_id != spec.id()) {
    throw ConfigError("kernel_accept: summary vectors do not conform to the summary spec");
  }
  const double c = kernel_threshold(d, spec.weights_diag());
  return kernel_distance(s_sim, s_data, delta, spec.weights_diag()) < c ? 1 : 0;
}

}  // namespace sdeabc
