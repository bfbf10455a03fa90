#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sdeabc/rng.hpp"

namespace sdeabc {

struct AdaptSettings {
  /// Proposal standard deviations used until adaptation starts (one per component).
  std::vector<double> initial_sd;
  /// Number of chain states observed before the empirical covariance is used.
  std::uint64_t start = 1000;
  /// Regularizer added to the empirical covariance.
  double epsilon = 1e-8;
  /// Scale on the empirical covariance; <= 0 selects 2.38^2 / d.
  double scale = 0.0;
  /// Turn adaptation off entirely (fixed diagonal proposal).
  bool enabled = true;
};

/// Gaussian random-walk proposal with Haario-style covariance adaptation.
///
/// Before `start` states have been observed the covariance is diag(initial_sd^2);
/// afterwards it is scale * (Cov(history) + epsilon I). The history includes
/// repeated states of rejected iterations.
class AdaptiveProposal {
 public:
  AdaptiveProposal(AdaptSettings settings, std::size_t dim);

  std::size_t dimension() const noexcept { return dim_; }
  std::uint64_t observed() const noexcept { return count_; }
  bool adapting() const noexcept { return settings_.enabled && count_ >= settings_.start; }

  /// Records one chain state in the running mean/covariance.
  void observe(std::span<const double> state);

  Eigen::MatrixXd covariance() const;
  const Eigen::VectorXd& history_mean() const noexcept { return mean_; }
  Eigen::MatrixXd history_covariance() const;

  /// current + L * N(0, I) where L L^T = covariance().
  std::vector<double> propose(std::span<const double> current, RngStream& rng);

  /// Log density of moving from `from` to `to`; symmetric in its arguments.
  double log_density(std::span<const double> from, std::span<const double> to) const;

 private:
  void refresh_factor() const;

  AdaptSettings settings_;
  std::size_t dim_;
  std::uint64_t count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd scatter_;
  mutable Eigen::MatrixXd factor_;
  mutable bool factor_dirty_ = true;
};

}  // namespace sdeabc
