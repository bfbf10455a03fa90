#include "sdeabc/adaptive_metropolis.hpp"

#include <cmath>
#include <numbers>

#include "sdeabc/errors.hpp"

namespace sdeabc {

AdaptiveProposal::AdaptiveProposal(AdaptSettings settings, std::size_t dim)
    : settings_(std::move(settings)),
      dim_(dim),
      mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      scatter_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {
  if (settings_.initial_sd.size() != dim_) {
    throw ConfigError("AdaptiveProposal: expected " + std::to_string(dim_) +
                      " initial step sizes, got " + std::to_string(settings_.initial_sd.size()));
  }
  for (double sd : settings_.initial_sd) {
    if (!(sd > 0.0)) throw ConfigError("AdaptiveProposal: initial step sizes must be positive");
  }
  if (settings_.scale <= 0.0) settings_.scale = 2.38 * 2.38 / static_cast<double>(dim_);
}

void AdaptiveProposal::observe(std::span<const double> state) {
  ++count_;
  const Eigen::Map<const Eigen::VectorXd> x(state.data(), static_cast<Eigen::Index>(state.size()));
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  scatter_.noalias() += delta * (x - mean_).transpose();
  if (adapting()) factor_dirty_ = true;
}

Eigen::MatrixXd AdaptiveProposal::history_covariance() const {
  if (count_ < 2) return Eigen::MatrixXd::Zero(scatter_.rows(), scatter_.cols());
  return scatter_ / static_cast<double>(count_ - 1);
}

Eigen::MatrixXd AdaptiveProposal::covariance() const {
  const auto d = static_cast<Eigen::Index>(dim_);
  if (!adapting()) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      cov(i, i) = settings_.initial_sd[static_cast<std::size_t>(i)] *
                  settings_.initial_sd[static_cast<std::size_t>(i)];
    }
    return cov;
  }
  Eigen::MatrixXd cov = history_covariance();
  cov.diagonal().array() += settings_.epsilon;
  return settings_.scale * cov;
}

void AdaptiveProposal::refresh_factor() const {
  if (!factor_dirty_ && factor_.size() != 0) return;
  Eigen::LLT<Eigen::MatrixXd> llt(covariance());
  if (llt.info() != Eigen::Success) {
    // Symmetrize and fall back to the diagonal if rounding broke positivity.
    Eigen::MatrixXd cov = covariance();
    cov = 0.5 * (cov + cov.transpose()).eval();
    llt.compute(cov);
    if (llt.info() != Eigen::Success) {
      factor_ = cov.diagonal().cwiseMax(settings_.epsilon).cwiseSqrt().asDiagonal();
      factor_dirty_ = false;
      return;
    }
  }
  factor_ = llt.matrixL();
  factor_dirty_ = false;
}

std::vector<double> AdaptiveProposal::propose(std::span<const double> current, RngStream& rng) {
  refresh_factor();
  const auto d = static_cast<Eigen::Index>(dim_);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
  const Eigen::VectorXd step = factor_.triangularView<Eigen::Lower>() * z;
  std::vector<double> out(current.begin(), current.end());
  for (std::size_t i = 0; i < dim_; ++i) out[i] += step(static_cast<Eigen::Index>(i));
  return out;
}

double AdaptiveProposal::log_density(std::span<const double> from,
                                     std::span<const double> to) const {
  refresh_factor();
  const auto d = static_cast<Eigen::Index>(dim_);
  Eigen::VectorXd diff(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    diff(i) = to[static_cast<std::size_t>(i)] - from[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd white = factor_.triangularView<Eigen::Lower>().solve(diff);
  const double log_det = factor_.diagonal().array().log().sum();
  return -0.5 * white.squaredNorm() - log_det -
         0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi);
}

}  // namespace sdeabc
