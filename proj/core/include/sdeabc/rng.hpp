#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sdeabc {

/// Reproducible random stream identified by (seed, stream_id).
///
/// The pair is expanded through std::seed_seq into a 64-bit Mersenne Twister
/// state, so distinct stream ids give decorrelated sequences while identical
/// pairs replay bit-for-bit. A stream is single-owner; give each thread its own.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+seed_seq(seed,stream_id)";

  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  double normal();
  std::uint64_t next_u64() { return engine_(); }

  /// New independent stream derived from this one's next output.
  RngStream split(std::uint64_t stream_id);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sdeabc
