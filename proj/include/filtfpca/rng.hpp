#pragma once

#include <cstdint>

namespace filtfpca {

/// Seeded SplitMix64 stream, stream-order contract v1.
///
/// Stream k of seed s starts from state mix64(s + k * 0x9E3779B97F4A7C15)
/// and advances by the golden-ratio increment with the standard
/// SplitMix64 finalizer. Uniforms map the top 53 bits into the open
/// interval (0,1); normals go through the inverse CDF, so identical
/// (seed, stream, draw index) give identical doubles on every platform.
class SplitMixStream {
 public:
  SplitMixStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double next_uniform();
  double next_normal();

 private:
  std::uint64_t state_;
};

/// Inverse of the standard normal CDF (Wichura's AS241, double precision).
double inverse_normal_cdf(double p);

}  // namespace filtfpca
