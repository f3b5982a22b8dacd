#pragma once

#include <cstdint>

namespace shapeagg {

/// 64-bit finalizer with full avalanche (splitmix64 mixing function).
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based random stream keyed by (master seed, stream id). Draws
/// depend only on the key and the number of values consumed, never on
/// scheduling, so parallel replicates are reproducible at any worker count.
class CounterRng {
  public:
    CounterRng(std::uint64_t master_seed, std::uint64_t stream)
        : state_(mix64(master_seed + 0x9e3779b97f4a7c15ULL) ^
                 mix64(stream + 0x632be59bd9b4e019ULL)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform on the open interval (0,1).
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via the inverse CDF; one uniform per variate, so the
    /// stream position is independent of the values drawn.
    double next_normal();

    /// Uniform integer in [0, bound) by rejection (unbiased).
    std::uint64_t next_below(std::uint64_t bound);

  private:
    std::uint64_t state_;
};

/// Inverse of the standard normal CDF (Wichura's AS 241, double precision).
double normal_quantile(double p);

}  // namespace shapeagg
