#pragma once

#include <cstdint>
#include <limits>

namespace cornerspace {

/// Counter-based generator: draw k of a stream is mix(key + k * golden), with
/// the key derived from (master seed, stream id). Any stream can be created
/// directly, so trajectory i sees the same numbers however trajectories are
/// scheduled.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t master_seed, std::uint64_t stream)
      : key_(mix(mix(master_seed ^ 0x6a09e667f3bcc909ULL) + stream * 0x9e3779b97f4a7c15ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform on (0, 1].
  double uniform_open_closed() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-53;
  }
  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Worker count from CORNERSPACE_THREADS, defaulting to the hardware
/// concurrency (at least 1).
int configured_threads();

}  // namespace cornerspace
