#pragma once

#include <cmath>
#include <cstdint>

namespace detq {

// Counter-based pseudo-random stream. The i-th output is a strong 64-bit
// mix of (key + i * golden), so a stream is fully determined by its key and
// never needs to be advanced sequentially to be reproducible. Independent
// logical streams (dataset generation, dithering, Monte Carlo blocks) are
// derived from a master seed via substream labels; a single stream must not
// be shared across concurrent callers.
class RngStream {
public:
  explicit RngStream(uint64_t seed) : key_(mix64(seed + kGolden)) {}

  // Derives an independent stream keyed by (this stream, label).
  RngStream substream(uint64_t label) const {
    RngStream s(0);
    s.key_ = mix64(key_ ^ (mix64(label + kGolden) + 0x632BE59BD9B4E019ULL));
    s.counter_ = 0;
    s.has_spare_ = false;
    return s;
  }

  uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n); n must be positive. Rejection-free modulo is
  // fine here: n is tiny compared to 2^64 in every use in this project.
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

private:
  static constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  // splitmix64 finalizer.
  static uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  uint64_t key_;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream labels used across the project so derived streams never collide.
namespace stream_label {
inline constexpr uint64_t kDataset = 1;
inline constexpr uint64_t kControllerInit = 2;
inline constexpr uint64_t kDetectorInit = 3;
inline constexpr uint64_t kShuffleController = 4;
inline constexpr uint64_t kShuffleDetector = 5;
inline constexpr uint64_t kMonteCarlo = 6;
inline constexpr uint64_t kDither = 7;
}  // namespace stream_label

}  // namespace detq
