#ifndef SKYLINE_RNG_HPP_
#define SKYLINE_RNG_HPP_

#include <cstdint>
#include <limits>
#include <random>

namespace skyline {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/**
 * Counter-based random stream.
 *
 * The n-th output of stream (seed, stream) is a pure function of
 * (seed, stream, n), so replicate r of a simulation can be generated on any
 * thread, in any order, and still reproduce bit for bit. Satisfies the
 * UniformRandomBitGenerator requirements so it can drive the standard
 * distributions.
 */
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(detail::splitmix64(detail::splitmix64(seed) ^
                                detail::splitmix64(stream ^ 0x5bd1e9955bd1e995ULL))) {}

  /// Sub-stream keyed by a second index, e.g. (replicate, purpose).
  StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) noexcept
      : StreamRng(seed, detail::splitmix64(stream) ^ (substream * 0xd6e8feb86659fd93ULL)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return detail::splitmix64(key_ + 0x9e3779b97f4a7c15ULL * (++counter_));
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_(*this); }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline long long poisson_draw(StreamRng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<long long> dist(mean);
  return dist(rng);
}

}  // namespace skyline

#endif  // SKYLINE_RNG_HPP_
