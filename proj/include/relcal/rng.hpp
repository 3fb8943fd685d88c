#pragma once

#include <array>
#include <cstdint>

namespace relcal {

// Philox4x32-10 counter-based generator (Salmon et al. 2011 parameters).
// Streams are cheap: (seed, stream, substream) selects an independent
// sequence, so replicate workers can run in any order or in parallel and
// still produce identical draws.
class Philox {
 public:
  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t substream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0,1) with 53 random bits.
  double next_double();
  // Uniform on (0,1]; safe as a log() argument.
  double next_open_double();

  double gauss();                 // standard normal (Box-Muller, caches the pair)
  double exponential();           // mean 1
  double chisq4();                // chi-squared, 4 degrees of freedom
  double lognormal();             // exp of a standard normal
  bool bernoulli(double p);
  long poisson(double mean);      // inversion by sequential search; small means only
  double gamma_shape1(double rate);

  // One keyed block of the underlying bijection; exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t block_index_ = 0;
  std::uint32_t stream_lo_ = 0;
  std::uint32_t substream_lo_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffer_pos_ = 4;
  double gauss_spare_ = 0.0;
  bool has_gauss_spare_ = false;
};

}  // namespace relcal
