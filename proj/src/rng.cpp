#include "relcal/rng.hpp"

#include <cmath>

#include "relcal/errors.hpp"

namespace relcal {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& c, const std::array<std::uint32_t, 2>& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> Philox::block(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) {
    round_once(counter, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return counter;
}

Philox::Philox(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_lo_(static_cast<std::uint32_t>(stream ^ (stream >> 32))),
      substream_lo_(static_cast<std::uint32_t>(substream ^ (substream >> 32))) {}

void Philox::refill() {
  const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(block_index_),
                                            static_cast<std::uint32_t>(block_index_ >> 32),
                                            stream_lo_, substream_lo_};
  buffer_ = block(ctr, key_);
  ++block_index_;
  buffer_pos_ = 0;
}

std::uint32_t Philox::next_u32() {
  if (buffer_pos_ >= 4) refill();
  return buffer_[buffer_pos_++];
}

std::uint64_t Philox::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double Philox::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Philox::next_open_double() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double Philox::gauss() {
  if (has_gauss_spare_) {
    has_gauss_spare_ = false;
    return gauss_spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(next_open_double()));
  const double theta = 2.0 * M_PI * next_double();
  gauss_spare_ = r * std::sin(theta);
  has_gauss_spare_ = true;
  return r * std::cos(theta);
}

double Philox::exponential() { return -std::log(next_open_double()); }

double Philox::chisq4() {
  // Sum of two Exp(1) is Gamma(2,1); chi^2_4 = 2 * Gamma(2,1).
  return -2.0 * std::log(next_open_double() * next_open_double());
}

double Philox::lognormal() { return std::exp(gauss()); }

bool Philox::bernoulli(double p) { return next_double() < p; }

long Philox::poisson(double mean) {
  if (!(mean >= 0.0) || mean > 100.0)
    throw DegenerateInputError("poisson mean out of supported range");
  const double u = next_double();
  double p = std::exp(-mean);
  double cum = p;
  long k = 0;
  while (u > cum && k < 10000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cum += p;
  }
  return k;
}

double Philox::gamma_shape1(double rate) {
  if (!(rate > 0.0)) throw DegenerateInputError("gamma rate must be positive");
  return exponential() / rate;
}

}  // namespace relcal
