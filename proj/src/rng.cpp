#include "nctj/rng.hpp"

#include <cmath>

#include "nctj/common.hpp"

namespace nctj {

namespace {

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = kFnvOffset;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(uint64_t master_seed, std::string_view domain_label)
    : master_seed_(master_seed), label_(domain_label) {
  uint64_t x = master_seed ^ fnv1a64(domain_label);
  for (auto& s : state_) s = splitmix64(x);
}

uint64_t RngStream::next_u64() {
  // xoshiro256**
  const uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float RngStream::next_float() {
  return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
}

double RngStream::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  // Box-Muller on (0,1] x [0,1).
  double u1 = next_double();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  double u2 = next_double();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 6.283185307179586476925286766559 * u2;
  cached_gaussian_ = r * std::sin(a);
  has_cached_gaussian_ = true;
  return r * std::cos(a);
}

uint64_t RngStream::next_below(uint64_t bound) {
  if (bound == 0) throw ArgumentError("RngStream::next_below: bound must be positive");
  if (bound == 1) return 0;
  // Power-of-two mask rejection: unbiased and platform-independent.
  uint64_t mask = bound - 1;
  mask |= mask >> 1;
  mask |= mask >> 2;
  mask |= mask >> 4;
  mask |= mask >> 8;
  mask |= mask >> 16;
  mask |= mask >> 32;
  for (;;) {
    uint64_t r = next_u64() & mask;
    if (r < bound) return r;
  }
}

int RngStream::next_int(int lo, int hi) {
  if (lo > hi) throw ArgumentError("RngStream::next_int: empty range");
  uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
  return lo + static_cast<int>(next_below(span));
}

RngStream RngStream::fork(std::string_view sublabel) const {
  std::string child = label_;
  child += '/';
  child += sublabel;
  return RngStream(master_seed_, child);
}

}  // namespace nctj
