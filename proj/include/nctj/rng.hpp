#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nctj {

// Deterministic random stream: xoshiro256** seeded through SplitMix64 from
// (master_seed, domain_label). Identical inputs yield identical sequences on
// every platform; distinct labels give independent sub-experiment streams
// ("init", "shuffle", "poison", "etf", "corrupt", ...).
class RngStream {
 public:
  RngStream(uint64_t master_seed, std::string_view domain_label);

  uint64_t master_seed() const { return master_seed_; }
  const std::string& label() const { return label_; }

  uint64_t next_u64();
  double next_double();    // uniform [0,1), 53-bit mantissa
  float next_float();      // uniform [0,1), 24-bit mantissa
  double next_gaussian();  // standard normal via Box-Muller
  uint64_t next_below(uint64_t bound);  // uniform {0,...,bound-1}, unbiased
  int next_int(int lo, int hi);         // uniform [lo, hi] inclusive

  // Child stream keyed as (master_seed, label + "/" + sublabel).
  RngStream fork(std::string_view sublabel) const;

  // Fisher-Yates; consumes size()-1 bounded draws.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t master_seed_ = 0;
  std::string label_;
  uint64_t state_[4] = {0, 0, 0, 0};
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace nctj
