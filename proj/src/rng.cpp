#include "arl/rng.hpp"

namespace arl {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) noexcept : key_(splitmix64(seed ^ 0x6A09E667F3BCC909ULL)) {}

Rng Rng::split(std::uint64_t tag) const noexcept {
  Rng child(0);
  child.key_ = splitmix64(key_ ^ splitmix64(tag + 0xD1B54A32D192ED03ULL));
  return child;
}

Rng::result_type Rng::operator()() noexcept {
  return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * (++counter_));
}

double Rng::uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

std::size_t Rng::categorical(std::span<const double> weights) noexcept {
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

}  // namespace arl
