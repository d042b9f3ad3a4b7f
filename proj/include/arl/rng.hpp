#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace arl {

/// Counter-based generator: a 64-bit key plus a running counter, each output
/// is SplitMix64 applied to (key, counter). Child streams are derived with
/// split(), so draws for (run, iteration, pair) never depend on how many
/// numbers other streams consumed.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  [[nodiscard]] Rng split(std::uint64_t tag) const noexcept;
  [[nodiscard]] Rng split(std::uint64_t a, std::uint64_t b) const noexcept { return split(a).split(b); }

  result_type operator()() noexcept;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Index i drawn with probability weights[i]; weights need not be
  /// normalized but must be nonnegative with a positive total.
  std::size_t categorical(std::span<const double> weights) noexcept;

  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
  [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace arl
