#pragma once

#include <functional>
#include <vector>

#include "arl/model.hpp"

namespace arl {

/// Deterministic policy: one available action per state.
using DeterministicPolicy = std::vector<ActionId>;

/// Randomized stationary policy stored as a dense |S| x |A| table. Mass on
/// an action that is unavailable at a state is rejected at construction.
class StationaryPolicy {
 public:
  StationaryPolicy(const Model& model, std::vector<std::vector<double>> probs);

  /// Uniform over the available actions at every state; every available
  /// action has positive probability.
  static StationaryPolicy uniform(const Model& model);
  static StationaryPolicy from_deterministic(const Model& model, const DeterministicPolicy& det);
  /// Same action distribution in every state, renormalized over the actions
  /// each state offers.
  static StationaryPolicy state_independent(const Model& model, const std::vector<double>& action_probs);

  [[nodiscard]] double prob(StateId s, ActionId a) const noexcept { return probs_[s][a]; }
  [[nodiscard]] const std::vector<double>& row(StateId s) const noexcept { return probs_[s]; }
  [[nodiscard]] std::size_t num_states() const noexcept { return probs_.size(); }

 private:
  std::vector<std::vector<double>> probs_;
};

/// Number of deterministic policies, saturating at SIZE_MAX.
std::size_t count_deterministic_policies(const Model& model) noexcept;

/// Visits deterministic policies in lexicographic order of available
/// actions until `visit` returns false. Throws CapExceeded if there are more
/// than `cap` policies.
void for_each_deterministic_policy(const Model& model, std::size_t cap,
                                   const std::function<bool(const DeterministicPolicy&)>& visit);

inline constexpr std::size_t kDefaultEnumerationCap = 1'000'000;

}  // namespace arl
