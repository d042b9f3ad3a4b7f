#include "arl/policy.hpp"

#include <cmath>
#include <limits>

#include "arl/errors.hpp"

namespace arl {

StationaryPolicy::StationaryPolicy(const Model& model, std::vector<std::vector<double>> probs)
    : probs_(std::move(probs)) {
  if (probs_.size() != model.num_states()) {
    throw Error(ErrorKind::InvalidBehavior, "policy table must have one row per state");
  }
  for (StateId s = 0; s < probs_.size(); ++s) {
    auto& row = probs_[s];
    if (row.size() != model.num_actions()) {
      throw Error(ErrorKind::InvalidBehavior, "policy row " + std::to_string(s) + " has wrong width");
    }
    double sum = 0.0;
    for (ActionId a = 0; a < row.size(); ++a) {
      if (!(row[a] >= 0.0)) {
        throw Error(ErrorKind::InvalidBehavior, "negative policy probability at state " + std::to_string(s));
      }
      if (row[a] > 0.0 && !model.available(s, a)) {
        throw Error(ErrorKind::InvalidBehavior,
                    "policy puts mass on unavailable action " + std::to_string(a) + " at state " + std::to_string(s));
      }
      sum += row[a];
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw Error(ErrorKind::InvalidBehavior, "policy row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

StationaryPolicy StationaryPolicy::uniform(const Model& model) {
  std::vector<std::vector<double>> probs(model.num_states(), std::vector<double>(model.num_actions(), 0.0));
  for (StateId s = 0; s < model.num_states(); ++s) {
    const auto pairs = model.pairs_at(s);
    for (PairId p : pairs) probs[s][model.pair_action(p)] = 1.0 / static_cast<double>(pairs.size());
  }
  return StationaryPolicy(model, std::move(probs));
}

StationaryPolicy StationaryPolicy::from_deterministic(const Model& model, const DeterministicPolicy& det) {
  std::vector<std::vector<double>> probs(model.num_states(), std::vector<double>(model.num_actions(), 0.0));
  for (StateId s = 0; s < model.num_states(); ++s) probs[s].at(det.at(s)) = 1.0;
  return StationaryPolicy(model, std::move(probs));
}

StationaryPolicy StationaryPolicy::state_independent(const Model& model, const std::vector<double>& action_probs) {
  if (action_probs.size() != model.num_actions()) {
    throw Error(ErrorKind::InvalidBehavior, "behavior vector must have one entry per action");
  }
  std::vector<std::vector<double>> probs(model.num_states(), std::vector<double>(model.num_actions(), 0.0));
  for (StateId s = 0; s < model.num_states(); ++s) {
    double total = 0.0;
    for (PairId p : model.pairs_at(s)) total += action_probs[model.pair_action(p)];
    if (!(total > 0.0)) {
      throw Error(ErrorKind::InvalidBehavior, "behavior gives no mass to the actions of state " + std::to_string(s));
    }
    for (PairId p : model.pairs_at(s)) {
      const ActionId a = model.pair_action(p);
      probs[s][a] = action_probs[a] / total;
    }
  }
  return StationaryPolicy(model, std::move(probs));
}

std::size_t count_deterministic_policies(const Model& model) noexcept {
  std::size_t count = 1;
  for (StateId s = 0; s < model.num_states(); ++s) {
    const std::size_t k = model.pairs_at(s).size();
    if (count > std::numeric_limits<std::size_t>::max() / k) return std::numeric_limits<std::size_t>::max();
    count *= k;
  }
  return count;
}

void for_each_deterministic_policy(const Model& model, std::size_t cap,
                                   const std::function<bool(const DeterministicPolicy&)>& visit) {
  const std::size_t total = count_deterministic_policies(model);
  if (total > cap) {
    throw Error(ErrorKind::CapExceeded, "model has " + std::to_string(total) +
                                            " deterministic policies, above the enumeration cap " +
                                            std::to_string(cap));
  }
  const std::size_t ns = model.num_states();
  std::vector<std::size_t> digit(ns, 0);
  DeterministicPolicy policy(ns);
  for (StateId s = 0; s < ns; ++s) policy[s] = model.pair_action(model.pairs_at(s)[0]);
  while (true) {
    if (!visit(policy)) return;
    StateId s = 0;
    for (; s < ns; ++s) {
      const auto pairs = model.pairs_at(s);
      if (++digit[s] < pairs.size()) {
        policy[s] = model.pair_action(pairs[digit[s]]);
        break;
      }
      digit[s] = 0;
      policy[s] = model.pair_action(pairs[0]);
    }
    if (s == ns) return;
  }
}

}  // namespace arl
