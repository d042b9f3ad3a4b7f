#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arl/rng.hpp"

namespace arl {

using StateId = std::size_t;
using ActionId = std::size_t;
using PairId = std::size_t;
inline constexpr PairId kNoPair = std::numeric_limits<PairId>::max();

inline constexpr double kRowSumTolerance = 1e-12;
inline constexpr double kDefaultHoldingFloor = 1e-6;

/// One support point of p(s', r, l | s, a).
struct Outcome {
  StateId next;
  double reward;
  double holding;
  double prob;
};

/// A raw transition line, as it appears in a model file.
struct TransitionEntry {
  StateId state;
  ActionId action;
  StateId next;
  double reward;
  double holding = 1.0;
  double prob;
};

/// Unvalidated model description. Model::from_spec turns it into an
/// immutable Model or throws with every violation listed.
struct ModelSpec {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::string> actions;
  std::vector<TransitionEntry> transitions;
  double holding_floor = kDefaultHoldingFloor;
};

struct Violation {
  std::optional<StateId> state;
  std::optional<ActionId> action;
  std::string check;
  std::string detail;

  [[nodiscard]] std::string describe() const;
};

struct Sample {
  StateId next;
  double reward;
  double holding;
};

/// Finite MDP or SMDP. A state may offer only a subset of the actions; the
/// available (state, action) pairs are numbered densely in state-major order
/// and every tabular quantity in the library is indexed by that PairId.
class Model {
 public:
  static Model from_spec(const ModelSpec& spec);

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] std::size_t num_states() const noexcept { return state_names_.size(); }
  [[nodiscard]] std::size_t num_actions() const noexcept { return action_names_.size(); }
  [[nodiscard]] std::size_t num_pairs() const noexcept { return pair_state_.size(); }

  [[nodiscard]] PairId pair(StateId s, ActionId a) const noexcept;
  [[nodiscard]] bool available(StateId s, ActionId a) const noexcept { return pair(s, a) != kNoPair; }
  [[nodiscard]] std::span<const PairId> pairs_at(StateId s) const noexcept;
  [[nodiscard]] StateId pair_state(PairId p) const noexcept { return pair_state_[p]; }
  [[nodiscard]] ActionId pair_action(PairId p) const noexcept { return pair_action_[p]; }
  [[nodiscard]] std::span<const Outcome> outcomes(PairId p) const noexcept;

  [[nodiscard]] Sample sample(PairId p, Rng& rng) const noexcept;

  [[nodiscard]] bool semi_markov() const noexcept { return semi_markov_; }
  [[nodiscard]] double holding_floor() const noexcept { return holding_floor_; }

  [[nodiscard]] const std::vector<std::string>& state_names() const noexcept { return state_names_; }
  [[nodiscard]] const std::vector<std::string>& action_names() const noexcept { return action_names_; }
  [[nodiscard]] std::optional<StateId> find_state(std::string_view name) const noexcept;
  [[nodiscard]] std::optional<ActionId> find_action(std::string_view name) const noexcept;
  /// "state/action", e.g. "1/dashed".
  [[nodiscard]] std::string pair_label(PairId p) const;
  [[nodiscard]] std::optional<PairId> find_pair(std::string_view label) const;

  [[nodiscard]] ModelSpec to_spec() const;

 private:
  Model() = default;

  std::string name_;
  std::vector<std::string> state_names_;
  std::vector<std::string> action_names_;
  std::vector<PairId> pair_table_;         // num_states * num_actions
  std::vector<std::size_t> state_offsets_;  // num_states + 1, into state_pairs_
  std::vector<PairId> state_pairs_;
  std::vector<StateId> pair_state_;
  std::vector<ActionId> pair_action_;
  std::vector<std::size_t> outcome_offsets_;
  std::vector<Outcome> outcome_store_;
  double holding_floor_ = kDefaultHoldingFloor;
  bool semi_markov_ = false;
};

std::vector<Violation> validate_model(const ModelSpec& spec);
std::vector<Violation> validate_model(const Model& model);

/// Draws (s', r, l) for an explicit (state, action); throws
/// UnknownStateAction when the pair is not part of the model.
Sample sample_transition(const Model& model, StateId s, ActionId a, Rng& rng);

}  // namespace arl
