#include "arl/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "arl/errors.hpp"

namespace arl {

std::string Violation::describe() const {
  std::ostringstream out;
  out << check;
  if (state || action) {
    out << " at (";
    out << (state ? std::to_string(*state) : std::string("?"));
    out << ", ";
    out << (action ? std::to_string(*action) : std::string("?"));
    out << ")";
  }
  if (!detail.empty()) out << ": " << detail;
  return out.str();
}

std::vector<Violation> validate_model(const ModelSpec& spec) {
  std::vector<Violation> found;
  const std::size_t ns = spec.states.size();
  const std::size_t na = spec.actions.size();
  if (ns == 0) found.push_back({{}, {}, "empty state set", ""});
  if (na == 0) found.push_back({{}, {}, "empty action set", ""});
  if (!(spec.holding_floor > 0.0)) {
    found.push_back({{}, {}, "holding-time floor", "declared floor must be positive"});
  }

  std::map<std::pair<StateId, ActionId>, double> row_sums;
  for (const auto& t : spec.transitions) {
    if (t.state >= ns || t.action >= na || t.next >= ns) {
      found.push_back({t.state, t.action, "index range", "state, action or successor out of range"});
      continue;
    }
    if (!std::isfinite(t.prob) || t.prob < 0.0) {
      found.push_back({t.state, t.action, "nonnegative probability", "p = " + std::to_string(t.prob)});
    }
    if (!std::isfinite(t.reward)) {
      found.push_back({t.state, t.action, "finite reward", ""});
    }
    if (!std::isfinite(t.holding) || t.holding < spec.holding_floor) {
      std::ostringstream d;
      d << "l = " << t.holding << " below floor " << spec.holding_floor;
      found.push_back({t.state, t.action, "holding-time bound", d.str()});
    }
    row_sums[{t.state, t.action}] += t.prob;
  }
  for (const auto& [key, sum] : row_sums) {
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      std::ostringstream d;
      d.precision(17);
      d << "probabilities sum to " << sum;
      found.push_back({key.first, key.second, "row sum", d.str()});
    }
  }
  for (StateId s = 0; s < ns; ++s) {
    bool any = false;
    for (ActionId a = 0; a < na && !any; ++a) any = row_sums.contains({s, a});
    if (!any) found.push_back({s, {}, "available action", "state has no outgoing transitions"});
  }
  return found;
}

std::vector<Violation> validate_model(const Model& model) { return validate_model(model.to_spec()); }

Model Model::from_spec(const ModelSpec& spec) {
  auto violations = validate_model(spec);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "model '" << spec.name << "' failed validation:";
    for (const auto& v : violations) msg << "\n  " << v.describe();
    throw Error(ErrorKind::ModelError, msg.str());
  }

  Model m;
  m.name_ = spec.name;
  m.state_names_ = spec.states;
  m.action_names_ = spec.actions;
  m.holding_floor_ = spec.holding_floor;
  const std::size_t ns = spec.states.size();
  const std::size_t na = spec.actions.size();

  std::vector<std::vector<Outcome>> rows(ns * na);
  for (const auto& t : spec.transitions) {
    rows[t.state * na + t.action].push_back({t.next, t.reward, t.holding, t.prob});
    if (t.holding != 1.0) m.semi_markov_ = true;
  }

  m.pair_table_.assign(ns * na, kNoPair);
  m.state_offsets_.push_back(0);
  m.outcome_offsets_.push_back(0);
  for (StateId s = 0; s < ns; ++s) {
    for (ActionId a = 0; a < na; ++a) {
      auto& row = rows[s * na + a];
      if (row.empty()) continue;
      const PairId id = m.pair_state_.size();
      m.pair_table_[s * na + a] = id;
      m.pair_state_.push_back(s);
      m.pair_action_.push_back(a);
      m.state_pairs_.push_back(id);
      for (const auto& o : row) {
        if (o.prob > 0.0) m.outcome_store_.push_back(o);
      }
      m.outcome_offsets_.push_back(m.outcome_store_.size());
    }
    m.state_offsets_.push_back(m.state_pairs_.size());
  }
  return m;
}

PairId Model::pair(StateId s, ActionId a) const noexcept {
  if (s >= num_states() || a >= num_actions()) return kNoPair;
  return pair_table_[s * num_actions() + a];
}

std::span<const PairId> Model::pairs_at(StateId s) const noexcept {
  return {state_pairs_.data() + state_offsets_[s], state_offsets_[s + 1] - state_offsets_[s]};
}

std::span<const Outcome> Model::outcomes(PairId p) const noexcept {
  return {outcome_store_.data() + outcome_offsets_[p], outcome_offsets_[p + 1] - outcome_offsets_[p]};
}

Sample Model::sample(PairId p, Rng& rng) const noexcept {
  const auto row = outcomes(p);
  const double target = rng.uniform();
  double acc = 0.0;
  for (const auto& o : row) {
    acc += o.prob;
    if (target < acc) return {o.next, o.reward, o.holding};
  }
  const auto& o = row.back();
  return {o.next, o.reward, o.holding};
}

std::optional<StateId> Model::find_state(std::string_view name) const noexcept {
  auto it = std::find(state_names_.begin(), state_names_.end(), name);
  if (it == state_names_.end()) return std::nullopt;
  return static_cast<StateId>(it - state_names_.begin());
}

std::optional<ActionId> Model::find_action(std::string_view name) const noexcept {
  auto it = std::find(action_names_.begin(), action_names_.end(), name);
  if (it == action_names_.end()) return std::nullopt;
  return static_cast<ActionId>(it - action_names_.begin());
}

std::string Model::pair_label(PairId p) const {
  return state_names_[pair_state_[p]] + "/" + action_names_[pair_action_[p]];
}

std::optional<PairId> Model::find_pair(std::string_view label) const {
  const auto slash = label.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  const auto s = find_state(label.substr(0, slash));
  const auto a = find_action(label.substr(slash + 1));
  if (!s || !a) return std::nullopt;
  const PairId p = pair(*s, *a);
  if (p == kNoPair) return std::nullopt;
  return p;
}

ModelSpec Model::to_spec() const {
  ModelSpec spec{name_, state_names_, action_names_, {}, holding_floor_};
  for (PairId p = 0; p < num_pairs(); ++p) {
    for (const auto& o : outcomes(p)) {
      spec.transitions.push_back({pair_state_[p], pair_action_[p], o.next, o.reward, o.holding, o.prob});
    }
  }
  return spec;
}

Sample sample_transition(const Model& model, StateId s, ActionId a, Rng& rng) {
  const PairId p = model.pair(s, a);
  if (p == kNoPair) {
    throw Error(ErrorKind::UnknownStateAction,
                "no transition row for state " + std::to_string(s) + ", action " + std::to_string(a));
  }
  return model.sample(p, rng);
}

}  // namespace arl
