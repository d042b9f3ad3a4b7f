#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "arl/model.hpp"
#include "arl/policy.hpp"

namespace arl {

struct ChainAnalysis {
  std::vector<std::vector<StateId>> recurrent_classes;
  std::vector<StateId> transient_states;
  /// stationary[k][i] is the stationary mass of recurrent_classes[k][i].
  std::vector<std::vector<double>> stationary;
  /// Recurrent-class index of each state, or -1 when transient.
  std::vector<int> class_of;
};

Eigen::MatrixXd state_transition_matrix(const Model& model, const StationaryPolicy& policy);
Eigen::MatrixXd state_transition_matrix(const Model& model, const DeterministicPolicy& policy);

/// Closed strongly connected components of the positive-entry digraph are
/// the recurrent classes; everything else is transient.
ChainAnalysis analyze_chain(const Eigen::MatrixXd& transitions);
ChainAnalysis induce_chain(const Model& model, const StationaryPolicy& policy);

enum class MdpClass { Communicating, WeaklyCommunicating, Unichain, Multichain };
std::string_view to_string(MdpClass c) noexcept;

struct ClassifyOptions {
  bool check_unichain = true;
  std::size_t cap = kDefaultEnumerationCap;
};

struct Classification {
  bool communicating = false;
  bool weakly_communicating = false;
  /// Empty when the unichain check was skipped.
  std::optional<bool> unichain;
  /// S^o when weakly communicating, otherwise empty.
  std::vector<StateId> closed_class;

  /// The most specific label: Unichain, then Communicating, then
  /// WeaklyCommunicating, otherwise Multichain.
  [[nodiscard]] MdpClass primary() const noexcept;
};

Classification classify(const Model& model, const ClassifyOptions& options = {});

}  // namespace arl
