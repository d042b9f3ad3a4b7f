#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "arl/chain.hpp"
#include "arl/ffunction.hpp"
#include "arl/model.hpp"
#include "arl/policy.hpp"

namespace arl {

/// Dense state-action (or state-option) value table indexed by PairId.
using TabularQ = std::vector<double>;

struct ExpectedQuantities {
  std::vector<double> reward;   // r_sa per pair
  std::vector<double> holding;  // l_sa per pair, 1 for MDPs
  Eigen::MatrixXd transition;   // pairs x states, p(s' | s, a)
};

ExpectedQuantities expected_quantities(const Model& model);

/// max over available actions of q(s, .), one entry per state.
std::vector<double> state_max(const Model& model, std::span<const double> q);
/// Greedy deterministic policy; ties go to the smallest action index.
DeterministicPolicy greedy_policy(const Model& model, std::span<const double> q);

/// Right-hand side r_sa - rbar * l_sa + sum_s' p max q(s', .) per pair.
std::vector<double> bellman_rhs(const Model& model, const ExpectedQuantities& eq, std::span<const double> q,
                                double rbar);
double optimality_residual(const Model& model, const ExpectedQuantities& eq, std::span<const double> q, double rbar);
double optimality_residual(const Model& model, std::span<const double> q, double rbar);

double span(std::span<const double> v) noexcept;
double max_norm(std::span<const double> v) noexcept;

/// Per-state long-run reward rate of a deterministic policy. Each recurrent
/// class earns (stationary-weighted reward) / (stationary-weighted holding
/// time); transient states average the class rates by absorption
/// probability.
std::vector<double> policy_gain(const Model& model, const ExpectedQuantities& eq, const DeterministicPolicy& policy);

struct GainResult {
  double r_star = 0.0;
  std::vector<double> per_state_gain;
  std::vector<DeterministicPolicy> optimal_policies;
  bool constant = false;

  [[nodiscard]] bool is_optimal(const DeterministicPolicy& policy) const;
};

inline constexpr double kGainTolerance = 1e-10;

/// Enumeration oracle over deterministic policies.
GainResult optimal_gain(const Model& model, std::size_t cap = kDefaultEnumerationCap);

/// f(Q) = r_ref + sum_s' p_ref max Q(s', .) - Q(ref), divided by l_ref in the
/// semi-Markov variant. Keeps Q(ref) fixed along the iteration.
struct FixedPairReference {
  PairId pair = 0;
};
using RviReference = std::variant<FixedPairReference, FFunction>;

struct RviOptions {
  double alpha = 0.5;
  double tol = 1e-12;
  std::size_t max_iter = 1'000'000;
  bool record_traces = true;
  /// When set, also trace the optimality residual of each iterate at this rate.
  std::optional<double> residual_rate;
};

struct RviResult {
  TabularQ q;
  std::vector<double> f_trace;     // f(Q_n), n = 0..iterations
  std::vector<double> span_trace;  // span(Q_{n+1} - Q_n)
  std::vector<double> residual_trace;  // residual of Q_n, when requested
  bool converged = false;
  std::size_t iterations = 0;
  double f_final = 0.0;
};

/// Synchronous relative value iteration on action values with step alpha in
/// (0, 1). Stops once span(Q_{n+1} - Q_n) <= tol; with a general f the
/// max-norm of the step must also be below tol, since only then does f(Q_n)
/// settle. MaxIterExceeded is reported through `converged == false`.
RviResult classical_rvi(const Model& model, const RviReference& reference, std::span<const double> q0,
                        const RviOptions& options = {});

/// Schweitzer's scaled iteration for SMDPs:
/// Q += alpha (r - l f(Q) + P max Q - Q) / l with the fixed-pair reference
/// divided by l_ref. Requires 0 < alpha < min l_sa.
RviResult schweitzer_rvi(const Model& model, PairId reference, std::span<const double> q0,
                         const RviOptions& options = {});

}  // namespace arl
