#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "arl/ffunction.hpp"
#include "arl/learner.hpp"
#include "arl/model.hpp"
#include "arl/policy.hpp"
#include "arl/rng.hpp"
#include "arl/schedule.hpp"
#include "arl/solvers.hpp"

namespace arl {

using OptionId = std::size_t;

/// Markov options over a model: an internal stationary policy and a
/// termination probability per state. Every option may be started in every
/// state, so (state, option) pairs are indexed as state * num_options + option.
class OptionSet {
 public:
  OptionSet(const Model& mdp, std::vector<std::string> names, std::vector<std::vector<std::vector<double>>> policy,
            std::vector<std::vector<double>> termination);

  /// One option per action: always takes that action and stops after one
  /// step. Needs every action to be available in every state.
  static OptionSet primitive(const Model& mdp);

  [[nodiscard]] std::size_t num_options() const noexcept { return names_.size(); }
  [[nodiscard]] std::size_t num_states() const noexcept { return termination_.empty() ? 0 : termination_[0].size(); }
  [[nodiscard]] std::size_t num_pairs() const noexcept { return num_options() * num_states(); }
  [[nodiscard]] std::size_t pair(StateId s, OptionId o) const noexcept { return s * num_options() + o; }

  [[nodiscard]] double pi(StateId s, OptionId o, ActionId a) const noexcept { return policy_[o][s][a]; }
  [[nodiscard]] const std::vector<double>& pi_row(StateId s, OptionId o) const noexcept { return policy_[o][s]; }
  [[nodiscard]] double beta(StateId s, OptionId o) const noexcept { return termination_[o][s]; }
  [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::vector<double>>> policy_;  // [o][s][a]
  std::vector<std::vector<double>> termination_;          // [o][s]
};

/// { "options": [ {"name", "pi": {state: {action: prob}}, "beta": {state: prob}} ] }
OptionSet parse_options(const nlohmann::json& doc, const Model& mdp);
OptionSet load_options(const std::filesystem::path& path, const Model& mdp);

struct TerminationAudit {
  bool passed = true;
  /// (option, state) pairs from which termination within |S| steps has
  /// probability zero.
  std::vector<std::pair<OptionId, StateId>> failing;
};

/// Boolean reachability on each option's continuation chain.
TerminationAudit audit_termination(const Model& mdp, const OptionSet& options);

struct OptionStep {
  StateId state;
  ActionId action;
  double reward;
};

struct OptionOutcome {
  StateId final_state;
  double cumulative_reward;
  std::size_t duration;
  std::vector<OptionStep> trace;
};

inline constexpr std::size_t kDefaultOptionCap = 1'000'000;

/// Runs option o from s until it terminates. Throws TerminationCapExceeded
/// after `cap` primitive steps.
OptionOutcome execute_option(const Model& mdp, const OptionSet& options, StateId s, OptionId o, Rng& rng,
                             std::size_t cap = kDefaultOptionCap, bool keep_trace = true);

struct InducedQuantities {
  std::vector<double> reward;    // r-hat per (s, o)
  std::vector<double> duration;  // l-hat per (s, o)
  Eigen::MatrixXd transition;    // p-hat, (s, o) x s'
};

/// Expected cumulative reward, expected duration and termination-state
/// distribution from the first-step equations of each option's
/// continuation chain. Throws SingularSystem when an option can run forever.
InducedQuantities exact_option_quantities(const Model& mdp, const OptionSet& options);

/// The SMDP whose actions are the options; each (s, o) has one outcome per
/// reachable termination state carrying r-hat and l-hat.
Model induced_smdp(const Model& mdp, const OptionSet& options, const InducedQuantities& quantities);

struct InterOptionLearner {
  TabularQ q;
  std::vector<double> duration;  // L_n
  std::vector<std::size_t> counts;
  std::size_t n = 0;

  static InterOptionLearner initial(TabularQ q0, double initial_duration = 1.0);
};

/// Behavior over options for a single stream of option executions.
struct OptionStream {
  std::vector<std::vector<double>> behavior;  // [s][o]
  StateId state = 0;
};

using OptionUpdateSource = std::variant<Synchronous, SubsetSchedule, OptionStream>;

struct OptionStepRecord {
  std::vector<std::size_t> updated;
  std::vector<OptionOutcome> outcomes;
  double f_value = 0.0;
};

/// One iteration of the inter-option algorithm: for (s, o) in Y_n execute o,
/// Q += alpha (R - L f(Q_n) + max Q_n(S', .) - Q_n) / L, then
/// L += beta (duration - L).
OptionStepRecord inter_option_step(InterOptionLearner& learner, const Model& mdp, const OptionSet& options,
                                   const FFunction& f, const StepSchedule& alpha, const StepSchedule& beta,
                                   OptionUpdateSource& source, const Rng& master,
                                   std::size_t cap = kDefaultOptionCap);

struct IntraOptionLearner {
  TabularQ q;
  std::vector<std::size_t> counts;
  std::size_t n = 0;

  static IntraOptionLearner initial(TabularQ q0);
};

struct IntraOptionConfig {
  StationaryPolicy behavior;
  double epsilon = 0.1;
  /// Picks X_n; all states when empty.
  std::function<std::vector<StateId>(std::size_t iteration, Rng& rng)> state_selector;
  /// Restricts O_n(s); every absolutely continuous option when empty. Naming
  /// an option that is not absolutely continuous w.r.t. the behavior raises
  /// AbsContinuityViolation.
  std::function<std::vector<OptionId>(StateId s)> option_selector;
};

struct IntraOptionStepRecord {
  std::vector<std::size_t> updated;
  std::vector<double> ratios;  // importance ratio per updated pair
  double f_value = 0.0;
};

/// One iteration of the intra-option algorithm with importance ratios and
/// U[q](s', o) = (1 - beta(s', o)) q(s', o) + beta(s', o) max q(s', .).
IntraOptionStepRecord intra_option_step(IntraOptionLearner& learner, const Model& mdp, const OptionSet& options,
                                        const FFunction& f, const StepSchedule& alpha, const IntraOptionConfig& config,
                                        const Rng& master);

/// U[q](s', o) for every (s', o).
std::vector<double> continuation_values(const OptionSet& options, std::span<const double> q);

struct OptionResiduals {
  double inter = 0.0;
  double intra = 0.0;
};

OptionResiduals option_residuals(const Model& mdp, const OptionSet& options, const InducedQuantities& quantities,
                                 std::span<const double> q, double rbar);

/// Greedy option per state (smallest index on ties).
std::vector<OptionId> greedy_options(const OptionSet& options, std::span<const double> q);

}  // namespace arl
