#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "arl/ffunction.hpp"
#include "arl/model.hpp"
#include "arl/policy.hpp"
#include "arl/rng.hpp"
#include "arl/schedule.hpp"
#include "arl/solvers.hpp"

namespace arl {

/// Every pair is updated at every iteration.
struct Synchronous {};

/// Caller-chosen nonempty subset Y_n for iteration n.
struct SubsetSchedule {
  std::function<std::vector<PairId>(std::size_t iteration, Rng& rng)> select;
};

/// Single stream of experience: Y_n = {(S_n, A_n)} with A_n drawn from the
/// behavior policy; the stream then moves to the sampled successor.
struct OffPolicyStream {
  StationaryPolicy behavior;
  StateId state = 0;
};

using UpdateSource = std::variant<Synchronous, SubsetSchedule, OffPolicyStream>;

struct LearnerState {
  TabularQ q;
  std::vector<std::size_t> counts;  // nu_n per pair
  double rbar = 0.0;                // reward-rate estimate (Differential Q-learning)
  std::size_t n = 0;                // iterations performed

  static LearnerState initial(TabularQ q0, double rbar0 = 0.0);
};

/// What one iteration touched, for tracing.
struct StepRecord {
  std::vector<PairId> updated;
  std::vector<Sample> samples;
  double f_value = 0.0;
};

/// Randomness for iteration n and pair p is master.split(n, p); behavior
/// actions use master.split(n, kBehaviorStream). Two learners driven by the
/// same master therefore see identical transitions.
inline constexpr std::uint64_t kBehaviorStream = 0xB5AD4ECEDA1CE2A9ULL;

/// One iteration of RVI Q-learning:
/// Q(i) += alpha_{nu(i)} (R - f(Q_n) + max Q_n(S', .) - Q_n(i)) for i in Y_n,
/// all terms evaluated at the pre-update iterate.
StepRecord step(LearnerState& learner, const Model& model, const FFunction& f, const StepSchedule& schedule,
                UpdateSource& source, const Rng& master);

/// One iteration of Differential Q-learning with its explicit rate estimate.
StepRecord differential_q_step(LearnerState& learner, const Model& model, double eta, const StepSchedule& schedule,
                               UpdateSource& source, const Rng& master);

struct NoiseDecomposition {
  double martingale = 0.0;  // zero-mean part
  double bias = 0.0;        // identically zero for RVI Q-learning
};

/// Splits the sampled update target at one pair into its conditional mean
/// and the zero-mean remainder.
NoiseDecomposition decompose_noise(const Model& model, const ExpectedQuantities& eq, std::span<const double> q,
                                   PairId pair, const Sample& sample);

}  // namespace arl
