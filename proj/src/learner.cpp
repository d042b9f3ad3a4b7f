#include "arl/learner.hpp"

#include <algorithm>

#include "arl/errors.hpp"

namespace arl {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<PairId> select_pairs(const Model& model, UpdateSource& source, std::size_t iteration, const Rng& master) {
  return std::visit(
      Overloaded{
          [&](Synchronous&) {
            std::vector<PairId> all(model.num_pairs());
            for (PairId p = 0; p < all.size(); ++p) all[p] = p;
            return all;
          },
          [&](SubsetSchedule& sub) {
            Rng rng = master.split(iteration, kBehaviorStream);
            auto chosen = sub.select(iteration, rng);
            if (chosen.empty()) throw Error(ErrorKind::ConfigError, "update schedule produced an empty Y_n");
            std::sort(chosen.begin(), chosen.end());
            chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
            for (PairId p : chosen) {
              if (p >= model.num_pairs()) throw Error(ErrorKind::UnknownStateAction, "Y_n names an unknown pair");
            }
            return chosen;
          },
          [&](OffPolicyStream& stream) {
            Rng rng = master.split(iteration, kBehaviorStream);
            const ActionId a = static_cast<ActionId>(rng.categorical(stream.behavior.row(stream.state)));
            const PairId p = model.pair(stream.state, a);
            if (p == kNoPair) throw Error(ErrorKind::InvalidBehavior, "behavior chose an unavailable action");
            return std::vector<PairId>{p};
          },
      },
      source);
}

void advance_stream(UpdateSource& source, const StepRecord& record) {
  if (auto* stream = std::get_if<OffPolicyStream>(&source)) stream->state = record.samples.front().next;
}

void check_dims(const LearnerState& learner, const Model& model) {
  if (learner.q.size() != model.num_pairs() || learner.counts.size() != model.num_pairs()) {
    throw Error(ErrorKind::ConfigError, "learner state does not match the model's pair count");
  }
}

}  // namespace

LearnerState LearnerState::initial(TabularQ q0, double rbar0) {
  LearnerState s;
  s.counts.assign(q0.size(), 0);
  s.q = std::move(q0);
  s.rbar = rbar0;
  return s;
}

StepRecord step(LearnerState& learner, const Model& model, const FFunction& f, const StepSchedule& schedule,
                UpdateSource& source, const Rng& master) {
  check_dims(learner, model);
  StepRecord record;
  record.updated = select_pairs(model, source, learner.n, master);
  record.f_value = f(learner.q);
  const auto vmax = state_max(model, learner.q);

  std::vector<double> increments;
  increments.reserve(record.updated.size());
  for (PairId p : record.updated) {
    Rng rng = master.split(learner.n, p);
    const Sample smp = model.sample(p, rng);
    record.samples.push_back(smp);
    const double alpha = schedule.at_count(learner.counts[p] + 1);
    increments.push_back(alpha * (smp.reward - record.f_value + vmax[smp.next] - learner.q[p]));
  }
  for (std::size_t k = 0; k < record.updated.size(); ++k) {
    const PairId p = record.updated[k];
    learner.q[p] += increments[k];
    ++learner.counts[p];
  }
  ++learner.n;
  advance_stream(source, record);
  return record;
}

StepRecord differential_q_step(LearnerState& learner, const Model& model, double eta, const StepSchedule& schedule,
                               UpdateSource& source, const Rng& master) {
  check_dims(learner, model);
  StepRecord record;
  record.updated = select_pairs(model, source, learner.n, master);
  record.f_value = learner.rbar;
  const auto vmax = state_max(model, learner.q);

  std::vector<double> increments;
  increments.reserve(record.updated.size());
  double rate_shift = 0.0;
  for (PairId p : record.updated) {
    Rng rng = master.split(learner.n, p);
    const Sample smp = model.sample(p, rng);
    record.samples.push_back(smp);
    const double alpha = schedule.at_count(learner.counts[p] + 1);
    const double td = smp.reward - learner.rbar + vmax[smp.next] - learner.q[p];
    increments.push_back(alpha * td);
    rate_shift += alpha * td;
  }
  for (std::size_t k = 0; k < record.updated.size(); ++k) {
    const PairId p = record.updated[k];
    learner.q[p] += increments[k];
    ++learner.counts[p];
  }
  learner.rbar += eta * rate_shift;
  ++learner.n;
  advance_stream(source, record);
  return record;
}

NoiseDecomposition decompose_noise(const Model& model, const ExpectedQuantities& eq, std::span<const double> q,
                                   PairId pair, const Sample& sample) {
  const auto vmax = state_max(model, q);
  double expected_next = 0.0;
  for (StateId s = 0; s < model.num_states(); ++s) {
    expected_next += eq.transition(static_cast<Eigen::Index>(pair), static_cast<Eigen::Index>(s)) * vmax[s];
  }
  return {(sample.reward - eq.reward[pair]) + (vmax[sample.next] - expected_next), 0.0};
}

}  // namespace arl
