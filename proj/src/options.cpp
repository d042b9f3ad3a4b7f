#include "arl/options.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arl/errors.hpp"
#include "arl/model_io.hpp"

namespace arl {
namespace {

using nlohmann::json;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Option-policy transition matrix and one-step expected reward.
struct OptionKernel {
  Eigen::MatrixXd step;         // P_o(s, s')
  Eigen::VectorXd step_reward;  // sum_a pi r_sa
};

OptionKernel option_kernel(const Model& mdp, const ExpectedQuantities& eq, const OptionSet& options, OptionId o) {
  const auto n = static_cast<Eigen::Index>(mdp.num_states());
  OptionKernel k{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (PairId p : mdp.pairs_at(s)) {
      const double w = options.pi(s, o, mdp.pair_action(p));
      if (w == 0.0) continue;
      k.step_reward(static_cast<Eigen::Index>(s)) += w * eq.reward[p];
      k.step.row(static_cast<Eigen::Index>(s)) += w * eq.transition.row(static_cast<Eigen::Index>(p));
    }
  }
  return k;
}

double max_option_value(const OptionSet& options, std::span<const double> q, StateId s) {
  double best = -std::numeric_limits<double>::infinity();
  for (OptionId o = 0; o < options.num_options(); ++o) best = std::max(best, q[options.pair(s, o)]);
  return best;
}

std::vector<std::size_t> select_option_pairs(const OptionSet& options, OptionUpdateSource& source,
                                             std::size_t iteration, const Rng& master) {
  return std::visit(Overloaded{
                        [&](Synchronous&) {
                          std::vector<std::size_t> all(options.num_pairs());
                          for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                          return all;
                        },
                        [&](SubsetSchedule& sub) {
                          Rng rng = master.split(iteration, kBehaviorStream);
                          auto chosen = sub.select(iteration, rng);
                          if (chosen.empty()) throw Error(ErrorKind::ConfigError, "update schedule produced an empty Y_n");
                          std::sort(chosen.begin(), chosen.end());
                          chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
                          for (auto i : chosen) {
                            if (i >= options.num_pairs()) {
                              throw Error(ErrorKind::UnknownStateAction, "Y_n names an unknown state-option pair");
                            }
                          }
                          return chosen;
                        },
                        [&](OptionStream& stream) {
                          Rng rng = master.split(iteration, kBehaviorStream);
                          const auto o = static_cast<OptionId>(rng.categorical(stream.behavior.at(stream.state)));
                          return std::vector<std::size_t>{options.pair(stream.state, o)};
                        },
                    },
                    source);
}

std::vector<double> read_row(const json& row, const std::vector<std::string>& names, std::string_view where) {
  std::vector<double> out(names.size(), 0.0);
  if (!row.is_object()) throw Error(ErrorKind::ConfigError, std::string(where) + ": expected an object");
  for (const auto& [key, value] : row.items()) {
    auto it = std::find(names.begin(), names.end(), key);
    if (it == names.end()) throw Error(ErrorKind::ConfigError, std::string(where) + ": unknown action '" + key + "'");
    out[static_cast<std::size_t>(it - names.begin())] = value.get<double>();
  }
  return out;
}

}  // namespace

OptionSet::OptionSet(const Model& mdp, std::vector<std::string> names,
                     std::vector<std::vector<std::vector<double>>> policy, std::vector<std::vector<double>> termination)
    : names_(std::move(names)), policy_(std::move(policy)), termination_(std::move(termination)) {
  if (names_.empty()) throw Error(ErrorKind::ConfigError, "option set is empty");
  if (policy_.size() != names_.size() || termination_.size() != names_.size()) {
    throw Error(ErrorKind::ConfigError, "option tables do not match the number of options");
  }
  for (OptionId o = 0; o < names_.size(); ++o) {
    // Validate through StationaryPolicy so unavailable actions are caught.
    StationaryPolicy check(mdp, policy_[o]);
    if (termination_[o].size() != mdp.num_states()) {
      throw Error(ErrorKind::ConfigError, "option '" + names_[o] + "' needs a termination probability per state");
    }
    for (double b : termination_[o]) {
      if (!(b >= 0.0 && b <= 1.0)) {
        throw Error(ErrorKind::ConfigError, "option '" + names_[o] + "' has a termination probability outside [0, 1]");
      }
    }
  }
}

OptionSet OptionSet::primitive(const Model& mdp) {
  std::vector<std::string> names = mdp.action_names();
  std::vector<std::vector<std::vector<double>>> policy;
  std::vector<std::vector<double>> termination;
  for (ActionId a = 0; a < mdp.num_actions(); ++a) {
    std::vector<std::vector<double>> rows(mdp.num_states(), std::vector<double>(mdp.num_actions(), 0.0));
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (!mdp.available(s, a)) {
        throw Error(ErrorKind::ConfigError, "primitive options need every action available in every state");
      }
      rows[s][a] = 1.0;
    }
    policy.push_back(std::move(rows));
    termination.emplace_back(mdp.num_states(), 1.0);
  }
  return OptionSet(mdp, std::move(names), std::move(policy), std::move(termination));
}

OptionSet parse_options(const json& doc, const Model& mdp) {
  if (!doc.contains("options") || !doc.at("options").is_array()) {
    throw Error(ErrorKind::ConfigError, "options file: missing array 'options'");
  }
  std::vector<std::string> names;
  std::vector<std::vector<std::vector<double>>> policy;
  std::vector<std::vector<double>> termination;
  for (const auto& entry : doc.at("options")) {
    const std::string name = entry.value("name", "option" + std::to_string(names.size()));
    const std::string where = "option '" + name + "'";
    const json& pi = entry.at("pi");
    const json& beta = entry.at("beta");
    std::vector<std::vector<double>> rows(mdp.num_states());
    std::vector<double> stop(mdp.num_states(), 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      const std::string& sname = mdp.state_names()[s];
      if (pi.contains(sname)) {
        rows[s] = read_row(pi.at(sname), mdp.action_names(), where + " pi[" + sname + "]");
      } else if (pi.contains("*")) {
        rows[s] = read_row(pi.at("*"), mdp.action_names(), where + " pi[*]");
      } else {
        throw Error(ErrorKind::ConfigError, where + ": no policy row for state '" + sname + "'");
      }
      if (beta.is_number()) {
        stop[s] = beta.get<double>();
      } else if (beta.contains(sname)) {
        stop[s] = beta.at(sname).get<double>();
      } else if (beta.contains("*")) {
        stop[s] = beta.at("*").get<double>();
      } else {
        throw Error(ErrorKind::ConfigError, where + ": no termination probability for state '" + sname + "'");
      }
    }
    names.push_back(name);
    policy.push_back(std::move(rows));
    termination.push_back(std::move(stop));
  }
  return OptionSet(mdp, std::move(names), std::move(policy), std::move(termination));
}

OptionSet load_options(const std::filesystem::path& path, const Model& mdp) {
  return parse_options(read_json_file(resolve_data_path(path)), mdp);
}

TerminationAudit audit_termination(const Model& mdp, const OptionSet& options) {
  TerminationAudit audit;
  const std::size_t n = mdp.num_states();
  for (OptionId o = 0; o < options.num_options(); ++o) {
    // can_stop[s]: termination within k steps has positive probability.
    std::vector<bool> can_stop(n, false);
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<bool> next = can_stop;
      for (StateId s = 0; s < n; ++s) {
        if (next[s]) continue;
        for (PairId p : mdp.pairs_at(s)) {
          if (options.pi(s, o, mdp.pair_action(p)) == 0.0) continue;
          for (const auto& out : mdp.outcomes(p)) {
            if (options.beta(out.next, o) > 0.0 || can_stop[out.next]) next[s] = true;
          }
        }
      }
      can_stop = std::move(next);
    }
    for (StateId s = 0; s < n; ++s) {
      if (!can_stop[s]) {
        audit.passed = false;
        audit.failing.emplace_back(o, s);
      }
    }
  }
  return audit;
}

OptionOutcome execute_option(const Model& mdp, const OptionSet& options, StateId s, OptionId o, Rng& rng,
                             std::size_t cap, bool keep_trace) {
  OptionOutcome out{s, 0.0, 0, {}};
  StateId current = s;
  while (true) {
    if (out.duration >= cap) {
      throw Error(ErrorKind::TerminationCapExceeded, "option '" + options.names()[o] + "' did not terminate within " +
                                                         std::to_string(cap) + " steps");
    }
    const auto a = static_cast<ActionId>(rng.categorical(options.pi_row(current, o)));
    const Sample smp = mdp.sample(mdp.pair(current, a), rng);
    out.cumulative_reward += smp.reward;
    ++out.duration;
    if (keep_trace) out.trace.push_back({current, a, smp.reward});
    current = smp.next;
    const double b = options.beta(current, o);
    if (b >= 1.0 || (b > 0.0 && rng.uniform() < b)) break;
  }
  out.final_state = current;
  return out;
}

InducedQuantities exact_option_quantities(const Model& mdp, const OptionSet& options) {
  const auto eq = expected_quantities(mdp);
  const std::size_t n = mdp.num_states();
  const auto ni = static_cast<Eigen::Index>(n);
  InducedQuantities out;
  out.reward.assign(options.num_pairs(), 0.0);
  out.duration.assign(options.num_pairs(), 0.0);
  out.transition = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(options.num_pairs()), ni);

  for (OptionId o = 0; o < options.num_options(); ++o) {
    const auto kernel = option_kernel(mdp, eq, options, o);
    Eigen::VectorXd keep(ni), stop(ni);
    for (StateId s = 0; s < n; ++s) {
      stop(static_cast<Eigen::Index>(s)) = options.beta(s, o);
      keep(static_cast<Eigen::Index>(s)) = 1.0 - options.beta(s, o);
    }
    const Eigen::MatrixXd cont = kernel.step * keep.asDiagonal();
    const Eigen::MatrixXd term = kernel.step * stop.asDiagonal();
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(ni, ni) - cont;
    const auto lu = system.fullPivLu();
    if (lu.rank() < ni) {
      throw Error(ErrorKind::SingularSystem,
                  "option '" + options.names()[o] + "' has a closed continuation set and may never terminate");
    }
    const Eigen::VectorXd duration = lu.solve(Eigen::VectorXd::Ones(ni));
    const Eigen::VectorXd reward = lu.solve(kernel.step_reward);
    Eigen::MatrixXd landing = lu.solve(term);

    // Exact support of the landing distribution, so numerically tiny
    // entries never create spurious edges for chain analysis.
    for (StateId s = 0; s < n; ++s) {
      std::vector<bool> visited(n, false);
      std::vector<StateId> frontier;
      for (StateId t = 0; t < n; ++t) {
        if (kernel.step(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) > 0.0) {
          visited[t] = true;
          frontier.push_back(t);
        }
      }
      while (!frontier.empty()) {
        const StateId x = frontier.back();
        frontier.pop_back();
        if (options.beta(x, o) >= 1.0) continue;
        for (StateId t = 0; t < n; ++t) {
          if (!visited[t] && kernel.step(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(t)) > 0.0) {
            visited[t] = true;
            frontier.push_back(t);
          }
        }
      }
      double total = 0.0;
      for (StateId t = 0; t < n; ++t) {
        auto& v = landing(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
        if (!visited[t] || options.beta(t, o) == 0.0 || v < 0.0) v = 0.0;
        total += v;
      }
      const auto row = static_cast<Eigen::Index>(options.pair(s, o));
      out.transition.row(row) = landing.row(static_cast<Eigen::Index>(s)) / total;
      out.duration[options.pair(s, o)] = duration(static_cast<Eigen::Index>(s));
      out.reward[options.pair(s, o)] = reward(static_cast<Eigen::Index>(s));
    }
  }
  return out;
}

Model induced_smdp(const Model& mdp, const OptionSet& options, const InducedQuantities& quantities) {
  ModelSpec spec;
  spec.name = mdp.name() + "/options";
  spec.states = mdp.state_names();
  spec.actions = options.names();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (OptionId o = 0; o < options.num_options(); ++o) {
      const std::size_t i = options.pair(s, o);
      for (StateId t = 0; t < mdp.num_states(); ++t) {
        const double p = quantities.transition(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
        if (p > 0.0) spec.transitions.push_back({s, o, t, quantities.reward[i], quantities.duration[i], p});
      }
    }
  }
  return Model::from_spec(spec);
}

InterOptionLearner InterOptionLearner::initial(TabularQ q0, double initial_duration) {
  if (!(initial_duration > 0.0)) throw Error(ErrorKind::ConfigError, "initial duration estimates must be positive");
  InterOptionLearner l;
  l.duration.assign(q0.size(), initial_duration);
  l.counts.assign(q0.size(), 0);
  l.q = std::move(q0);
  return l;
}

OptionStepRecord inter_option_step(InterOptionLearner& learner, const Model& mdp, const OptionSet& options,
                                   const FFunction& f, const StepSchedule& alpha, const StepSchedule& beta,
                                   OptionUpdateSource& source, const Rng& master, std::size_t cap) {
  if (learner.q.size() != options.num_pairs()) {
    throw Error(ErrorKind::ConfigError, "learner does not match the option set");
  }
  OptionStepRecord record;
  record.updated = select_option_pairs(options, source, learner.n, master);
  record.f_value = f(learner.q);

  std::vector<double> vmax(options.num_states());
  for (StateId s = 0; s < vmax.size(); ++s) vmax[s] = max_option_value(options, learner.q, s);

  std::vector<double> dq, dl;
  for (auto i : record.updated) {
    const StateId s = i / options.num_options();
    const OptionId o = i % options.num_options();
    Rng rng = master.split(learner.n, i);
    auto outcome = execute_option(mdp, options, s, o, rng, cap, false);
    const double length = learner.duration[i];
    const double a = alpha.at_count(learner.counts[i] + 1);
    const double b = beta.at_count(learner.counts[i] + 1);
    dq.push_back(a * (outcome.cumulative_reward - length * record.f_value + vmax[outcome.final_state] - learner.q[i]) /
                 length);
    dl.push_back(b * (static_cast<double>(outcome.duration) - length));
    record.outcomes.push_back(std::move(outcome));
  }
  for (std::size_t k = 0; k < record.updated.size(); ++k) {
    const auto i = record.updated[k];
    learner.q[i] += dq[k];
    learner.duration[i] += dl[k];
    ++learner.counts[i];
  }
  ++learner.n;
  if (auto* stream = std::get_if<OptionStream>(&source)) stream->state = record.outcomes.front().final_state;
  return record;
}

IntraOptionLearner IntraOptionLearner::initial(TabularQ q0) {
  IntraOptionLearner l;
  l.counts.assign(q0.size(), 0);
  l.q = std::move(q0);
  return l;
}

std::vector<double> continuation_values(const OptionSet& options, std::span<const double> q) {
  std::vector<double> u(options.num_pairs());
  for (StateId s = 0; s < options.num_states(); ++s) {
    const double best = max_option_value(options, q, s);
    for (OptionId o = 0; o < options.num_options(); ++o) {
      const double b = options.beta(s, o);
      u[options.pair(s, o)] = (1.0 - b) * q[options.pair(s, o)] + b * best;
    }
  }
  return u;
}

IntraOptionStepRecord intra_option_step(IntraOptionLearner& learner, const Model& mdp, const OptionSet& options,
                                        const FFunction& f, const StepSchedule& alpha, const IntraOptionConfig& config,
                                        const Rng& master) {
  if (learner.q.size() != options.num_pairs()) {
    throw Error(ErrorKind::ConfigError, "learner does not match the option set");
  }
  if (!(config.epsilon > 0.0 && config.epsilon < 1.0)) {
    throw Error(ErrorKind::ConfigError, "epsilon must lie in (0, 1)");
  }
  std::vector<StateId> states;
  if (config.state_selector) {
    Rng rng = master.split(learner.n, kBehaviorStream);
    states = config.state_selector(learner.n, rng);
  } else {
    states.resize(mdp.num_states());
    for (StateId s = 0; s < states.size(); ++s) states[s] = s;
  }
  if (states.empty()) throw Error(ErrorKind::ConfigError, "state selector produced an empty X_n");

  IntraOptionStepRecord record;
  record.f_value = f(learner.q);
  const auto u = continuation_values(options, learner.q);
  std::vector<double> dq;

  for (StateId s : states) {
    const auto& b = config.behavior.row(s);
    for (double w : b) {
      if (w > 0.0 && w < config.epsilon) {
        throw Error(ErrorKind::InvalidBehavior, "behavior probability below epsilon at state " + std::to_string(s));
      }
    }
    auto continuous = [&](OptionId o) {
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        if (options.pi(s, o, a) > 0.0 && b[a] == 0.0) return false;
      }
      return true;
    };
    std::vector<OptionId> chosen;
    if (config.option_selector) {
      chosen = config.option_selector(s);
      for (OptionId o : chosen) {
        if (!continuous(o)) {
          throw Error(ErrorKind::AbsContinuityViolation, "option '" + options.names().at(o) +
                                                             "' is not absolutely continuous w.r.t. the behavior at state " +
                                                             std::to_string(s));
        }
      }
    } else {
      for (OptionId o = 0; o < options.num_options(); ++o) {
        if (continuous(o)) chosen.push_back(o);
      }
    }
    if (chosen.empty()) {
      throw Error(ErrorKind::InvalidBehavior, "no option is absolutely continuous w.r.t. the behavior at state " +
                                                  std::to_string(s));
    }

    Rng action_rng = master.split(learner.n, kBehaviorStream).split(s);
    const auto a = static_cast<ActionId>(action_rng.categorical(b));
    Rng rng = master.split(learner.n, s);
    const Sample smp = mdp.sample(mdp.pair(s, a), rng);
    for (OptionId o : chosen) {
      const std::size_t i = options.pair(s, o);
      const double rho = options.pi(s, o, a) / b[a];
      const double step = alpha.at_count(learner.counts[i] + 1);
      record.updated.push_back(i);
      record.ratios.push_back(rho);
      dq.push_back(step * rho * (smp.reward - record.f_value + u[options.pair(smp.next, o)] - learner.q[i]));
    }
  }
  for (std::size_t k = 0; k < record.updated.size(); ++k) {
    learner.q[record.updated[k]] += dq[k];
    ++learner.counts[record.updated[k]];
  }
  ++learner.n;
  return record;
}

OptionResiduals option_residuals(const Model& mdp, const OptionSet& options, const InducedQuantities& quantities,
                                 std::span<const double> q, double rbar) {
  OptionResiduals out;
  const std::size_t n = mdp.num_states();
  std::vector<double> vmax(n);
  for (StateId s = 0; s < n; ++s) vmax[s] = max_option_value(options, q, s);
  const Eigen::Map<const Eigen::VectorXd> v(vmax.data(), static_cast<Eigen::Index>(n));
  const Eigen::VectorXd landing = quantities.transition * v;
  for (std::size_t i = 0; i < options.num_pairs(); ++i) {
    const double rhs = quantities.reward[i] - rbar * quantities.duration[i] + landing(static_cast<Eigen::Index>(i));
    out.inter = std::max(out.inter, std::abs(q[i] - rhs));
  }

  const auto eq = expected_quantities(mdp);
  const auto u = continuation_values(options, q);
  for (StateId s = 0; s < n; ++s) {
    for (OptionId o = 0; o < options.num_options(); ++o) {
      double rhs = 0.0;
      for (PairId p : mdp.pairs_at(s)) {
        const double w = options.pi(s, o, mdp.pair_action(p));
        if (w == 0.0) continue;
        double next = 0.0;
        for (StateId t = 0; t < n; ++t) {
          next += eq.transition(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(t)) * u[options.pair(t, o)];
        }
        rhs += w * (eq.reward[p] - rbar + next);
      }
      out.intra = std::max(out.intra, std::abs(q[options.pair(s, o)] - rhs));
    }
  }
  return out;
}

std::vector<OptionId> greedy_options(const OptionSet& options, std::span<const double> q) {
  std::vector<OptionId> out(options.num_states());
  for (StateId s = 0; s < out.size(); ++s) {
    OptionId best = 0;
    for (OptionId o = 1; o < options.num_options(); ++o) {
      if (q[options.pair(s, o)] > q[options.pair(s, best)]) best = o;
    }
    out[s] = best;
  }
  return out;
}

}  // namespace arl
