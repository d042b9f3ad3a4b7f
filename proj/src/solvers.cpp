#include "arl/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arl/errors.hpp"

namespace arl {

ExpectedQuantities expected_quantities(const Model& model) {
  ExpectedQuantities eq;
  const std::size_t np = model.num_pairs();
  eq.reward.assign(np, 0.0);
  eq.holding.assign(np, 0.0);
  eq.transition = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(model.num_states()));
  for (PairId p = 0; p < np; ++p) {
    for (const auto& o : model.outcomes(p)) {
      eq.reward[p] += o.prob * o.reward;
      eq.holding[p] += o.prob * o.holding;
      eq.transition(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(o.next)) += o.prob;
    }
  }
  return eq;
}

std::vector<double> state_max(const Model& model, std::span<const double> q) {
  std::vector<double> out(model.num_states(), -std::numeric_limits<double>::infinity());
  for (PairId p = 0; p < model.num_pairs(); ++p) {
    auto& m = out[model.pair_state(p)];
    m = std::max(m, q[p]);
  }
  return out;
}

DeterministicPolicy greedy_policy(const Model& model, std::span<const double> q) {
  DeterministicPolicy policy(model.num_states());
  for (StateId s = 0; s < model.num_states(); ++s) {
    const auto pairs = model.pairs_at(s);
    PairId best = pairs[0];
    for (PairId p : pairs) {
      if (q[p] > q[best]) best = p;
    }
    policy[s] = model.pair_action(best);
  }
  return policy;
}

std::vector<double> bellman_rhs(const Model& model, const ExpectedQuantities& eq, std::span<const double> q,
                                double rbar) {
  const auto v = state_max(model, q);
  const Eigen::Map<const Eigen::VectorXd> vmax(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::VectorXd next = eq.transition * vmax;
  std::vector<double> out(model.num_pairs());
  for (PairId p = 0; p < out.size(); ++p) {
    out[p] = eq.reward[p] - rbar * eq.holding[p] + next(static_cast<Eigen::Index>(p));
  }
  return out;
}

double optimality_residual(const Model& model, const ExpectedQuantities& eq, std::span<const double> q, double rbar) {
  const auto rhs = bellman_rhs(model, eq, q, rbar);
  double worst = 0.0;
  for (PairId p = 0; p < rhs.size(); ++p) worst = std::max(worst, std::abs(q[p] - rhs[p]));
  return worst;
}

double optimality_residual(const Model& model, std::span<const double> q, double rbar) {
  return optimality_residual(model, expected_quantities(model), q, rbar);
}

double span(std::span<const double> v) noexcept {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

double max_norm(std::span<const double> v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::vector<double> policy_gain(const Model& model, const ExpectedQuantities& eq, const DeterministicPolicy& policy) {
  const Eigen::MatrixXd P = state_transition_matrix(model, policy);
  const auto chain = analyze_chain(P);
  const std::size_t n = model.num_states();
  std::vector<double> gain(n, 0.0);

  for (std::size_t k = 0; k < chain.recurrent_classes.size(); ++k) {
    double reward = 0.0;
    double time = 0.0;
    const auto& members = chain.recurrent_classes[k];
    for (std::size_t i = 0; i < members.size(); ++i) {
      const PairId p = model.pair(members[i], policy[members[i]]);
      reward += chain.stationary[k][i] * eq.reward[p];
      time += chain.stationary[k][i] * eq.holding[p];
    }
    for (auto s : members) gain[s] = reward / time;
  }

  const auto& transient = chain.transient_states;
  if (!transient.empty()) {
    const auto m = static_cast<Eigen::Index>(transient.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) A(i, j) -= P(transient[i], transient[j]);
      for (StateId s = 0; s < n; ++s) {
        if (chain.class_of[s] >= 0) rhs(i) += P(transient[i], s) * gain[s];
      }
    }
    const Eigen::VectorXd g = A.partialPivLu().solve(rhs);
    for (Eigen::Index i = 0; i < m; ++i) gain[transient[i]] = g(i);
  }
  return gain;
}

bool GainResult::is_optimal(const DeterministicPolicy& policy) const {
  return std::find(optimal_policies.begin(), optimal_policies.end(), policy) != optimal_policies.end();
}

GainResult optimal_gain(const Model& model, std::size_t cap) {
  const auto eq = expected_quantities(model);
  const std::size_t n = model.num_states();
  std::vector<std::pair<DeterministicPolicy, std::vector<double>>> all;
  GainResult out;
  out.per_state_gain.assign(n, -std::numeric_limits<double>::infinity());
  for_each_deterministic_policy(model, cap, [&](const DeterministicPolicy& policy) {
    auto g = policy_gain(model, eq, policy);
    for (StateId s = 0; s < n; ++s) out.per_state_gain[s] = std::max(out.per_state_gain[s], g[s]);
    all.emplace_back(policy, std::move(g));
    return true;
  });
  for (auto& [policy, g] : all) {
    bool best_everywhere = true;
    for (StateId s = 0; s < n && best_everywhere; ++s) {
      best_everywhere = g[s] >= out.per_state_gain[s] - kGainTolerance;
    }
    if (best_everywhere) out.optimal_policies.push_back(policy);
  }
  const auto [lo, hi] = std::minmax_element(out.per_state_gain.begin(), out.per_state_gain.end());
  out.r_star = *hi;
  out.constant = *hi - *lo <= kGainTolerance;
  return out;
}

namespace {

RviResult run_rvi(const Model& model, const ExpectedQuantities& eq, const RviReference& reference,
                  std::span<const double> q0, const RviOptions& options, bool scaled) {
  if (q0.size() != model.num_pairs()) throw Error(ErrorKind::ConfigError, "initial Q has the wrong size");
  const bool general_f = std::holds_alternative<FFunction>(reference);
  RviResult out;
  out.q.assign(q0.begin(), q0.end());
  std::vector<double> delta(model.num_pairs());

  auto reference_value = [&](std::span<const double> q, const std::vector<double>& tgt) {
    if (general_f) return std::get<FFunction>(reference)(q);
    const PairId p = std::get<FixedPairReference>(reference).pair;
    const double raw = tgt[p] - q[p];
    return scaled ? raw / eq.holding[p] : raw;
  };

  for (std::size_t it = 0; it < options.max_iter; ++it) {
    const auto tgt = bellman_rhs(model, eq, out.q, 0.0);
    const double f = reference_value(out.q, tgt);
    if (options.record_traces) out.f_trace.push_back(f);
    if (options.record_traces && options.residual_rate) {
      double worst = 0.0;
      for (PairId p = 0; p < delta.size(); ++p) {
        worst = std::max(worst, std::abs(tgt[p] - *options.residual_rate * eq.holding[p] - out.q[p]));
      }
      out.residual_trace.push_back(worst);
    }
    for (PairId p = 0; p < delta.size(); ++p) {
      const double l = scaled ? eq.holding[p] : 1.0;
      delta[p] = options.alpha * (tgt[p] - l * f - out.q[p]) / l;
    }
    for (PairId p = 0; p < delta.size(); ++p) out.q[p] += delta[p];
    const double step_span = span(delta);
    if (options.record_traces) out.span_trace.push_back(step_span);
    out.iterations = it + 1;
    if (step_span <= options.tol && (!general_f || max_norm(delta) <= options.tol)) {
      out.converged = true;
      break;
    }
  }
  out.f_final = reference_value(out.q, bellman_rhs(model, eq, out.q, 0.0));
  if (options.record_traces) out.f_trace.push_back(out.f_final);
  return out;
}

}  // namespace

RviResult classical_rvi(const Model& model, const RviReference& reference, std::span<const double> q0,
                        const RviOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw Error(ErrorKind::InvalidAlpha, "classical RVI needs alpha in (0, 1)");
  }
  if (const auto* fixed = std::get_if<FixedPairReference>(&reference); fixed && fixed->pair >= model.num_pairs()) {
    throw Error(ErrorKind::UnknownStateAction, "reference pair out of range");
  }
  const auto eq = expected_quantities(model);
  return run_rvi(model, eq, reference, q0, options, false);
}

RviResult schweitzer_rvi(const Model& model, PairId reference, std::span<const double> q0, const RviOptions& options) {
  if (reference >= model.num_pairs()) throw Error(ErrorKind::UnknownStateAction, "reference pair out of range");
  const auto eq = expected_quantities(model);
  const double min_l = *std::min_element(eq.holding.begin(), eq.holding.end());
  if (!(options.alpha > 0.0 && options.alpha < min_l)) {
    throw Error(ErrorKind::InvalidAlpha, "Schweitzer RVI needs 0 < alpha < min l_sa = " + std::to_string(min_l));
  }
  return run_rvi(model, eq, FixedPairReference{reference}, q0, options, true);
}

}  // namespace arl
