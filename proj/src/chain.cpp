#include "arl/chain.hpp"

#include <algorithm>
#include <functional>

#include "arl/errors.hpp"

namespace arl {
namespace {

// Iterative Tarjan so deep chains cannot overflow the call stack.
std::vector<std::vector<std::size_t>> strongly_connected_components(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> components;
  std::size_t counter = 0;

  struct Frame {
    std::size_t node;
    std::size_t next_edge;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    std::vector<Frame> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.next_edge < adj[f.node].size()) {
        const std::size_t w = adj[f.node][f.next_edge++];
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.node] = std::min(low[f.node], index[w]);
        }
        continue;
      }
      const std::size_t v = f.node;
      frames.pop_back();
      if (!frames.empty()) low[frames.back().node] = std::min(low[frames.back().node], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w = 0;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
      }
    }
  }
  return components;
}

std::vector<double> stationary_distribution(const Eigen::MatrixXd& P, const std::vector<StateId>& members) {
  const auto k = static_cast<Eigen::Index>(members.size());
  if (k == 1) return {1.0};
  Eigen::MatrixXd A(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) A(i, j) = P(members[j], members[i]);
  }
  A -= Eigen::MatrixXd::Identity(k, k);
  A.row(k - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  rhs(k - 1) = 1.0;
  const Eigen::VectorXd pi = A.fullPivLu().solve(rhs);
  return {pi.data(), pi.data() + k};
}

}  // namespace

Eigen::MatrixXd state_transition_matrix(const Model& model, const StationaryPolicy& policy) {
  const auto n = static_cast<Eigen::Index>(model.num_states());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (StateId s = 0; s < model.num_states(); ++s) {
    for (PairId p : model.pairs_at(s)) {
      const double w = policy.prob(s, model.pair_action(p));
      if (w == 0.0) continue;
      for (const auto& o : model.outcomes(p)) P(s, o.next) += w * o.prob;
    }
  }
  return P;
}

Eigen::MatrixXd state_transition_matrix(const Model& model, const DeterministicPolicy& policy) {
  const auto n = static_cast<Eigen::Index>(model.num_states());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (StateId s = 0; s < model.num_states(); ++s) {
    const PairId p = model.pair(s, policy[s]);
    for (const auto& o : model.outcomes(p)) P(s, o.next) += o.prob;
  }
  return P;
}

ChainAnalysis analyze_chain(const Eigen::MatrixXd& P) {
  const auto n = static_cast<std::size_t>(P.rows());
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (P(i, j) > 0.0) adj[i].push_back(j);
    }
  }
  auto components = strongly_connected_components(adj);
  std::vector<std::size_t> comp_of(n);
  for (std::size_t c = 0; c < components.size(); ++c) {
    for (auto s : components[c]) comp_of[s] = c;
  }

  ChainAnalysis out;
  out.class_of.assign(n, -1);
  std::vector<bool> closed(components.size(), true);
  for (std::size_t s = 0; s < n; ++s) {
    for (auto t : adj[s]) {
      if (comp_of[t] != comp_of[s]) closed[comp_of[s]] = false;
    }
  }
  // Order classes by their smallest state for stable output.
  std::vector<std::size_t> order(components.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return components[a].front() < components[b].front(); });
  for (auto c : order) {
    if (!closed[c]) continue;
    const int k = static_cast<int>(out.recurrent_classes.size());
    for (auto s : components[c]) out.class_of[s] = k;
    out.stationary.push_back(stationary_distribution(P, components[c]));
    out.recurrent_classes.push_back(components[c]);
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (out.class_of[s] < 0) out.transient_states.push_back(s);
  }
  return out;
}

ChainAnalysis induce_chain(const Model& model, const StationaryPolicy& policy) {
  return analyze_chain(state_transition_matrix(model, policy));
}

std::string_view to_string(MdpClass c) noexcept {
  switch (c) {
    case MdpClass::Communicating: return "Communicating";
    case MdpClass::WeaklyCommunicating: return "WeaklyCommunicating";
    case MdpClass::Unichain: return "Unichain";
    case MdpClass::Multichain: return "Multichain";
  }
  return "Unknown";
}

MdpClass Classification::primary() const noexcept {
  if (unichain.value_or(false)) return MdpClass::Unichain;
  if (communicating) return MdpClass::Communicating;
  if (weakly_communicating) return MdpClass::WeaklyCommunicating;
  return MdpClass::Multichain;
}

Classification classify(const Model& model, const ClassifyOptions& options) {
  Classification out;
  const std::size_t n = model.num_states();
  const auto chain = induce_chain(model, StationaryPolicy::uniform(model));

  if (chain.recurrent_classes.size() == 1) {
    const auto& closed = chain.recurrent_classes.front();
    out.communicating = closed.size() == n;

    // A state outside S^o is recurrent under some deterministic policy iff it
    // lies in a nonempty set C outside S^o where every member has an action
    // whose successors all stay in C. The largest such C is the greatest
    // fixed point of the pruning below; weak communication means it is empty.
    std::vector<bool> candidate(n, true);
    for (auto s : closed) candidate[s] = false;
    bool changed = true;
    while (changed) {
      changed = false;
      for (StateId s = 0; s < n; ++s) {
        if (!candidate[s]) continue;
        bool keeps = false;
        for (PairId p : model.pairs_at(s)) {
          bool inside = true;
          for (const auto& o : model.outcomes(p)) inside = inside && candidate[o.next];
          if (inside) {
            keeps = true;
            break;
          }
        }
        if (!keeps) {
          candidate[s] = false;
          changed = true;
        }
      }
    }
    out.weakly_communicating = std::none_of(candidate.begin(), candidate.end(), [](bool b) { return b; });
    if (out.weakly_communicating) out.closed_class = closed;
  }

  if (options.check_unichain) {
    if (!out.weakly_communicating) {
      out.unichain = false;
    } else {
      bool single = true;
      for_each_deterministic_policy(model, options.cap, [&](const DeterministicPolicy& pol) {
        single = analyze_chain(state_transition_matrix(model, pol)).recurrent_classes.size() == 1;
        return single;
      });
      out.unichain = single;
    }
  }
  return out;
}

}  // namespace arl
