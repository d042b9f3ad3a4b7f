#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "arl/chain.hpp"
#include "arl/model.hpp"
#include "arl/model_io.hpp"
#include "arl/options.hpp"
#include "arl/rng.hpp"

namespace arl::testing {

inline Model bundled(const std::string& name) { return load_model("models/" + name + ".json"); }

inline OptionSet bundled_options(const std::string& name, const Model& mdp) {
  return load_options("options/" + name + ".json", mdp);
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

inline std::size_t random_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
}

inline std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

/// Every action in every state, each row spread over a random subset of
/// successors with random integer rewards.
inline Model random_dense_mdp(Rng& rng, std::size_t states, std::size_t actions, const std::string& name = "random") {
  ModelSpec spec;
  spec.name = name;
  spec.states = numbered("s", states);
  spec.actions = numbered("a", actions);
  for (StateId s = 0; s < states; ++s) {
    for (ActionId a = 0; a < actions; ++a) {
      std::vector<double> w(states, 0.0);
      const std::size_t support = 1 + random_index(rng, std::min<std::size_t>(states, 3));
      for (std::size_t k = 0; k < support; ++k) w[random_index(rng, states)] += 0.2 + rng.uniform();
      double total = 0.0;
      for (double x : w) total += x;
      const double reward = std::round(8.0 * rng.uniform() - 4.0);
      // Assign the rounding remainder to the last successor so the row sums
      // to one exactly enough for the loader.
      double used = 0.0;
      StateId last = 0;
      for (StateId t = 0; t < states; ++t) {
        if (w[t] > 0.0) last = t;
      }
      for (StateId t = 0; t < states; ++t) {
        if (w[t] <= 0.0) continue;
        const double p = t == last ? 1.0 - used : w[t] / total;
        used += p;
        spec.transitions.push_back({s, a, t, reward, 1.0, p});
      }
    }
  }
  return Model::from_spec(spec);
}

/// Random model drawn until it is weakly communicating; rewards optionally
/// zeroed. Some states are made transient by construction: a random set of
/// "entry" states only lead forward into the closed part.
inline Model random_weakly_communicating(Rng& rng, std::size_t max_states, bool zero_rewards) {
  for (;;) {
    const std::size_t n = 2 + random_index(rng, max_states - 1);
    const std::size_t m = 1 + random_index(rng, 2);
    const std::size_t transient = random_index(rng, n - 1);  // states 0..transient-1
    ModelSpec spec;
    spec.name = "random_wc";
    spec.states = numbered("s", n);
    spec.actions = numbered("a", m);
    for (StateId s = 0; s < n; ++s) {
      for (ActionId a = 0; a < m; ++a) {
        // Transient states move to higher-numbered states only (including
        // the closed block); closed states stay within the closed block.
        const StateId lo = s < transient ? s + 1 : transient;
        const std::size_t width = n - lo;
        const StateId t1 = lo + random_index(rng, width);
        const StateId t2 = lo + random_index(rng, width);
        const double reward = zero_rewards ? 0.0 : std::round(6.0 * rng.uniform() - 3.0);
        if (t1 == t2) {
          spec.transitions.push_back({s, a, t1, reward, 1.0, 1.0});
        } else {
          spec.transitions.push_back({s, a, t1, reward, 1.0, 0.5});
          spec.transitions.push_back({s, a, t2, reward, 1.0, 0.5});
        }
      }
    }
    Model model = Model::from_spec(spec);
    const auto cls = classify(model, {.check_unichain = false});
    if (cls.weakly_communicating) return model;
  }
}

/// Random options over an MDP where every action is available everywhere:
/// random internal policies and termination probabilities in [0.2, 1].
inline OptionSet random_options(Rng& rng, const Model& mdp, std::size_t count) {
  const std::size_t S = mdp.num_states();
  const std::size_t A = mdp.num_actions();
  std::vector<std::string> names = numbered("o", count);
  std::vector<std::vector<std::vector<double>>> policy(count, std::vector<std::vector<double>>(S));
  std::vector<std::vector<double>> termination(count, std::vector<double>(S));
  for (OptionId o = 0; o < count; ++o) {
    for (StateId s = 0; s < S; ++s) {
      auto w = random_vector(rng, A, 0.0, 1.0);
      // Keep a few options deterministic so greedy ties are exercised.
      if (rng.uniform() < 0.3) {
        std::fill(w.begin(), w.end(), 0.0);
        w[random_index(rng, A)] = 1.0;
      }
      double total = 0.0;
      for (double x : w) total += x;
      for (double& x : w) x /= total;
      policy[o][s] = w;
      termination[o][s] = 0.2 + 0.8 * rng.uniform();
    }
  }
  return OptionSet(mdp, std::move(names), std::move(policy), std::move(termination));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace arl::testing
