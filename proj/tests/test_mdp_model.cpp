#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "arl/chain.hpp"
#include "arl/errors.hpp"
#include "arl/model.hpp"
#include "arl/model_io.hpp"
#include "arl/policy.hpp"
#include "support.hpp"

using namespace arl;
using arl::testing::bundled;

namespace {

ModelSpec two_state_spec() {
  ModelSpec spec;
  spec.name = "tiny";
  spec.states = {"x", "y"};
  spec.actions = {"a"};
  spec.transitions = {{0, 0, 1, 1.0, 1.0, 1.0}, {1, 0, 0, 0.0, 1.0, 1.0}};
  return spec;
}

void check_partition(const ChainAnalysis& chain, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& cls : chain.recurrent_classes) {
    for (StateId s : cls) ++seen[s];
  }
  for (StateId s : chain.transient_states) ++seen[s];
  for (std::size_t s = 0; s < n; ++s) CHECK(seen[s] == 1);
}

void check_stationarity(const ChainAnalysis& chain, const Eigen::MatrixXd& P) {
  for (std::size_t k = 0; k < chain.recurrent_classes.size(); ++k) {
    const auto& cls = chain.recurrent_classes[k];
    for (StateId j : cls) {
      double flow = 0.0;
      for (std::size_t i = 0; i < cls.size(); ++i) flow += chain.stationary[k][i] * P(cls[i], j);
      const auto pos = std::find(cls.begin(), cls.end(), j) - cls.begin();
      CHECK(std::abs(flow - chain.stationary[k][pos]) <= 1e-10);
    }
  }
}

std::set<std::set<StateId>> class_set(const ChainAnalysis& chain) {
  std::set<std::set<StateId>> out;
  for (const auto& cls : chain.recurrent_classes) out.insert(std::set<StateId>(cls.begin(), cls.end()));
  return out;
}

}  // namespace

TEST_SUITE("mdp_model") {
  TEST_CASE("bundled models validate cleanly") {
    for (const std::string name : {"ex2_1_a", "ex2_1_b", "ex2_1_c", "fig7_a", "fig7_b", "ex5_1", "options3"}) {
      CAPTURE(name);
      CHECK(validate_model(bundled(name)).empty());
    }
  }

  TEST_CASE("a short row is reported with its state and action") {
    auto spec = two_state_spec();
    spec.transitions[0].prob = 0.9;
    const auto found = validate_model(spec);
    REQUIRE(found.size() == 1);
    CHECK(found[0].check == "row sum");
    CHECK(found[0].state == StateId{0});
    CHECK(found[0].action == ActionId{0});
    CHECK_THROWS_AS(Model::from_spec(spec), Error);
  }

  TEST_CASE("a zero holding time violates the holding-time bound") {
    auto spec = two_state_spec();
    spec.transitions[1].holding = 0.0;
    const auto found = validate_model(spec);
    REQUIRE(found.size() == 1);
    CHECK(found[0].check == "holding-time bound");
    CHECK(found[0].state == StateId{1});
  }

  TEST_CASE("negative probabilities and dangling states are rejected") {
    auto spec = two_state_spec();
    spec.states.push_back("z");
    spec.transitions.push_back({0, 0, 2, 0.0, 1.0, -0.1});
    const auto found = validate_model(spec);
    std::set<std::string> checks;
    for (const auto& v : found) checks.insert(v.check);
    CHECK(checks.contains("nonnegative probability"));
    CHECK(checks.contains("available action"));
  }

  TEST_CASE("model files round-trip through JSON") {
    const Model m = bundled("fig7_b");
    const Model back = model_from_json(model_to_json(m));
    REQUIRE(back.num_pairs() == m.num_pairs());
    for (PairId p = 0; p < m.num_pairs(); ++p) {
      CHECK(back.pair_label(p) == m.pair_label(p));
      CHECK(back.outcomes(p).size() == m.outcomes(p).size());
    }
  }

  TEST_CASE("malformed model JSON is rejected with the source name") {
    const auto doc = nlohmann::json::parse(R"({"states":["a"],"actions":["x"],"transitions":[{"s":"a","a":"x","s2":"b","p":1,"r":0}]})");
    try {
      (void)model_from_json(doc, "broken.json");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("broken.json") != std::string::npos);
    }
  }

  TEST_CASE("ex2_1_a offers a single action in state 1") {
    const Model m = bundled("ex2_1_a");
    CHECK(m.num_pairs() == 3);
    CHECK_FALSE(m.available(0, *m.find_action("solid")));
    CHECK(m.find_pair("1/dashed").has_value());
  }

  TEST_CASE("always-solid on the communicating two-state model gives two classes") {
    const Model m = bundled("fig7_a");
    const auto solid = *m.find_action("solid");
    const DeterministicPolicy det(m.num_states(), solid);
    const auto chain = induce_chain(m, StationaryPolicy::from_deterministic(m, det));
    CHECK(class_set(chain) == std::set<std::set<StateId>>{{0}, {1}});
    CHECK(chain.transient_states.empty());
  }

  TEST_CASE("the uniform policy on ex2_1_b forms a single class") {
    const Model m = bundled("ex2_1_b");
    const auto chain = induce_chain(m, StationaryPolicy::uniform(m));
    CHECK(class_set(chain) == std::set<std::set<StateId>>{{0, 1}});
  }

  TEST_CASE("an identity chain makes every state its own class") {
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(4, 4);
    const auto chain = analyze_chain(P);
    CHECK(chain.recurrent_classes.size() == 4);
    CHECK(chain.transient_states.empty());
    check_partition(chain, 4);
  }

  TEST_CASE("classification of the bundled examples") {
    const auto a = classify(bundled("ex2_1_a"));
    CHECK(a.primary() == MdpClass::Unichain);

    const auto b = classify(bundled("ex2_1_b"));
    CHECK(b.communicating);
    CHECK(b.unichain == false);
    CHECK(b.primary() == MdpClass::Communicating);

    const auto c = classify(bundled("fig7_b"));
    CHECK_FALSE(c.communicating);
    CHECK(c.weakly_communicating);
    CHECK(c.closed_class == std::vector<StateId>{1, 2});
    CHECK(c.primary() == MdpClass::WeaklyCommunicating);
  }

  TEST_CASE("a model with two disjoint closed sets is multichain") {
    ModelSpec spec;
    spec.name = "split";
    spec.states = {"x", "y"};
    spec.actions = {"a"};
    spec.transitions = {{0, 0, 0, 0.0, 1.0, 1.0}, {1, 0, 1, 0.0, 1.0, 1.0}};
    const auto cls = classify(Model::from_spec(spec));
    CHECK_FALSE(cls.weakly_communicating);
    CHECK(cls.primary() == MdpClass::Multichain);
  }

  TEST_CASE("the unichain check is capped") {
    Rng rng(3);
    const Model m = arl::testing::random_dense_mdp(rng, 6, 3);
    CHECK_THROWS_AS(classify(m, {.check_unichain = true, .cap = 10}), Error);
    CHECK_NOTHROW(classify(m, {.check_unichain = false, .cap = 10}));
  }

  TEST_CASE("unichain models are weakly communicating when the unichain check is skipped") {
    Rng rng(11);
    int unichain_seen = 0;
    for (int trial = 0; trial < 60; ++trial) {
      const Model m = arl::testing::random_dense_mdp(rng, 2 + trial % 4, 2);
      const auto full = classify(m);
      if (full.unichain == true) {
        ++unichain_seen;
        CHECK(classify(m, {.check_unichain = false}).weakly_communicating);
      }
    }
    CHECK(unichain_seen > 0);
  }

  TEST_CASE("chain partition and stationarity on random policies") {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 2 + trial % 5;
      const Model m = arl::testing::random_dense_mdp(rng, n, 2);
      std::vector<std::vector<double>> probs(n, std::vector<double>(2));
      for (auto& row : probs) {
        const double p = rng.uniform() < 0.3 ? 1.0 : rng.uniform();
        row = {p, 1.0 - p};
      }
      const StationaryPolicy pol(m, probs);
      const auto P = state_transition_matrix(m, pol);
      const auto chain = analyze_chain(P);
      check_partition(chain, n);
      check_stationarity(chain, P);
    }
  }

  TEST_CASE("a point-mass row always yields its outcome") {
    const Model m = bundled("ex2_1_c");
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
      const auto s = sample_transition(m, 0, *m.find_action("dashed"), rng);
      CHECK(s.next == 1);
      CHECK(s.reward == 0.0);
      CHECK(s.holding == 1.0);
    }
  }

  TEST_CASE("unknown state-action pairs are reported") {
    const Model m = bundled("ex2_1_a");
    Rng rng(1);
    try {
      (void)sample_transition(m, 0, *m.find_action("solid"), rng);
      FAIL("expected UnknownStateAction");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnknownStateAction);
    }
    CHECK_THROWS_AS(sample_transition(m, 7, 0, rng), Error);
  }

  TEST_CASE("leaving the transient state happens one time in ten") {
    const Model m = bundled("fig7_b");
    Rng rng(2024);
    const auto solid = *m.find_action("solid");
    constexpr int kDraws = 100000;
    int to_one = 0;
    for (int i = 0; i < kDraws; ++i) {
      const auto s = sample_transition(m, 0, solid, rng);
      CHECK(s.reward == -5.0);
      if (s.next == 1) ++to_one;
    }
    const double freq = static_cast<double>(to_one) / kDraws;
    CHECK(std::abs(freq - 0.1) <= 0.01);
  }

  TEST_CASE("sampling is reproducible for a fixed seed") {
    const Model m = bundled("fig7_b");
    Rng a(77);
    Rng b(77);
    for (int i = 0; i < 1000; ++i) {
      const auto x = sample_transition(m, 0, 1, a);
      const auto y = sample_transition(m, 0, 1, b);
      CHECK(x.next == y.next);
    }
  }

  TEST_CASE("empirical kernel passes a chi-square sanity test") {
    Rng gen(9);
    const Model m = arl::testing::random_dense_mdp(gen, 5, 2);
    Rng rng(31);
    constexpr int kDraws = 100000;
    for (PairId p = 0; p < m.num_pairs(); ++p) {
      const auto outcomes = m.outcomes(p);
      std::map<StateId, int> counts;
      for (int i = 0; i < kDraws; ++i) ++counts[m.sample(p, rng).next];
      double chi2 = 0.0;
      for (const auto& o : outcomes) {
        const double expected = o.prob * kDraws;
        const double diff = counts[o.next] - expected;
        chi2 += diff * diff / expected;
      }
      // 99.9% quantile of chi-square with at most 2 degrees of freedom.
      CHECK(chi2 < 13.82);
    }
  }

  TEST_CASE("child streams do not depend on sibling consumption") {
    const Rng master(123);
    Rng a = master.split(4, 9);
    Rng noise = master.split(4, 8);
    for (int i = 0; i < 50; ++i) (void)noise();
    Rng b = master.split(4, 9);
    for (int i = 0; i < 10; ++i) CHECK(a() == b());
  }

  TEST_CASE("policy enumeration respects the cap") {
    const Model m = bundled("ex5_1");
    CHECK(count_deterministic_policies(m) == 8);
    std::size_t visited = 0;
    for_each_deterministic_policy(m, 100, [&](const DeterministicPolicy&) {
      ++visited;
      return true;
    });
    CHECK(visited == 8);
    CHECK_THROWS_AS(for_each_deterministic_policy(m, 7, [](const DeterministicPolicy&) { return true; }), Error);
  }
}
