#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "arl/chain.hpp"
#include "arl/errors.hpp"
#include "arl/ffunction.hpp"
#include "arl/learner.hpp"
#include "arl/schedule.hpp"
#include "arl/structure.hpp"
#include "support.hpp"

using namespace arl;
using arl::testing::bundled;

namespace {

// Initial values of the two-state experiments: Q0(1, .) = 4, Q0(2, .) = 2.
std::vector<double> two_state_start() { return {4.0, 4.0, 2.0, 2.0}; }

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

OffPolicyStream solid_dashed_stream(const Model& m, StateId start) {
  return OffPolicyStream{StationaryPolicy::state_independent(m, {0.8, 0.2}), start};
}

bool bitwise_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

TEST_SUITE("rvi_qlearning") {
  TEST_CASE("a solution with f equal to the optimal rate is a fixed point of the update") {
    const Model m = bundled("ex2_1_c");
    const auto oracle = bundled_oracle(m);
    REQUIRE(oracle);
    const auto f = FFunction::uniform_linear(m.num_pairs(), 0.25, 0.0);
    const auto q_star = oracle->constrained_member(0.4, f);
    REQUIRE(std::abs(f(q_star) - 1.0) <= 1e-12);
    auto learner = LearnerState::initial(q_star);
    UpdateSource source = Synchronous{};
    const Rng master(3);
    for (int n = 0; n < 5; ++n) step(learner, m, f, StepSchedule::harmonic(), source, master);
    CHECK(arl::testing::max_abs_diff(learner.q, q_star) <= 1e-12);
  }

  TEST_CASE("first update at (1, solid) from zero with the differential reference") {
    const Model m = bundled("fig7_a");
    // f(q) = sum(q) - 12: the reference induced by eta = 1, rbar0 = 0 and the
    // initial table whose entries sum to 12.
    const auto f = FFunction::differential(m.num_pairs(), 1.0, sum(two_state_start()), 0.0);
    CHECK(f(std::vector<double>(4, 0.0)) == -12.0);
    const PairId target = *m.find_pair("1/solid");
    auto learner = LearnerState::initial(std::vector<double>(4, 0.0));
    UpdateSource source = SubsetSchedule{[&](std::size_t, Rng&) { return std::vector<PairId>{target}; }};
    const auto rec = step(learner, m, f, StepSchedule::harmonic(), source, Rng(1));
    // Hand evaluation: reward 1, minus f(0) = -12, plus max over the
    // successor (all zero), minus the current value 0.
    const double by_hand = 1.0 - (-12.0) + 0.0 - 0.0;
    CHECK(learner.q[target] == by_hand);
    CHECK(by_hand == 13.0);
    CHECK(rec.f_value == -12.0);
    for (PairId p = 0; p < 4; ++p) {
      if (p != target) CHECK(learner.q[p] == 0.0);
    }
  }

  TEST_CASE("replaying with the same master reproduces the iterates") {
    const Model m = bundled("fig7_b");
    const auto f = FFunction::component(m.num_pairs(), *m.find_pair("1/dashed"));
    auto run = [&] {
      auto learner = LearnerState::initial(std::vector<double>(m.num_pairs(), 0.0));
      UpdateSource source = solid_dashed_stream(m, 0);
      for (int n = 0; n < 200; ++n) step(learner, m, f, StepSchedule::harmonic(), source, Rng(99));
      return learner.q;
    };
    CHECK(run() == run());
  }

  TEST_CASE("Differential Q-learning equals the general update with its reference function") {
    for (const std::string name : {"fig7_a", "fig7_b"}) {
      CAPTURE(name);
      const Model m = bundled(name);
      std::vector<double> q0(m.num_pairs(), 0.0);
      if (m.num_states() == 2) q0 = two_state_start();
      const double eta = 1.0;
      const double rbar0 = 0.3;
      const auto f = FFunction::differential(m.num_pairs(), eta, sum(q0), rbar0);
      auto diff = LearnerState::initial(q0, rbar0);
      auto general = LearnerState::initial(q0, rbar0);
      UpdateSource src_a = solid_dashed_stream(m, 0);
      UpdateSource src_b = solid_dashed_stream(m, 0);
      const Rng master(2024);
      double worst = 0.0;
      double worst_book = 0.0;
      for (int n = 0; n < 10000; ++n) {
        differential_q_step(diff, m, eta, StepSchedule::harmonic(), src_a, master);
        step(general, m, f, StepSchedule::harmonic(), src_b, master);
        worst = std::max(worst, arl::testing::max_abs_diff(diff.q, general.q));
        worst_book = std::max(worst_book, std::abs((diff.rbar - rbar0) - eta * (sum(diff.q) - sum(q0))));
      }
      CHECK(worst <= 1e-9);
      CHECK(worst_book <= 1e-9);
      CHECK(diff.counts == general.counts);
    }
  }

  TEST_CASE("rate bookkeeping holds for synchronous and subset updates") {
    Rng gen(41);
    const Model m = arl::testing::random_dense_mdp(gen, 4, 2);
    const auto q0 = arl::testing::random_vector(gen, m.num_pairs(), -1.0, 1.0);
    const double eta = 0.25;
    auto learner = LearnerState::initial(q0, 0.5);
    UpdateSource sync = Synchronous{};
    UpdateSource subset = SubsetSchedule{[&](std::size_t, Rng& rng) {
      return std::vector<PairId>{arl::testing::random_index(rng, m.num_pairs()),
                                 arl::testing::random_index(rng, m.num_pairs())};
    }};
    const Rng master(5);
    double worst = 0.0;
    for (int n = 0; n < 10000; ++n) {
      differential_q_step(learner, m, eta, StepSchedule::harmonic(), n % 3 == 0 ? sync : subset, master);
      worst = std::max(worst, std::abs((learner.rbar - 0.5) - eta * (sum(learner.q) - sum(q0))));
    }
    CHECK(worst <= 1e-9);
  }

  TEST_CASE("zero temporal-difference errors leave the learner unchanged") {
    const Model m = bundled("ex2_1_c");
    const auto oracle = bundled_oracle(m);
    const auto q = oracle->member(-0.5, 1.5);
    auto learner = LearnerState::initial(q, 1.0);
    UpdateSource source = Synchronous{};
    for (int n = 0; n < 3; ++n) differential_q_step(learner, m, 1.0, StepSchedule::harmonic(), source, Rng(1));
    CHECK(learner.q == q);
    CHECK(learner.rbar == 1.0);
  }

  TEST_CASE("untouched components stay bitwise identical and counts are exact") {
    Rng gen(77);
    const Model m = arl::testing::random_dense_mdp(gen, 5, 3);
    const auto f = FFunction::max_based(m.num_pairs(), 1.0, 0.0);
    auto learner = LearnerState::initial(arl::testing::random_vector(gen, m.num_pairs(), -1.0, 1.0));
    UpdateSource source = SubsetSchedule{[&](std::size_t, Rng& rng) {
      std::vector<PairId> y;
      for (PairId p = 0; p < m.num_pairs(); ++p) {
        if (rng.uniform() < 0.2) y.push_back(p);
      }
      if (y.empty()) y.push_back(0);
      return y;
    }};
    std::vector<std::size_t> expected(m.num_pairs(), 0);
    const Rng master(8);
    for (int n = 0; n < 2000; ++n) {
      const auto before = learner.q;
      const auto rec = step(learner, m, f, StepSchedule::harmonic(), source, master);
      std::vector<bool> touched(m.num_pairs(), false);
      for (PairId p : rec.updated) {
        touched[p] = true;
        ++expected[p];
      }
      for (PairId p = 0; p < m.num_pairs(); ++p) {
        if (!touched[p]) CHECK(bitwise_equal(before[p], learner.q[p]));
      }
    }
    CHECK(learner.counts == expected);
    CHECK(learner.n == 2000);
  }

  TEST_CASE("an empty update set is rejected") {
    const Model m = bundled("ex2_1_c");
    auto learner = LearnerState::initial(std::vector<double>(m.num_pairs(), 0.0));
    UpdateSource source = SubsetSchedule{[](std::size_t, Rng&) { return std::vector<PairId>{}; }};
    CHECK_THROWS_AS(step(learner, m, FFunction::component(m.num_pairs(), 0), StepSchedule::harmonic(), source, Rng(1)),
                    Error);
  }

  TEST_CASE("the stream leaves the transient state and its components freeze") {
    const Model m = bundled("fig7_b");
    const auto f = FFunction::component(m.num_pairs(), *m.find_pair("1/dashed"));
    auto learner = LearnerState::initial(std::vector<double>(m.num_pairs(), 0.0));
    OffPolicyStream stream = solid_dashed_stream(m, 0);
    UpdateSource source = stream;
    const Rng master(7);
    std::optional<std::size_t> last_visit;
    std::vector<std::vector<double>> history;
    for (std::size_t n = 0; n < 5000; ++n) {
      if (std::get<OffPolicyStream>(source).state == 0) last_visit = n;
      step(learner, m, f, StepSchedule::harmonic(), source, master);
      history.push_back({learner.q[0], learner.q[1]});
    }
    REQUIRE(last_visit);
    CHECK(*last_visit < 4000);
    for (std::size_t n = *last_visit; n < history.size(); ++n) CHECK(history[n] == history.back());
  }

  TEST_CASE("harmonic steps pass the schedule audit and inverse squares do not") {
    const auto good = check_step_schedule(StepSchedule::harmonic());
    CHECK(good.passed());
    const auto bad = check_step_schedule(parse_schedule("inverse-square"));
    CHECK_FALSE(bad.sum_diverges);
    CHECK_FALSE(bad.passed());
    const auto constant = check_step_schedule(parse_schedule("constant:value=0.1"));
    CHECK_FALSE(constant.square_summable);
    CHECK(check_step_schedule(parse_schedule("loglinear")).passed());
  }

  TEST_CASE("per-pair step sizes start at alpha_0") {
    const auto h = StepSchedule::harmonic();
    CHECK(h.at_count(1) == 1.0);
    CHECK(h.at_count(2) == 0.5);
    CHECK(h.at_count(10) == doctest::Approx(0.1));
    CHECK(parse_schedule("harmonic:c=2,d=3")(1) == doctest::Approx(0.5));
    CHECK_THROWS_AS(parse_schedule("harmonic:c=x"), Error);
    CHECK_THROWS_AS(parse_schedule("geometric"), Error);
  }

  TEST_CASE("asynchrony ratios under the experiment behavior approach one") {
    const Model m = bundled("fig7_a");
    const auto f = FFunction::differential(m.num_pairs(), 1.0, 12.0, 0.0);
    auto learner = LearnerState::initial(two_state_start());
    UpdateSource source = solid_dashed_stream(m, 0);
    const Rng master(4);
    const std::size_t total = 400000;
    CountTrajectory counts;
    counts.reserve(total + 1);
    counts.push_back(learner.counts);
    for (std::size_t n = 0; n < total; ++n) {
      step(learner, m, f, StepSchedule::harmonic(), source, master);
      counts.push_back(learner.counts);
    }
    const auto report = check_step_schedule(StepSchedule::harmonic(),
                                            {.horizon = 1'000'000, .counts = &counts, .audit_n = 100000});
    REQUIRE(report.audit);
    for (double r : report.audit->ratios) CHECK(std::abs(r - 1.0) <= 0.05);
    CHECK(report.async_counts_ok == true);
  }

  TEST_CASE("noise vanishes for deterministic transitions") {
    const Model m = bundled("ex2_1_c");
    const auto eq = expected_quantities(m);
    Rng rng(1);
    const auto q = arl::testing::random_vector(rng, m.num_pairs(), -3.0, 3.0);
    for (PairId p = 0; p < m.num_pairs(); ++p) {
      const auto smp = m.sample(p, rng);
      const auto noise = decompose_noise(m, eq, q, p, smp);
      CHECK(std::abs(noise.martingale) <= 1e-15);
      CHECK(noise.bias == 0.0);
    }
  }

  TEST_CASE("the martingale part has zero mean") {
    const Model m = bundled("fig7_b");
    const auto eq = expected_quantities(m);
    const PairId p = *m.find_pair("0/solid");
    const std::vector<double> zero(m.num_pairs(), 0.0);
    CHECK(decompose_noise(m, eq, zero, p, {1, -5.0, 1.0}).martingale == 0.0);

    // A table where the successors differ so the noise is not trivially zero.
    const std::vector<double> q{0.0, -1.0, 2.0, 0.5, -0.5, 0.0};
    Rng rng(55);
    constexpr int kDraws = 100000;
    double mean = 0.0;
    double sq = 0.0;
    for (int i = 0; i < kDraws; ++i) {
      const double x = decompose_noise(m, eq, q, p, m.sample(p, rng)).martingale;
      mean += x;
      sq += x * x;
    }
    mean /= kDraws;
    const double sigma = std::sqrt(sq / kDraws - mean * mean);
    CHECK(sigma > 0.0);
    CHECK(std::abs(mean) <= 3.0 * sigma / std::sqrt(static_cast<double>(kDraws)));
  }

  TEST_CASE("noise is unchanged by constant shifts of the table") {
    const Model m = bundled("fig7_b");
    const auto eq = expected_quantities(m);
    Rng rng(6);
    const auto q = arl::testing::random_vector(rng, m.num_pairs(), -2.0, 2.0);
    auto shifted = q;
    for (double& x : shifted) x += 17.5;
    for (int i = 0; i < 50; ++i) {
      const PairId p = arl::testing::random_index(rng, m.num_pairs());
      const auto smp = m.sample(p, rng);
      CHECK(decompose_noise(m, eq, q, p, smp).martingale ==
            doctest::Approx(decompose_noise(m, eq, shifted, p, smp).martingale).epsilon(1e-12));
    }
  }

  TEST_CASE("reference functions report their shift gain") {
    const Model m = bundled("fig7_a");
    Rng rng(10);
    const auto lin = FFunction::uniform_linear(m.num_pairs(), 1.0, -12.0);
    const auto lin_report = ffunction_property_check(lin, 500, rng);
    CHECK(lin_report.passed());
    CHECK(lin_report.u == doctest::Approx(4.0));  // |S| |A|

    const auto mx = FFunction::max_based(m.num_pairs(), 2.0, 0.0);
    const auto mx_report = ffunction_property_check(mx, 500, rng);
    CHECK(mx_report.passed());
    CHECK(mx_report.u == doctest::Approx(2.0));

    const auto comp = FFunction::component(m.num_pairs(), 2, 0.7);
    const auto comp_report = ffunction_property_check(comp, 500, rng);
    CHECK(comp_report.passed());
    CHECK(comp_report.u == doctest::Approx(0.7));

    const auto diff = FFunction::differential(m.num_pairs(), 0.5, 12.0, 0.0);
    const auto diff_report = ffunction_property_check(diff, 500, rng);
    CHECK(diff_report.passed());
    CHECK(diff_report.u == doctest::Approx(2.0));
  }

  TEST_CASE("parsed reference functions") {
    const Model m = bundled("fig7_b");
    const auto comp = parse_ffunction("component:pair=1/dashed", m);
    const std::vector<double> q{0, 0, 0, 5.5, 0, 0};
    CHECK(comp(q) == 5.5);
    const auto lin = parse_ffunction("linear:w=mean,b=0", m);
    CHECK(lin(std::vector<double>(6, 2.0)) == doctest::Approx(2.0));
    const auto diffq = parse_ffunction("diffq:eta=1,rbar0=0", m, std::vector<double>(6, 1.0));
    CHECK(diffq(std::vector<double>(6, 1.0)) == doctest::Approx(0.0));
    const auto mx = parse_ffunction("max:beta=2,b=1", m);
    CHECK(mx(q) == doctest::Approx(12.0));
    CHECK_THROWS_AS(parse_ffunction("component:pair=9/up", m), Error);
    CHECK_THROWS_AS(parse_ffunction("cubic", m), Error);
  }
}
