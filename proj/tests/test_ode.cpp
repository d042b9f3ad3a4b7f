#include <doctest.h>

#include <cmath>

#include "arl/errors.hpp"
#include "arl/ode.hpp"
#include "arl/solvers.hpp"
#include "arl/structure.hpp"
#include "support.hpp"

using namespace arl;
using arl::testing::bundled;

namespace {

FFunction mean_f(std::size_t dim, double offset = 0.0) {
  return FFunction::uniform_linear(dim, 1.0 / static_cast<double>(dim), offset);
}

AbstractRvi example_cfg(const std::string& name) {
  const Model m = bundled(name);
  return mdp_rvi(m, mean_f(m.num_pairs()), optimal_gain(m).r_star);
}

std::vector<double> solution(const std::string& name) {
  const Model m = bundled(name);
  const auto oracle = bundled_oracle(m);
  REQUIRE(oracle);
  return oracle->constrained_member(0.5 * (oracle->z_lo() + oracle->z_hi()), mean_f(m.num_pairs()));
}

std::vector<double> shifted(std::vector<double> v, double c) {
  for (double& x : v) x += c;
  return v;
}

}  // namespace

TEST_SUITE("ode_lab") {
  TEST_CASE("the vector field vanishes on the constrained solution set") {
    for (const std::string name : {"ex2_1_a", "ex2_1_b", "ex2_1_c", "ex5_1"}) {
      CAPTURE(name);
      const auto cfg = example_cfg(name);
      const auto fields = build_vector_fields(cfg);
      const auto q = solution(name);
      CHECK(max_norm(fields.h(q)) <= 1e-12);
      CHECK(max_norm(fields.h_prime(q)) <= 1e-12);
      CHECK(max_norm(fields.h_inf(std::vector<double>(cfg.dim(), 0.0))) == 0.0);
    }
  }

  TEST_CASE("h at large scale approaches the limiting field") {
    const auto cfg = example_cfg("ex2_1_c");
    const auto fields = build_vector_fields(cfg);
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
      const auto q = arl::testing::random_vector(rng, cfg.dim(), -1.0, 1.0);
      const auto limit = fields.h_inf(q);
      double previous = std::numeric_limits<double>::infinity();
      for (double c : {10.0, 100.0, 1000.0, 10000.0}) {
        std::vector<double> scaled(q);
        for (double& x : scaled) x *= c;
        auto h = fields.h(scaled);
        for (double& x : h) x /= c;
        const double gap = arl::testing::max_abs_diff(h, limit);
        CHECK(gap <= previous);
        previous = gap;
      }
      CHECK(previous <= 1e-3);
    }
  }

  TEST_CASE("an equilibrium start does not drift") {
    const auto cfg = example_cfg("ex2_1_c");
    const auto q = solution("ex2_1_c");
    const auto traj = integrate(build_vector_fields(cfg).h, q, 10.0, 1e-3, 1000);
    for (const auto& x : traj.states) CHECK(arl::testing::max_abs_diff(x, q) <= 1e-9);
    CHECK(traj.scheme == "rk4");
    CHECK(traj.times.back() == doctest::Approx(10.0));
  }

  TEST_CASE("trajectories on ex2_1_a settle on a solution with the right rate") {
    const Model m = bundled("ex2_1_a");
    const auto cfg = example_cfg("ex2_1_a");
    const auto fields = build_vector_fields(cfg);
    Rng rng(9);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x0 = arl::testing::random_vector(rng, cfg.dim(), -10.0, 10.0);
      const auto traj = integrate(fields.h, x0, 50.0, 1e-3, 50000);
      const auto& end = traj.states.back();
      CHECK(optimality_residual(m, end, 1.0) <= 1e-6);
      CHECK(std::abs(cfg.f(end) - 1.0) <= 1e-6);
    }
  }

  TEST_CASE("halving the step shrinks the error sixteen-fold") {
    const auto cfg = example_cfg("ex2_1_c");
    const auto field = build_vector_fields(cfg).h;
    const std::vector<double> x0{3.0, -2.0, 0.5, 1.0};
    const double t_end = 2.0;
    const auto reference = integrate(field, x0, t_end, 1e-4).states.back();
    const double coarse = arl::testing::max_abs_diff(integrate(field, x0, t_end, 0.1).states.back(), reference);
    const double fine = arl::testing::max_abs_diff(integrate(field, x0, t_end, 0.05).states.back(), reference);
    REQUIRE(fine > 0.0);
    const double ratio = coarse / fine;
    CHECK(ratio > 10.0);
    CHECK(ratio < 24.0);
  }

  TEST_CASE("the integrator refuses bad steps and reports blow-ups") {
    const VectorMap grow = [](std::span<const double> x) {
      std::vector<double> out(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
      return out;
    };
    const std::vector<double> x0{1.0};
    try {
      (void)integrate(grow, x0, 5.0, 1e-2);
      FAIL("expected NonFiniteState");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NonFiniteState);
    }
    CHECK_THROWS_AS(integrate(grow, x0, 1.0, 0.0), Error);
  }

  TEST_CASE("no gap when the auxiliary trajectory already has the optimal rate") {
    const auto cfg = example_cfg("ex2_1_c");
    const auto report = check_shift_lemma(cfg, solution("ex2_1_c"), 5.0, 1e-3);
    CHECK(report.max_span <= 1e-12);
    CHECK(std::abs(report.final_z) <= 1e-12);
    CHECK(std::abs(report.final_gap) <= 1e-12);
    CHECK(report.passed());
  }

  TEST_CASE("shift lemma on ex2_1_c with a linear reference") {
    const auto cfg = example_cfg("ex2_1_c");
    Rng rng(21);
    for (int trial = 0; trial < 3; ++trial) {
      const auto x0 = arl::testing::random_vector(rng, cfg.dim(), -5.0, 5.0);
      const auto report = check_shift_lemma(cfg, x0, 50.0, 1e-3);
      CHECK(report.max_span <= 1e-6);
      CHECK(report.max_gap_error <= 1e-5);
      CHECK(report.passed());
      CHECK(report.grid_points == 50001);
      CHECK(report.final_z == doctest::Approx(report.limit_z).epsilon(1e-6));
    }
  }

  TEST_CASE("doubling the shift gain halves the limiting gap") {
    const Model m = bundled("ex2_1_c");
    const double r_star = 1.0;
    const std::size_t n = m.num_pairs();
    const std::vector<double> x0{4.0, -1.0, 2.5, -3.0};
    const auto base = mdp_rvi(m, mean_f(n), r_star);
    // y(infinity) does not depend on f; find it first.
    const auto y_inf = integrate(build_vector_fields(base).h_prime, x0, 60.0, 1e-3, 60000).states.back();
    const double f1_at_limit = base.f(y_inf);
    // Same value at y(infinity), twice the weights.
    const auto doubled = FFunction::uniform_linear(n, 2.0 / static_cast<double>(n), f1_at_limit - 2.0 * f1_at_limit);
    CHECK(doubled(y_inf) == doctest::Approx(f1_at_limit).epsilon(1e-12));
    CHECK(doubled.shift_gain() == doctest::Approx(2.0 * base.f.shift_gain()));
    const auto r1 = check_shift_lemma(base, x0, 60.0, 1e-3);
    const auto r2 = check_shift_lemma(mdp_rvi(m, doubled, r_star), x0, 60.0, 1e-3);
    REQUIRE(std::abs(r1.final_z) > 0.1);
    CHECK(r2.final_z == doctest::Approx(0.5 * r1.final_z).epsilon(1e-6));
    CHECK(r1.passed());
    CHECK(r2.passed());
  }

  TEST_CASE("starting at the solution keeps both distances at zero") {
    const auto cfg = example_cfg("ex2_1_a");
    const auto q = solution("ex2_1_a");
    const auto report = check_lyapunov(cfg, {q}, q, 5.0, 1e-3);
    CHECK(report.max_increase == 0.0);
    CHECK(report.worst_final_distance <= 1e-12);
    CHECK(report.passed());
  }

  TEST_CASE("distance to the solution never grows along the auxiliary flow") {
    const auto cfg = example_cfg("ex2_1_a");
    const auto q = solution("ex2_1_a");
    Rng rng(100);
    std::vector<std::vector<double>> starts;
    for (int k = 0; k < 100; ++k) {
      auto x = arl::testing::random_vector(rng, cfg.dim(), -10.0, 10.0);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += q[i];
      starts.push_back(x);
    }
    const auto report = check_lyapunov(cfg, starts, q, 20.0, 1e-3);
    CHECK(report.starts == 100);
    CHECK(report.max_increase <= 1e-7);
    CHECK(report.max_bound_ratio <= 1.0 + 1e-9);
  }

  TEST_CASE("the Lyapunov check insists on a verified solution") {
    const auto cfg = example_cfg("ex2_1_a");
    const auto q = shifted(solution("ex2_1_a"), 1.0);
    try {
      (void)check_lyapunov(cfg, {q}, q, 1.0, 1e-3);
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigError);
    }
  }

  TEST_CASE("with zero rewards every trajectory returns to the origin") {
    for (const std::string name : {"ex2_1_a", "ex2_1_c", "fig7_b"}) {
      CAPTURE(name);
      ModelSpec spec = bundled(name).to_spec();
      for (auto& t : spec.transitions) t.reward = 0.0;
      const Model m = Model::from_spec(spec);
      const auto cfg = mdp_rvi(m, mean_f(m.num_pairs()), 0.0);
      const auto fields = build_vector_fields(cfg);
      Rng rng(6);
      for (int k = 0; k < 5; ++k) {
        const auto x0 = arl::testing::random_vector(rng, cfg.dim(), -10.0, 10.0);
        CHECK(max_norm(fields.h(x0)) == doctest::Approx(max_norm(fields.h_inf(x0))));
        // State 0 of fig7_b stays put with probability 0.9, so its entries decay at rate 0.1.
        const double horizon = name == "fig7_b" ? 200.0 : 100.0;
        const auto end = integrate(fields.h, x0, horizon, 1e-3, 100000).states.back();
        CHECK(max_norm(end) <= 1e-4);
      }
    }
  }

  TEST_CASE("equilibria are exactly the constrained solutions") {
    const Model m = bundled("ex2_1_c");
    const auto cfg = example_cfg("ex2_1_c");
    const auto fields = build_vector_fields(cfg);
    const auto oracle = bundled_oracle(m);
    Rng rng(44);
    int equilibria = 0;
    for (int trial = 0; trial < 300; ++trial) {
      const double z = -1.0 + 2.0 * rng.uniform();
      auto q = oracle->constrained_member(z, cfg.f);
      switch (trial % 3) {
        case 0: break;
        case 1: q = shifted(q, std::pow(10.0, -6.0 * rng.uniform())); break;
        default: q[arl::testing::random_index(rng, q.size())] += std::pow(10.0, -1.0 - 5.0 * rng.uniform()); break;
      }
      const bool equilibrium = max_norm(fields.h(q)) <= 1e-10;
      const bool solves = optimality_residual(m, q, 1.0) <= 1e-9 && std::abs(cfg.f(q) - 1.0) <= 1e-9;
      CHECK(equilibrium == solves);
      CHECK(std::abs(abstract_residual(cfg, q) - optimality_residual(m, q, 1.0)) <= 1e-12);
      if (equilibrium) ++equilibria;
    }
    CHECK(equilibria == 100);
  }

  TEST_CASE("the three operators are nonexpansive, shift-covariant and homogeneous") {
    Rng rng(13);
    const auto mdp_cfg = example_cfg("ex5_1");
    CHECK(probe_operator(mdp_cfg, 10000, rng).passed());

    const Model m = bundled("options3");
    const auto opts = arl::testing::bundled_options("options3", m);
    const auto quantities = exact_option_quantities(m, opts);
    const double rate = optimal_gain(induced_smdp(m, opts, quantities)).r_star;
    const auto inter = scaled_option_rvi(opts, quantities, mean_f(opts.num_pairs()), rate);
    const auto intra = intra_option_rvi(m, opts, mean_f(opts.num_pairs()), rate);
    const auto p_inter = probe_operator(inter, 10000, rng);
    const auto p_intra = probe_operator(intra, 10000, rng);
    CHECK(p_inter.passed());
    CHECK(p_intra.passed());
    CHECK(p_inter.trials == 10000);
  }

  TEST_CASE("the scaled option operator keeps nonnegative weights") {
    const Model m = bundled("options3");
    const auto opts = arl::testing::bundled_options("options3", m);
    auto quantities = exact_option_quantities(m, opts);
    for (double l : quantities.duration) CHECK(l >= 1.0);
    quantities.duration[0] = 0.5;
    CHECK_THROWS_AS(scaled_option_rvi(opts, quantities, mean_f(opts.num_pairs()), 0.0), Error);
  }

  TEST_CASE("solving the abstract equations recovers the constrained solution") {
    const Model m = bundled("options3");
    const auto opts = arl::testing::bundled_options("options3", m);
    const auto quantities = exact_option_quantities(m, opts);
    const double rate = optimal_gain(induced_smdp(m, opts, quantities)).r_star;
    for (const auto& cfg : {scaled_option_rvi(opts, quantities, mean_f(6), rate),
                            intra_option_rvi(m, opts, mean_f(6), rate)}) {
      CAPTURE(cfg.label);
      const auto solved = solve_abstract(cfg, std::vector<double>(6, 0.0));
      REQUIRE(solved.converged);
      CHECK(abstract_residual(cfg, solved.q) <= 1e-10);
      CHECK(std::abs(cfg.f(solved.q) - rate) <= 1e-10);
      const auto res = option_residuals(m, opts, quantities, solved.q, rate);
      CHECK(res.inter <= 1e-9);
      CHECK(res.intra <= 1e-9);
    }
  }
}
