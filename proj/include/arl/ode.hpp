#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "arl/ffunction.hpp"
#include "arl/model.hpp"
#include "arl/options.hpp"
#include "arl/rng.hpp"

namespace arl {

using VectorMap = std::function<std::vector<double>(std::span<const double>)>;

/// The fixed-point form r - rbar*1 + g(q) - q = 0 shared by the MDP,
/// scaled inter-option and intra-option algorithms. g must be max-norm
/// nonexpansive, commute with constant shifts and be positively homogeneous.
struct AbstractRvi {
  std::string label;
  std::vector<double> reward;
  VectorMap g;
  FFunction f;
  double rate = 0.0;  // r_#, the optimal rate from the enumeration oracle

  [[nodiscard]] std::size_t dim() const noexcept { return reward.size(); }
};

/// g(q)(s, a) = sum_s' p(s' | s, a) max q(s', .)
AbstractRvi mdp_rvi(const Model& mdp, FFunction f, double rate);
/// g(q)(s, o) = p-hat max q / l-hat + (1 - 1 / l-hat) q(s, o), r = r-hat / l-hat
AbstractRvi scaled_option_rvi(const OptionSet& options, const InducedQuantities& quantities, FFunction f, double rate);
/// g(q)(s, o) = sum_a pi(a | s, o) sum_s' p(s' | s, a) U[q](s', o)
AbstractRvi intra_option_rvi(const Model& mdp, const OptionSet& options, FFunction f, double rate);

struct VectorFields {
  VectorMap h;        // r - f(q) 1 + g(q) - q
  VectorMap h_prime;  // r - r_# 1 + g(q) - q
  VectorMap h_inf;    // f(0) 1 - f(q) 1 + g(q) - q
};

VectorFields build_vector_fields(const AbstractRvi& cfg);

struct OdeTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  double dt = 0.0;
  std::string scheme = "rk4";
};

/// Fixed-step classical Runge-Kutta. Keeps every `keep_every`-th grid point
/// plus the last one. Throws NonFiniteState if the state blows up.
OdeTrajectory integrate(const VectorMap& field, std::span<const double> x0, double t_end, double dt,
                        std::size_t keep_every = 1);

/// Same integrator, reporting each grid point to `observe(t, x)` instead of
/// storing it.
void integrate_observed(const VectorMap& field, std::span<const double> x0, double t_end, double dt,
                        const std::function<void(double, std::span<const double>)>& observe);

/// One RK4 step, exposed for the coupled integrations below.
void rk4_step(const VectorMap& field, std::vector<double>& x, double dt);

struct ShiftLemmaReport {
  double max_span = 0.0;       // max over the grid of span(x(t) - y(t))
  double max_gap_error = 0.0;  // max over the grid of |mean(x - y) - z(t)|
  double final_gap = 0.0;
  double final_z = 0.0;
  double limit_z = 0.0;  // (r_# - f(y(t_end))) / u
  std::size_t grid_points = 0;

  [[nodiscard]] bool passed(double span_tol = 1e-6, double gap_tol = 1e-5) const noexcept {
    return max_span <= span_tol && max_gap_error <= gap_tol;
  }
};

/// Integrates h and h' from the same start and compares their difference
/// with the scalar z(t) = int_0^t exp(u (tau - t)) (r_# - f(y(tau))) dtau,
/// evaluated by trapezoid quadrature on the integration grid.
ShiftLemmaReport check_shift_lemma(const AbstractRvi& cfg, std::span<const double> x0, double t_end, double dt);

struct LyapunovReport {
  double max_increase = 0.0;      // largest one-step growth of ||y(t) - q*||
  double max_bound_ratio = 0.0;   // max ||x(t) - q*|| / ((1 + L) ||x0 - q*||)
  double worst_final_distance = 0.0;
  std::size_t starts = 0;

  [[nodiscard]] bool passed(double increase_tol = 1e-7) const noexcept {
    return max_increase <= increase_tol && max_bound_ratio <= 1.0 + 1e-9;
  }
};

/// Requires q_star to solve the fixed-point equation with f(q_star) = r_#
/// (residual at most 1e-10); throws ConfigError otherwise.
LyapunovReport check_lyapunov(const AbstractRvi& cfg, const std::vector<std::vector<double>>& starts,
                              std::span<const double> q_star, double t_end, double dt);

/// max |r - r_# + g(q) - q|
double abstract_residual(const AbstractRvi& cfg, std::span<const double> q);

struct AbstractSolve {
  std::vector<double> q;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Synchronous iteration q += alpha h(q); its fixed points are the solutions
/// with f(q) = r_#.
AbstractSolve solve_abstract(const AbstractRvi& cfg, std::span<const double> q0, double alpha = 0.5,
                             double tol = 1e-13, std::size_t max_iter = 2'000'000);

struct OperatorProbe {
  double worst_expansion = 0.0;    // max ||g(x) - g(y)|| - ||x - y||
  double worst_shift_error = 0.0;  // max ||g(x + c1) - g(x) - c1||
  double worst_scale_error = 0.0;  // max ||g(cx) - c g(x)||
  std::size_t trials = 0;

  [[nodiscard]] bool passed(double tol = 1e-10) const noexcept {
    return worst_expansion <= tol && worst_shift_error <= tol && worst_scale_error <= tol;
  }
};

/// Random probes of the three structural properties of g, each measured
/// relative to the magnitude of the probe.
OperatorProbe probe_operator(const AbstractRvi& cfg, std::size_t trials, Rng& rng);

}  // namespace arl
