#include "arl/ode.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <thread>

#include "arl/errors.hpp"
#include "arl/solvers.hpp"

namespace arl {
namespace {

std::vector<double> state_max_over_options(std::size_t num_states, std::size_t num_options,
                                           std::span<const double> q) {
  std::vector<double> out(num_states, -std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < num_states; ++s) {
    for (std::size_t o = 0; o < num_options; ++o) out[s] = std::max(out[s], q[s * num_options + o]);
  }
  return out;
}

void check_dim(const AbstractRvi& cfg, std::span<const double> q) {
  if (q.size() != cfg.dim()) throw Error(ErrorKind::ConfigError, "vector size does not match the index set");
}

double distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

void ensure_finite(std::span<const double> x, double t) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::NonFiniteState, "trajectory became non-finite at t = " + std::to_string(t));
    }
  }
}

std::size_t step_count(double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::ConfigError, "dt must be positive");
  if (!(t_end >= 0.0)) throw Error(ErrorKind::ConfigError, "t_end must be nonnegative");
  return static_cast<std::size_t>(std::llround(t_end / dt));
}

}  // namespace

AbstractRvi mdp_rvi(const Model& mdp, FFunction f, double rate) {
  if (f.dim() != mdp.num_pairs()) throw Error(ErrorKind::ConfigError, "f dimension does not match the pair count");
  auto eq = std::make_shared<const ExpectedQuantities>(expected_quantities(mdp));
  auto model = std::make_shared<const Model>(mdp);
  AbstractRvi cfg{"mdp", eq->reward, {}, std::move(f), rate};
  cfg.g = [eq, model](std::span<const double> q) {
    const auto vmax = state_max(*model, q);
    const Eigen::Map<const Eigen::VectorXd> v(vmax.data(), static_cast<Eigen::Index>(vmax.size()));
    const Eigen::VectorXd out = eq->transition * v;
    return std::vector<double>(out.data(), out.data() + out.size());
  };
  return cfg;
}

AbstractRvi scaled_option_rvi(const OptionSet& options, const InducedQuantities& quantities, FFunction f,
                              double rate) {
  const std::size_t n = options.num_pairs();
  if (f.dim() != n) throw Error(ErrorKind::ConfigError, "f dimension does not match the option pair count");
  std::vector<double> inv_duration(n);
  std::vector<double> reward(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = quantities.duration[i];
    if (!(l >= 1.0 - 1e-12)) {
      throw Error(ErrorKind::ConfigError, "expected option duration below one gives a negative convexity weight");
    }
    inv_duration[i] = 1.0 / l;
    reward[i] = quantities.reward[i] / l;
  }
  auto transition = std::make_shared<const Eigen::MatrixXd>(quantities.transition);
  AbstractRvi cfg{"inter-option", std::move(reward), {}, std::move(f), rate};
  cfg.g = [transition, inv_duration, states = options.num_states(),
           opts = options.num_options()](std::span<const double> q) {
    const auto vmax = state_max_over_options(states, opts, q);
    const Eigen::Map<const Eigen::VectorXd> v(vmax.data(), static_cast<Eigen::Index>(vmax.size()));
    const Eigen::VectorXd next = *transition * v;
    std::vector<double> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      out[i] = inv_duration[i] * next(static_cast<Eigen::Index>(i)) + (1.0 - inv_duration[i]) * q[i];
    }
    return out;
  };
  return cfg;
}

AbstractRvi intra_option_rvi(const Model& mdp, const OptionSet& options, FFunction f, double rate) {
  const std::size_t n = options.num_pairs();
  if (f.dim() != n) throw Error(ErrorKind::ConfigError, "f dimension does not match the option pair count");
  const auto eq = expected_quantities(mdp);

  // Collapse each option's one-step behavior into a (s, o) x s' kernel.
  auto kernel = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                                         static_cast<Eigen::Index>(mdp.num_states())));
  std::vector<double> reward(n, 0.0);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (OptionId o = 0; o < options.num_options(); ++o) {
      const auto row = static_cast<Eigen::Index>(options.pair(s, o));
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        const double w = options.pi(s, o, a);
        if (w == 0.0) continue;
        const PairId p = mdp.pair(s, a);
        reward[static_cast<std::size_t>(row)] += w * eq.reward[p];
        kernel->row(row) += w * eq.transition.row(static_cast<Eigen::Index>(p));
      }
    }
  }
  auto opts = std::make_shared<const OptionSet>(options);
  AbstractRvi cfg{"intra-option", std::move(reward), {}, std::move(f), rate};
  cfg.g = [kernel, opts](std::span<const double> q) {
    const auto u = continuation_values(*opts, q);
    const std::size_t states = opts->num_states();
    const std::size_t count = opts->num_options();
    std::vector<double> out(q.size(), 0.0);
    for (std::size_t s = 0; s < states; ++s) {
      for (std::size_t o = 0; o < count; ++o) {
        const auto row = static_cast<Eigen::Index>(s * count + o);
        double acc = 0.0;
        for (std::size_t s2 = 0; s2 < states; ++s2) {
          const double p = (*kernel)(row, static_cast<Eigen::Index>(s2));
          if (p != 0.0) acc += p * u[s2 * count + o];
        }
        out[static_cast<std::size_t>(row)] = acc;
      }
    }
    return out;
  };
  return cfg;
}

VectorFields build_vector_fields(const AbstractRvi& cfg) {
  auto shared = std::make_shared<const AbstractRvi>(cfg);
  VectorFields fields;
  fields.h = [shared](std::span<const double> q) {
    check_dim(*shared, q);
    auto out = shared->g(q);
    const double fq = shared->f(q);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += shared->reward[i] - fq - q[i];
    return out;
  };
  fields.h_prime = [shared](std::span<const double> q) {
    check_dim(*shared, q);
    auto out = shared->g(q);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += shared->reward[i] - shared->rate - q[i];
    return out;
  };
  fields.h_inf = [shared](std::span<const double> q) {
    check_dim(*shared, q);
    auto out = shared->g(q);
    const double shift = shared->f.at_zero() - shared->f(q);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += shift - q[i];
    return out;
  };
  return fields;
}

void rk4_step(const VectorMap& field, std::vector<double>& x, double dt) {
  const std::size_t n = x.size();
  std::vector<double> tmp(n);
  const auto k1 = field(x);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  const auto k2 = field(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  const auto k3 = field(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
  const auto k4 = field(tmp);
  for (std::size_t i = 0; i < n; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void integrate_observed(const VectorMap& field, std::span<const double> x0, double t_end, double dt,
                        const std::function<void(double, std::span<const double>)>& observe) {
  const std::size_t steps = step_count(t_end, dt);
  std::vector<double> x(x0.begin(), x0.end());
  ensure_finite(x, 0.0);
  observe(0.0, x);
  for (std::size_t k = 1; k <= steps; ++k) {
    rk4_step(field, x, dt);
    const double t = static_cast<double>(k) * dt;
    ensure_finite(x, t);
    observe(t, x);
  }
}

OdeTrajectory integrate(const VectorMap& field, std::span<const double> x0, double t_end, double dt,
                        std::size_t keep_every) {
  const std::size_t steps = step_count(t_end, dt);
  keep_every = std::max<std::size_t>(keep_every, 1);
  OdeTrajectory traj;
  traj.dt = dt;
  std::size_t k = 0;
  integrate_observed(field, x0, t_end, dt, [&](double t, std::span<const double> x) {
    if (k % keep_every == 0 || k == steps) {
      traj.times.push_back(t);
      traj.states.emplace_back(x.begin(), x.end());
    }
    ++k;
  });
  return traj;
}

ShiftLemmaReport check_shift_lemma(const AbstractRvi& cfg, std::span<const double> x0, double t_end, double dt) {
  check_dim(cfg, x0);
  const std::size_t steps = step_count(t_end, dt);
  const auto fields = build_vector_fields(cfg);
  const double u = cfg.f.shift_gain();
  const double decay = std::exp(-u * dt);

  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> y = x;
  double z = 0.0;
  double forcing = cfg.rate - cfg.f(y);

  ShiftLemmaReport report;
  auto record = [&] {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - y[i];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
      sum += d;
    }
    const double gap = sum / static_cast<double>(x.size());
    report.max_span = std::max(report.max_span, hi - lo);
    report.max_gap_error = std::max(report.max_gap_error, std::abs(gap - z));
    report.final_gap = gap;
    report.final_z = z;
    ++report.grid_points;
  };

  record();
  for (std::size_t k = 1; k <= steps; ++k) {
    rk4_step(fields.h, x, dt);
    rk4_step(fields.h_prime, y, dt);
    ensure_finite(x, static_cast<double>(k) * dt);
    ensure_finite(y, static_cast<double>(k) * dt);
    const double next_forcing = cfg.rate - cfg.f(y);
    z = decay * z + 0.5 * dt * (decay * forcing + next_forcing);
    forcing = next_forcing;
    record();
  }
  report.limit_z = forcing / u;
  return report;
}

double abstract_residual(const AbstractRvi& cfg, std::span<const double> q) {
  check_dim(cfg, q);
  const auto gq = cfg.g(q);
  double worst = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    worst = std::max(worst, std::abs(cfg.reward[i] - cfg.rate + gq[i] - q[i]));
  }
  return worst;
}

LyapunovReport check_lyapunov(const AbstractRvi& cfg, const std::vector<std::vector<double>>& starts,
                              std::span<const double> q_star, double t_end, double dt) {
  check_dim(cfg, q_star);
  if (abstract_residual(cfg, q_star) > 1e-10 || std::abs(cfg.f(q_star) - cfg.rate) > 1e-10) {
    throw Error(ErrorKind::ConfigError, "reference point is not an equilibrium of h");
  }
  const auto fields = build_vector_fields(cfg);
  const double bound_factor = 1.0 + cfg.f.lipschitz();

  struct Single {
    double increase = 0.0;
    double ratio = 0.0;
    double final_distance = 0.0;
  };
  auto run_one = [&](const std::vector<double>& x0) {
    check_dim(cfg, x0);
    Single out;
    const double initial = distance(x0, q_star);
    double previous = initial;
    integrate_observed(fields.h_prime, x0, t_end, dt, [&](double, std::span<const double> y) {
      const double d = distance(y, q_star);
      out.increase = std::max(out.increase, d - previous);
      previous = d;
    });
    integrate_observed(fields.h, x0, t_end, dt, [&](double, std::span<const double> x) {
      const double d = distance(x, q_star);
      out.final_distance = d;
      if (initial > 0.0) {
        out.ratio = std::max(out.ratio, d / (bound_factor * initial));
      } else if (d > 0.0) {
        out.ratio = std::numeric_limits<double>::infinity();
      }
    });
    return out;
  };

  // Each start is independent; split them over the available cores and
  // merge in start order.
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, starts.size() + 1);
  std::vector<Single> results(starts.size());
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < starts.size(); i += workers) results[i] = run_one(starts[i]);
    }));
  }
  for (auto& job : jobs) job.get();

  LyapunovReport report;
  report.starts = starts.size();
  for (const auto& r : results) {
    report.max_increase = std::max(report.max_increase, r.increase);
    report.max_bound_ratio = std::max(report.max_bound_ratio, r.ratio);
    report.worst_final_distance = std::max(report.worst_final_distance, r.final_distance);
  }
  return report;
}

AbstractSolve solve_abstract(const AbstractRvi& cfg, std::span<const double> q0, double alpha, double tol,
                             std::size_t max_iter) {
  check_dim(cfg, q0);
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidAlpha, "alpha must lie in (0, 1)");
  const auto h = build_vector_fields(cfg).h;
  AbstractSolve result;
  result.q.assign(q0.begin(), q0.end());
  for (; result.iterations < max_iter; ++result.iterations) {
    const auto dq = h(result.q);
    ensure_finite(dq, static_cast<double>(result.iterations));
    if (max_norm(dq) <= tol) {
      result.converged = true;
      break;
    }
    for (std::size_t i = 0; i < dq.size(); ++i) result.q[i] += alpha * dq[i];
  }
  return result;
}

OperatorProbe probe_operator(const AbstractRvi& cfg, std::size_t trials, Rng& rng) {
  const std::size_t n = cfg.dim();
  auto draw = [&](double radius) {
    std::vector<double> v(n);
    for (double& x : v) x = radius * (2.0 * rng.uniform() - 1.0);
    return v;
  };
  OperatorProbe probe;
  probe.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto x = draw(10.0);
    const auto y = draw(10.0);
    const double c = 20.0 * rng.uniform() - 10.0;
    const double scale = 10.0 * rng.uniform();
    const double magnitude = std::max({1.0, max_norm(x), max_norm(y)});

    const auto gx = cfg.g(x);
    const auto gy = cfg.g(y);
    probe.worst_expansion = std::max(probe.worst_expansion, (distance(gx, gy) - distance(x, y)) / magnitude);

    auto shifted = x;
    for (double& v : shifted) v += c;
    const auto gs = cfg.g(shifted);
    double shift_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) shift_err = std::max(shift_err, std::abs(gs[i] - gx[i] - c));
    probe.worst_shift_error = std::max(probe.worst_shift_error, shift_err / (magnitude + std::abs(c)));

    auto scaled = x;
    for (double& v : scaled) v *= scale;
    const auto gc = cfg.g(scaled);
    double scale_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale_err = std::max(scale_err, std::abs(gc[i] - scale * gx[i]));
    probe.worst_scale_error = std::max(probe.worst_scale_error, scale_err / (magnitude * std::max(1.0, scale)));
  }
  return probe;
}

}  // namespace arl
