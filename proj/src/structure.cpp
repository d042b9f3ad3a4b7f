#include "arl/structure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/SVD>

#include "arl/chain.hpp"
#include "arl/errors.hpp"

namespace arl {

StructureReport compute_structure(const Model& model, std::size_t cap) {
  const auto cls = classify(model, {.check_unichain = false, .cap = cap});
  if (!cls.weakly_communicating) {
    throw Error(ErrorKind::NotWeaklyCommunicating, "model '" + model.name() + "' is not weakly communicating");
  }
  const auto gain = optimal_gain(model, cap);

  std::set<StateId> recurrent;
  std::map<StateId, std::set<ActionId>> chosen;
  for (const auto& policy : gain.optimal_policies) {
    const auto chain = analyze_chain(state_transition_matrix(model, policy));
    for (const auto& cls_states : chain.recurrent_classes) {
      for (StateId s : cls_states) {
        recurrent.insert(s);
        chosen[s].insert(policy[s]);
      }
    }
  }

  std::vector<std::vector<double>> probs(model.num_states(), std::vector<double>(model.num_actions(), 0.0));
  for (StateId s = 0; s < model.num_states(); ++s) {
    if (auto it = chosen.find(s); it != chosen.end()) {
      for (ActionId a : it->second) probs[s][a] = 1.0 / static_cast<double>(it->second.size());
    } else {
      const auto pairs = model.pairs_at(s);
      for (PairId p : pairs) probs[s][model.pair_action(p)] = 1.0 / static_cast<double>(pairs.size());
    }
  }
  StationaryPolicy canonical(model, std::move(probs));
  const auto chain = induce_chain(model, canonical);

  std::map<StateId, std::vector<ActionId>> optimal_actions;
  for (const auto& [s, actions] : chosen) optimal_actions[s].assign(actions.begin(), actions.end());

  StructureReport report{gain.r_star, {recurrent.begin(), recurrent.end()}, chain.recurrent_classes,
                         std::move(optimal_actions), std::move(canonical)};

  std::vector<StateId> covered;
  for (const auto& c : report.classes) covered.insert(covered.end(), c.begin(), c.end());
  std::sort(covered.begin(), covered.end());
  if (covered != report.recurrent_states) {
    throw Error(ErrorKind::ModelError, "canonical policy's recurrent classes do not cover the optimal recurrent set");
  }
  return report;
}

nlohmann::json structure_to_json(const StructureReport& report, const Model& model) {
  using nlohmann::json;
  auto names = [&](const std::vector<StateId>& states) {
    json out = json::array();
    for (StateId s : states) out.push_back(model.state_names()[s]);
    return out;
  };
  json classes = json::array();
  for (const auto& c : report.classes) classes.push_back(names(c));
  json actions = json::object();
  for (const auto& [s, acts] : report.optimal_actions) {
    json list = json::array();
    for (ActionId a : acts) list.push_back(model.action_names()[a]);
    actions[model.state_names()[s]] = list;
  }
  return json{{"model", model.name()},
              {"r_star", report.r_star},
              {"n_star", report.n_star()},
              {"recurrent_states", names(report.recurrent_states)},
              {"classes", classes},
              {"optimal_actions", actions}};
}

std::string_view to_string(OracleKind kind) noexcept {
  switch (kind) {
    case OracleKind::ParamLine:
      return "ParamLine";
    case OracleKind::IneqRegion:
      return "IneqRegion";
    case OracleKind::ExplicitList:
      return "ExplicitList";
  }
  return "?";
}

SolutionSetOracle::SolutionSetOracle(const Model& model, std::string name, OracleKind kind, std::vector<PairId> pairs,
                                     BaseMap base, double z_lo, double z_hi, double r_star)
    : name_(std::move(name)),
      kind_(kind),
      pairs_(std::move(pairs)),
      base_(std::move(base)),
      z_lo_(z_lo),
      z_hi_(z_hi),
      r_star_(r_star) {
  if (pairs_.empty() || !(z_lo_ <= z_hi_)) throw Error(ErrorKind::ModelError, "oracle '" + name_ + "' is malformed");
  model_pairs_ = model.num_pairs();

  // Store the block in ascending pair order so that a block covering the
  // whole model is laid out exactly like a full table.
  std::vector<std::size_t> perm(pairs_.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return pairs_[a] < pairs_[b]; });
  std::vector<PairId> sorted(pairs_.size());
  for (std::size_t i = 0; i < perm.size(); ++i) sorted[i] = pairs_[perm[i]];
  pairs_ = std::move(sorted);
  base_ = [perm, raw = std::move(base_)](double z) {
    const auto unordered = raw(z);
    std::vector<double> out(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) out[i] = unordered[perm[i]];
    return out;
  };

  std::vector<bool> in_block(model.num_pairs(), false);
  std::vector<bool> state_in_block(model.num_states(), false);
  for (PairId p : pairs_) {
    if (p >= model.num_pairs()) throw Error(ErrorKind::ModelError, "oracle '" + name_ + "' names an unknown pair");
    in_block[p] = true;
    state_in_block[model.pair_state(p)] = true;
  }
  covers_all_ = std::all_of(in_block.begin(), in_block.end(), [](bool b) { return b; });

  // The block must be closed: every pair of a covered state is covered and
  // transitions never leave the covered states.
  for (PairId p = 0; p < model.num_pairs(); ++p) {
    if (state_in_block[model.pair_state(p)] && !in_block[p]) {
      throw Error(ErrorKind::ModelError, "oracle '" + name_ + "' covers a state only partially");
    }
    if (!in_block[p]) continue;
    for (const auto& out : model.outcomes(p)) {
      if (out.prob > 0.0 && !state_in_block[out.next]) {
        throw Error(ErrorKind::ModelError, "oracle '" + name_ + "' block is not closed under transitions");
      }
    }
  }

  const auto eq = expected_quantities(model);
  constexpr int kGrid = 20;
  for (int k = 0; k <= kGrid; ++k) {
    const double z = z_lo_ + (z_hi_ - z_lo_) * k / kGrid;
    for (double c : {-3.0, 0.0, 2.5}) {
      std::vector<double> q(model.num_pairs(), 0.0);
      embed(member(z, c), q);
      const auto rhs = bellman_rhs(model, eq, q, r_star_);
      for (PairId p : pairs_) {
        if (std::abs(rhs[p] - q[p]) > 1e-10) {
          throw Error(ErrorKind::ModelError, "oracle '" + name_ + "' member at z = " + std::to_string(z) +
                                                 " violates the optimality equation at " + model.pair_label(p));
        }
      }
    }
  }
}

std::vector<double> SolutionSetOracle::member(double z, double c) const {
  auto q = base_(z);
  for (double& v : q) v += c;
  return q;
}

std::vector<double> SolutionSetOracle::constrained_member(double z, const FFunction& f) const {
  const auto b = base_(z);
  return member(z, (r_star_ - f(b)) / f.shift_gain());
}

std::vector<double> SolutionSetOracle::restrict(std::span<const double> q) const {
  std::vector<double> out;
  out.reserve(pairs_.size());
  for (PairId p : pairs_) out.push_back(q[p]);
  return out;
}

void SolutionSetOracle::embed(std::span<const double> block, std::span<double> q) const {
  for (std::size_t i = 0; i < pairs_.size(); ++i) q[pairs_[i]] = block[i];
}

double SolutionSetOracle::gap(std::span<const double> block, double z, const FFunction* f) const {
  const auto b = base_(z);
  if (f == nullptr) {
    std::vector<double> diff(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) diff[i] = block[i] - b[i];
    return span(diff) / 2.0;
  }
  const double c = (r_star_ - (*f)(b)) / f->shift_gain();
  double worst = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, std::abs(block[i] - b[i] - c));
  return worst;
}

double SolutionSetOracle::distance(std::span<const double> q, const FFunction* f) const {
  if (f != nullptr && f->dim() != pairs_.size()) {
    throw Error(ErrorKind::ConfigError, "constraint f must act on the oracle's pair block");
  }
  const auto block = q.size() == model_pairs_ ? restrict(q) : std::vector<double>(q.begin(), q.end());
  if (block.size() != pairs_.size()) throw Error(ErrorKind::ConfigError, "vector matches neither the model nor the block");
  switch (kind_) {
    case OracleKind::ParamLine:
      return gap(block, z_lo_, f);
    case OracleKind::IneqRegion: {
      // Convex in z for affine base and linear f: golden-section search.
      const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
      double a = z_lo_;
      double b = z_hi_;
      double x1 = b - phi * (b - a);
      double x2 = a + phi * (b - a);
      double g1 = gap(block, x1, f);
      double g2 = gap(block, x2, f);
      for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
        if (g1 <= g2) {
          b = x2;
          x2 = x1;
          g2 = g1;
          x1 = b - phi * (b - a);
          g1 = gap(block, x1, f);
        } else {
          a = x1;
          x1 = x2;
          g1 = g2;
          x2 = a + phi * (b - a);
          g2 = gap(block, x2, f);
        }
      }
      return std::min({g1, g2, gap(block, z_lo_, f), gap(block, z_hi_, f)});
    }
    case OracleKind::ExplicitList: {
      double best = std::numeric_limits<double>::infinity();
      const auto steps = static_cast<std::size_t>(std::ceil((z_hi_ - z_lo_) / kOracleGridStep));
      for (std::size_t k = 0; k <= steps; ++k) {
        const double z = std::min(z_hi_, z_lo_ + static_cast<double>(k) * kOracleGridStep);
        best = std::min(best, gap(block, z, f));
      }
      return best;
    }
  }
  return std::numeric_limits<double>::infinity();
}

namespace {

std::vector<PairId> resolve_pairs(const Model& model, std::initializer_list<const char*> labels) {
  std::vector<PairId> out;
  for (const char* label : labels) {
    const auto p = model.find_pair(label);
    if (!p) throw Error(ErrorKind::ModelError, std::string("bundled oracle expects pair ") + label);
    out.push_back(*p);
  }
  return out;
}

}  // namespace

std::optional<SolutionSetOracle> bundled_oracle(const Model& model) {
  const std::string& name = model.name();
  if (name == "ex2_1_a") {
    return SolutionSetOracle(model, name, OracleKind::ParamLine,
                             resolve_pairs(model, {"1/dashed", "2/solid", "2/dashed"}),
                             [](double) { return std::vector<double>{-1.0, 0.0, -2.0}; }, 0.0, 0.0, 1.0);
  }
  if (name == "ex2_1_b") {
    return SolutionSetOracle(model, name, OracleKind::ParamLine,
                             resolve_pairs(model, {"1/solid", "1/dashed", "2/solid", "2/dashed"}),
                             [](double) { return std::vector<double>{-1.0, 0.0, 0.0, 0.0}; }, 0.0, 0.0, 0.0);
  }
  if (name == "ex2_1_c" || name == "fig7_a" || name == "fig7_b") {
    // |v(1) - v(2)| <= 1 with v(2) pinned to zero by the free constant.
    return SolutionSetOracle(model, name, OracleKind::IneqRegion,
                             resolve_pairs(model, {"1/solid", "1/dashed", "2/solid", "2/dashed"}),
                             [](double z) { return std::vector<double>{z, -1.0, 0.0, z - 1.0}; }, -1.0, 1.0, 1.0);
  }
  if (name == "ex5_1") {
    // v(2) pinned to zero; v(1) = w in [-2, 0] and v(3) = max(-1, w).
    return SolutionSetOracle(
        model, name, OracleKind::ExplicitList,
        resolve_pairs(model, {"1/solid", "1/dashed", "2/solid", "2/dashed", "3/solid", "3/dashed"}),
        [](double w) {
          const double v3 = std::max(-1.0, w);
          return std::vector<double>{w, -2.0, 0.0, v3, -1.0, w};
        },
        -2.0, 0.0, 0.0);
  }
  return std::nullopt;
}

double distance_to_solution_set(const SolutionSetOracle& oracle, std::span<const double> q, bool constrained,
                                const FFunction* f) {
  if (constrained && f == nullptr) throw Error(ErrorKind::ConfigError, "constrained distance needs f");
  return oracle.distance(q, constrained ? f : nullptr);
}

DimensionReport verify_dimension_claim(const Model& model, const FFunction& f, std::size_t samples, Rng& rng,
                                       const SolutionSetOracle* oracle) {
  if (samples < 2) throw Error(ErrorKind::ConfigError, "dimension check needs at least two samples");
  const auto structure = compute_structure(model);
  const auto eq = expected_quantities(model);
  const std::size_t dim = model.num_pairs();

  DimensionReport report;
  report.n_star = structure.n_star();
  report.expected_dimension = report.n_star - 1;
  report.rank_tolerance = kRankTolerance;
  report.samples = samples;

  if (oracle != nullptr && oracle->kind() == OracleKind::ExplicitList) report.member_tolerance = kOracleGridStep;

  std::vector<std::vector<double>> points;
  for (std::size_t k = 0; k < samples; ++k) {
    std::vector<double> q0(dim);
    for (double& v : q0) v = 20.0 * rng.uniform() - 10.0;
    const auto run = classical_rvi(model, f, q0, {.alpha = 0.5, .tol = 1e-13, .max_iter = 2'000'000,
                                                  .record_traces = false, .residual_rate = std::nullopt});
    report.worst_residual = std::max(report.worst_residual, optimality_residual(model, eq, run.q, structure.r_star));
    report.worst_f_error = std::max(report.worst_f_error, std::abs(f(run.q) - structure.r_star));
    if (oracle != nullptr && oracle->covers_all_pairs()) {
      report.worst_member_distance = std::max(report.worst_member_distance, oracle->distance(run.q, &f));
    }
    points.push_back(run.q);
  }

  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
  };
  // The medoid stands in for an interior point of the sampled set.
  std::size_t centre = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    double total = 0.0;
    for (const auto& p : points) total += dist(points[i], p);
    if (total < best) {
      best = total;
      centre = i;
    }
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i != centre) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist(points[a], points[centre]) < dist(points[b], points[centre]);
  });
  report.neighbours = std::min<std::size_t>(order.size(), std::max<std::size_t>(8, 2 * report.n_star + 2));

  Eigen::MatrixXd diffs(static_cast<Eigen::Index>(report.neighbours), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < report.neighbours; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      diffs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = points[order[r]][c] - points[centre][c];
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(diffs);
  const Eigen::VectorXd sv = svd.singularValues();
  report.singular_values.assign(sv.data(), sv.data() + sv.size());
  const double largest = sv.size() > 0 ? sv(0) : 0.0;
  // Sample points are only accurate to the solver tolerance, so singular
  // values below an absolute floor are noise even when they dominate.
  constexpr double kAbsoluteFloor = 1e-8;
  const double threshold = std::max(kRankTolerance * largest, kAbsoluteFloor);
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > threshold) ++report.estimated_dimension;
  }
  return report;
}

nlohmann::json dimension_to_json(const DimensionReport& report) {
  return nlohmann::json{{"n_star", report.n_star},
                        {"expected_dimension", report.expected_dimension},
                        {"estimated_dimension", report.estimated_dimension},
                        {"singular_values", report.singular_values},
                        {"rank_tolerance", report.rank_tolerance},
                        {"samples", report.samples},
                        {"neighbours", report.neighbours},
                        {"worst_member_distance", report.worst_member_distance},
                        {"member_tolerance", report.member_tolerance},
                        {"worst_residual", report.worst_residual},
                        {"worst_f_error", report.worst_f_error},
                        {"passed", report.passed()}};
}

}  // namespace arl
