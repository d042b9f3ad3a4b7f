#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arl/ffunction.hpp"
#include "arl/model.hpp"
#include "arl/rng.hpp"
#include "arl/solvers.hpp"

namespace arl {

struct StructureReport {
  double r_star = 0.0;
  /// States recurrent under at least one optimal deterministic policy.
  std::vector<StateId> recurrent_states;
  /// Recurrent classes of the canonical optimal policy; they partition
  /// recurrent_states and their count is n*.
  std::vector<std::vector<StateId>> classes;
  /// Actions chosen at s by optimal policies under which s is recurrent.
  std::map<StateId, std::vector<ActionId>> optimal_actions;
  /// Uniform over all actions off the recurrent set, uniform over the
  /// optimal actions on it.
  StationaryPolicy canonical_policy;

  [[nodiscard]] std::size_t n_star() const noexcept { return classes.size(); }
};

/// Throws NotWeaklyCommunicating, or CapExceeded when the optimal policies
/// cannot be enumerated.
StructureReport compute_structure(const Model& model, std::size_t cap = kDefaultEnumerationCap);
nlohmann::json structure_to_json(const StructureReport& report, const Model& model);

enum class OracleKind { ParamLine, IneqRegion, ExplicitList };
std::string_view to_string(OracleKind kind) noexcept;

/// A closed-form description of the action-value solution set restricted to
/// a block of pairs: { base(z) + c 1 : z in [z_lo, z_hi], c real }.
/// ParamLine has a single base point; IneqRegion has base affine in z, so the
/// distance is convex in z; ExplicitList has a general base and is searched
/// on a grid.
class SolutionSetOracle {
 public:
  using BaseMap = std::function<std::vector<double>(double)>;

  /// Checks sampled members against the optimality equation (residual at
  /// most 1e-10 at r_star) and throws ModelError on any failure.
  SolutionSetOracle(const Model& model, std::string name, OracleKind kind, std::vector<PairId> pairs, BaseMap base,
                    double z_lo, double z_hi, double r_star);

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] OracleKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::vector<PairId>& pairs() const noexcept { return pairs_; }
  [[nodiscard]] double r_star() const noexcept { return r_star_; }
  [[nodiscard]] double z_lo() const noexcept { return z_lo_; }
  [[nodiscard]] double z_hi() const noexcept { return z_hi_; }
  [[nodiscard]] bool covers_all_pairs() const noexcept { return covers_all_; }

  /// Member restricted to the covered pairs, listed in ascending pair order.
  [[nodiscard]] std::vector<double> member(double z, double c) const;
  /// Member of the f(q) = r_star slice; f acts on the covered block.
  [[nodiscard]] std::vector<double> constrained_member(double z, const FFunction& f) const;
  /// Picks the covered components out of a full table.
  [[nodiscard]] std::vector<double> restrict(std::span<const double> q) const;
  /// Writes a covered-block vector into a full table (other entries kept).
  void embed(std::span<const double> block, std::span<double> q) const;

  /// Accepts a full table or a covered block.
  /// Sup-norm distance from the covered block of q to the set, or to its
  /// f(q) = r_star slice when `f` is given. For ExplicitList it is an upper
  /// bound from a grid of resolution 1e-3.
  [[nodiscard]] double distance(std::span<const double> q, const FFunction* f = nullptr) const;

 private:
  [[nodiscard]] double gap(std::span<const double> block, double z, const FFunction* f) const;

  std::string name_;
  OracleKind kind_;
  std::vector<PairId> pairs_;
  BaseMap base_;
  double z_lo_;
  double z_hi_;
  double r_star_;
  bool covers_all_ = false;
  std::size_t model_pairs_ = 0;
};

inline constexpr double kOracleGridStep = 1e-3;

/// Oracle for one of the bundled models, selected by model name
/// (ex2_1_a, ex2_1_b, ex2_1_c, fig7_a, fig7_b, ex5_1). Returns nullopt for
/// any other model. fig7_b is covered on its closed class only.
std::optional<SolutionSetOracle> bundled_oracle(const Model& model);

double distance_to_solution_set(const SolutionSetOracle& oracle, std::span<const double> q, bool constrained,
                                const FFunction* f = nullptr);

struct DimensionReport {
  std::size_t n_star = 0;
  std::size_t expected_dimension = 0;
  std::size_t estimated_dimension = 0;
  std::vector<double> singular_values;
  double rank_tolerance = 0.0;  // relative threshold on singular values
  std::size_t samples = 0;
  std::size_t neighbours = 0;
  double worst_member_distance = 0.0;  // constrained oracle distance, when an oracle is given
  double member_tolerance = 1e-6;      // widened to the grid step for list oracles
  double worst_residual = 0.0;
  double worst_f_error = 0.0;

  [[nodiscard]] bool passed() const noexcept {
    return estimated_dimension == expected_dimension && worst_residual <= 1e-8 && worst_f_error <= 1e-8 &&
           worst_member_distance <= member_tolerance;
  }
};

inline constexpr double kRankTolerance = 1e-6;

/// Samples the f(q) = r_star slice by running classical RVI from random
/// starts, then estimates its local dimension as the numerical rank of the
/// differences between a central sample and its nearest neighbours. The
/// rank counts singular values above kRankTolerance times the largest one,
/// which is a heuristic, not a certificate.
DimensionReport verify_dimension_claim(const Model& model, const FFunction& f, std::size_t samples, Rng& rng,
                                       const SolutionSetOracle* oracle = nullptr);
nlohmann::json dimension_to_json(const DimensionReport& report);

}  // namespace arl
