#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "arl/rng.hpp"

namespace arl {

class Model;

/// f(q) = weights . q + offset
struct LinearRef {
  std::vector<double> weights;
  double offset = 0.0;
};

/// f(q) = scale * max_i q(i) + offset
struct MaxRef {
  double scale = 1.0;
  double offset = 0.0;
};

/// f(q) = coeff * q(index)
struct ComponentRef {
  std::size_t index = 0;
  double coeff = 1.0;
};

/// The reference function that makes the general algorithm reproduce
/// Differential Q-learning: f(q) = eta * sum(q) - eta * sum(q0) + rbar0.
struct DifferentialRef {
  double eta = 1.0;
  double initial_sum = 0.0;
  double initial_rate = 0.0;
};

/// The scalar reference f subtracted by every relative value iteration.
/// All kinds are Lipschitz, shift by u*c under q + c*1 and are positively
/// homogeneous about f(0).
class FFunction {
 public:
  using Kind = std::variant<LinearRef, MaxRef, ComponentRef, DifferentialRef>;

  FFunction(Kind kind, std::size_t dim);

  static FFunction linear(std::vector<double> weights, double offset);
  static FFunction uniform_linear(std::size_t dim, double weight, double offset);
  static FFunction max_based(std::size_t dim, double scale, double offset);
  static FFunction component(std::size_t dim, std::size_t index, double coeff = 1.0);
  static FFunction differential(std::size_t dim, double eta, double initial_sum, double initial_rate);

  [[nodiscard]] double operator()(std::span<const double> q) const;
  [[nodiscard]] double at_zero() const noexcept;
  /// u with f(q + c*1) = f(q) + c*u.
  [[nodiscard]] double shift_gain() const noexcept;
  /// Max-norm Lipschitz constant L.
  [[nodiscard]] double lipschitz() const noexcept;
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] const Kind& kind() const noexcept { return kind_; }
  [[nodiscard]] std::string describe() const;

 private:
  Kind kind_;
  std::size_t dim_;
};

/// Builds an f from a compact text form:
///   linear:b=-12[,w=1]        weights w*1, offset b
///   linear:nu=0.25;0.25;..,b=0
///   max:beta=2[,b=0]
///   component:pair=1/dashed[,coeff=1]   or component:index=3
///   diffq:eta=1[,rbar0=0]     initial sum taken from `initial_q`
FFunction parse_ffunction(std::string_view text, const Model& model, std::span<const double> initial_q = {});
/// Same grammar for a bare index set of size `dim` (pair names unavailable).
FFunction parse_ffunction(std::string_view text, std::size_t dim, std::span<const double> initial_q = {});

struct PropertyCheckReport {
  bool lipschitz_ok = true;
  bool shift_ok = true;
  bool homogeneity_ok = true;
  double worst_lipschitz_ratio = 0.0;  // max |f(x)-f(y)| / (L ||x-y||)
  double worst_shift_error = 0.0;
  double worst_homogeneity_error = 0.0;
  double u = 0.0;
  double lipschitz = 0.0;
  std::size_t trials = 0;

  [[nodiscard]] bool passed() const noexcept { return lipschitz_ok && shift_ok && homogeneity_ok; }
};

/// Randomized audit of the three structural properties, each to 1e-9
/// relative to the magnitudes involved.
PropertyCheckReport ffunction_property_check(const FFunction& f, std::size_t trials, Rng& rng);

}  // namespace arl
