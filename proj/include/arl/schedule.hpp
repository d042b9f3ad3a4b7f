#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace arl {

/// alpha_n = c / (n + d)
struct Harmonic {
  double c = 1.0;
  double d = 1.0;
};

/// alpha_n = c * ln(n + 3) / (n + 3)
struct LogHarmonic {
  double c = 1.0;
};

struct CustomSchedule {
  std::string name;
  std::function<double(std::size_t)> rate;
};

/// Deterministic step-size sequence alpha_n, n >= 0. Learners that use per
/// component counts call at_count(k) for the k-th update of a component
/// (k >= 1), which reads alpha_{k-1}; Harmonic(1, 1) thus yields 1/k.
class StepSchedule {
 public:
  using Kind = std::variant<Harmonic, LogHarmonic, CustomSchedule>;

  StepSchedule() : kind_(Harmonic{}) {}
  explicit StepSchedule(Kind kind) : kind_(std::move(kind)) {}

  static StepSchedule harmonic(double c = 1.0, double d = 1.0) { return StepSchedule(Harmonic{c, d}); }
  static StepSchedule log_harmonic(double c = 1.0) { return StepSchedule(LogHarmonic{c}); }
  static StepSchedule custom(std::string name, std::function<double(std::size_t)> rate) {
    return StepSchedule(CustomSchedule{std::move(name), std::move(rate)});
  }

  [[nodiscard]] double operator()(std::size_t n) const;
  [[nodiscard]] double at_count(std::size_t count) const { return (*this)(count == 0 ? 0 : count - 1); }
  [[nodiscard]] bool is_harmonic() const noexcept { return std::holds_alternative<Harmonic>(kind_); }
  [[nodiscard]] std::string describe() const;

 private:
  Kind kind_;
};

/// harmonic[:c=1,d=1] | loglinear[:c=1] | inverse-square | constant:value=0.1
StepSchedule parse_schedule(std::string_view text);

/// Counts nu_n(i) for n = 0..T: counts[n][i].
using CountTrajectory = std::vector<std::vector<std::size_t>>;

struct AsyncCountAudit {
  std::size_t n = 0;
  std::size_t horizon_index = 0;  // N(n, x)
  double x = 1.0;
  /// sum_{k = nu_n(i)}^{nu_N(i)} alpha_k / x for every component i.
  std::vector<double> ratios;
};

/// The asynchrony quantity of the harmonic example: for each component,
/// the step-size mass spent by that component while the global step-size
/// mass advances by x, normalized by x. Returns nullopt when the trajectory
/// is too short to reach N(n, x).
std::optional<AsyncCountAudit> audit_async_counts(const StepSchedule& schedule, const CountTrajectory& counts,
                                                  std::size_t n, double x);

struct ScheduleCheckOptions {
  std::size_t horizon = 1'000'000;
  const CountTrajectory* counts = nullptr;
  std::size_t audit_n = 0;
  double audit_x = 1.0;
  double audit_tolerance = 0.05;
};

struct ScheduleReport {
  bool positive = true;
  bool eventually_monotone = true;
  bool sum_diverges = true;
  bool square_summable = true;
  bool ratio_bounded = true;
  std::optional<bool> async_counts_ok;

  double divergence_block_ratio = 0.0;  // sum over [n, 2n) / sum over [n/2, n)
  double square_block_ratio = 0.0;      // same, for alpha^2
  double half_index_ratio = 0.0;        // sup alpha_[n/2] / alpha_n
  std::optional<AsyncCountAudit> audit;
  std::vector<std::string> failures;

  [[nodiscard]] bool passed() const noexcept {
    return positive && eventually_monotone && sum_diverges && square_summable && ratio_bounded &&
           async_counts_ok.value_or(true);
  }
};

/// Finite-horizon numeric audit of the step-size conditions. It inspects
/// trends up to the horizon and cannot prove the asymptotic statements.
ScheduleReport check_step_schedule(const StepSchedule& schedule, const ScheduleCheckOptions& options = {});

}  // namespace arl
