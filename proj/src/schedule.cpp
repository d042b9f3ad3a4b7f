#include "arl/schedule.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "arl/errors.hpp"

namespace arl {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double read_arg(std::string_view args, std::string_view key, double fallback) {
  std::stringstream in{std::string(args)};
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || std::string_view(item).substr(0, eq) != key) continue;
    const std::string_view value = std::string_view(item).substr(eq + 1);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
      throw Error(ErrorKind::ConfigError, "schedule argument '" + item + "' is not a number");
    }
    return out;
  }
  return fallback;
}

}  // namespace

double StepSchedule::operator()(std::size_t n) const {
  const auto x = static_cast<double>(n);
  return std::visit(Overloaded{
                        [&](const Harmonic& h) { return h.c / (x + h.d); },
                        [&](const LogHarmonic& h) { return h.c * std::log(x + 3.0) / (x + 3.0); },
                        [&](const CustomSchedule& h) { return h.rate(n); },
                    },
                    kind_);
}

std::string StepSchedule::describe() const {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const Harmonic& h) { out << "harmonic(c=" << h.c << ", d=" << h.d << ")"; },
                 [&](const LogHarmonic& h) { out << "loglinear(c=" << h.c << ")"; },
                 [&](const CustomSchedule& h) { out << h.name; },
             },
             kind_);
  return out.str();
}

StepSchedule parse_schedule(std::string_view text) {
  const auto colon = text.find(':');
  const auto kind = text.substr(0, colon);
  const auto args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (kind == "harmonic") return StepSchedule::harmonic(read_arg(args, "c", 1.0), read_arg(args, "d", 1.0));
  if (kind == "loglinear") return StepSchedule::log_harmonic(read_arg(args, "c", 1.0));
  if (kind == "inverse-square") {
    return StepSchedule::custom("inverse-square", [](std::size_t n) {
      const double k = static_cast<double>(n) + 1.0;
      return 1.0 / (k * k);
    });
  }
  if (kind == "constant") {
    const double value = read_arg(args, "value", 0.1);
    return StepSchedule::custom("constant", [value](std::size_t) { return value; });
  }
  throw Error(ErrorKind::ConfigError, "unknown step-size schedule '" + std::string(text) + "'");
}

std::optional<AsyncCountAudit> audit_async_counts(const StepSchedule& schedule, const CountTrajectory& counts,
                                                  std::size_t n, double x) {
  if (n >= counts.size()) return std::nullopt;
  double mass = 0.0;
  std::size_t m = n;
  for (; m < counts.size(); ++m) {
    mass += schedule(m);
    if (m > n && mass >= x) break;
  }
  if (m >= counts.size()) return std::nullopt;

  AsyncCountAudit audit;
  audit.n = n;
  audit.horizon_index = m;
  audit.x = x;
  const std::size_t dim = counts[n].size();
  audit.ratios.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double local = 0.0;
    for (std::size_t k = counts[n][i]; k <= counts[m][i]; ++k) local += schedule(k);
    audit.ratios[i] = local / x;
  }
  return audit;
}

ScheduleReport check_step_schedule(const StepSchedule& schedule, const ScheduleCheckOptions& options) {
  ScheduleReport report;
  const std::size_t horizon = std::max<std::size_t>(options.horizon, 16);
  std::vector<double> alpha(horizon + 1);
  for (std::size_t n = 0; n <= horizon; ++n) alpha[n] = schedule(n);

  for (std::size_t n = 0; n <= horizon; ++n) {
    if (!(alpha[n] > 0.0) || !std::isfinite(alpha[n])) {
      report.positive = false;
      report.failures.push_back("alpha_" + std::to_string(n) + " is not positive and finite");
      break;
    }
  }
  for (std::size_t n = horizon / 2; n < horizon; ++n) {
    if (alpha[n + 1] > alpha[n]) {
      report.eventually_monotone = false;
      report.failures.push_back("alpha increases at n = " + std::to_string(n));
      break;
    }
  }

  // Sums over consecutive doubling blocks [h/4, h/2) and [h/2, h): a
  // divergent harmonic-like series keeps block sums roughly constant, a
  // square-summable one sees the squared block sums shrink geometrically.
  auto block = [&](std::size_t lo, std::size_t hi, bool squared) {
    double acc = 0.0;
    for (std::size_t n = lo; n < hi; ++n) acc += squared ? alpha[n] * alpha[n] : alpha[n];
    return acc;
  };
  const std::size_t h = horizon;
  const double s_prev = block(h / 4, h / 2, false);
  const double s_last = block(h / 2, h, false);
  report.divergence_block_ratio = s_last / s_prev;
  if (report.divergence_block_ratio < 0.9) {
    report.sum_diverges = false;
    report.failures.push_back("sum of alpha appears to converge (block ratio " +
                              std::to_string(report.divergence_block_ratio) + ")");
  }
  const double q_prev = block(h / 4, h / 2, true);
  const double q_last = block(h / 2, h, true);
  report.square_block_ratio = q_last / q_prev;
  if (report.square_block_ratio > 0.75) {
    report.square_summable = false;
    report.failures.push_back("sum of alpha^2 appears to diverge (block ratio " +
                              std::to_string(report.square_block_ratio) + ")");
  }

  double sup_first = 0.0;
  double sup_second = 0.0;
  for (std::size_t n = 1; n <= horizon; ++n) {
    const double ratio = alpha[n / 2] / alpha[n];
    double& slot = n <= horizon / 2 ? sup_first : sup_second;
    slot = std::max(slot, ratio);
  }
  report.half_index_ratio = std::max(sup_first, sup_second);
  if (!std::isfinite(report.half_index_ratio) || sup_second > 1.01 * sup_first + 1e-12) {
    report.ratio_bounded = false;
    report.failures.push_back("alpha_[n/2] / alpha_n keeps growing");
  }

  if (options.counts != nullptr) {
    report.audit = audit_async_counts(schedule, *options.counts, options.audit_n, options.audit_x);
    bool ok = report.audit.has_value();
    if (!ok) report.failures.push_back("count trajectory too short for the asynchrony audit");
    if (report.audit) {
      for (double r : report.audit->ratios) {
        if (std::abs(r - 1.0) > options.audit_tolerance) {
          ok = false;
          report.failures.push_back("asynchrony ratio " + std::to_string(r) + " is not within tolerance of 1");
        }
      }
    }
    report.async_counts_ok = ok;
  }
  return report;
}

}  // namespace arl
