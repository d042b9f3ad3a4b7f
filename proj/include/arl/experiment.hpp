#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arl/model.hpp"

namespace arl {

enum class Algorithm { DifferentialQ, RviQ, InterOption, IntraOption };
std::string_view to_string(Algorithm algo) noexcept;
Algorithm parse_algorithm(std::string_view text);

struct Tolerances {
  double distance = 0.05;  // sup-distance to the solution-set oracle
  double f_error = 0.05;   // |f(Q) - r*|
  double duration = 0.05;  // max |L - l-hat| (inter-option only)
  double quantile = 0.9;   // fraction of seeds that must meet each tolerance
  bool require_greedy = true;
};

/// Everything needed to reproduce a batch of runs. Paths are resolved
/// against the config file's directory first and the bundled data
/// directory second.
struct RunConfig {
  std::string name;
  std::filesystem::path model;
  std::optional<std::filesystem::path> options;
  Algorithm algorithm = Algorithm::DifferentialQ;
  std::string f_spec;
  std::string schedule = "harmonic";
  std::string duration_schedule = "harmonic";
  /// "stream" (single trajectory under the behavior policy) or "synchronous".
  std::string update = "stream";
  nlohmann::json behavior;  // {action: p} or {state: {action: p}}; options use option names
  double epsilon = 0.1;     // intra-option lower bound on behavior probabilities
  nlohmann::json initial_q = 0.0;
  double eta = 1.0;
  double rbar0 = 0.0;
  double initial_duration = 1.0;
  std::string start_state;
  std::size_t steps = 0;
  std::size_t record_every = 1;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output;
  Tolerances tolerances;
};

RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

struct TraceRow {
  std::size_t step = 0;
  std::vector<double> q;
  double f_value = 0.0;
  double rbar = 0.0;  // R-bar for Differential Q-learning; f(Q) otherwise
  double residual = 0.0;
  std::optional<double> distance;
  bool greedy_optimal = false;
};

struct RunTrace {
  std::uint64_t seed = 0;
  std::vector<std::string> labels;  // one per Q component
  std::vector<TraceRow> rows;
  std::vector<double> final_q;
  double final_f = 0.0;
  double r_star = 0.0;
  double final_residual = 0.0;
  bool final_greedy_optimal = false;
  std::optional<double> final_distance;
  std::optional<double> final_duration_error;
  /// Last iteration at which the stream stood outside the closed class.
  std::optional<std::size_t> last_transient_visit;
};

struct SeedSummary {
  std::uint64_t seed = 0;
  std::optional<double> final_distance;
  double final_f = 0.0;
  double f_error = 0.0;
  double final_residual = 0.0;
  bool final_greedy_optimal = false;
  double tail_greedy_fraction = 0.0;  // over the last 10% of recorded rows
  std::optional<double> duration_error;
  std::optional<std::size_t> last_transient_visit;
  std::optional<std::size_t> first_nan_row;
};

struct Spread {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct ExperimentSummary {
  std::vector<SeedSummary> seeds;
  std::optional<Spread> distance;
  Spread f_error;
  std::optional<Spread> duration_error;
  double distance_pass_fraction = 1.0;
  double f_pass_fraction = 0.0;
  double duration_pass_fraction = 1.0;
  double tail_greedy_pass_fraction = 0.0;
  bool all_final_greedy_optimal = false;
  std::vector<std::string> failures;

  [[nodiscard]] bool passed() const noexcept { return failures.empty(); }
};

ExperimentSummary summarize(const std::vector<RunTrace>& traces, const Tolerances& tolerances);
nlohmann::json summary_to_json(const ExperimentSummary& summary);

struct ExperimentResult {
  std::vector<RunTrace> traces;
  ExperimentSummary summary;
};

/// Runs every seed (in parallel) and assembles the traces in seed order, so
/// the output never depends on scheduling.
ExperimentResult run_experiment(const RunConfig& config);
RunTrace run_single(const RunConfig& config, std::uint64_t seed);

/// `# arl-trace v1`, then a header line and one row per recorded step.
void write_trace_csv(const RunTrace& trace, std::ostream& out);
/// One CSV per seed plus summary.json under `dir`.
void write_outputs(const ExperimentResult& result, const RunConfig& config, const std::filesystem::path& dir);

/// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace arl
