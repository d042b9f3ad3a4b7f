#include "arl/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <thread>

#include "arl/chain.hpp"
#include "arl/errors.hpp"
#include "arl/ffunction.hpp"
#include "arl/learner.hpp"
#include "arl/model_io.hpp"
#include "arl/options.hpp"
#include "arl/schedule.hpp"
#include "arl/solvers.hpp"
#include "arl/structure.hpp"

namespace arl {

using nlohmann::json;

std::string_view to_string(Algorithm algo) noexcept {
  switch (algo) {
    case Algorithm::DifferentialQ:
      return "diffq";
    case Algorithm::RviQ:
      return "rvi";
    case Algorithm::InterOption:
      return "inter-option";
    case Algorithm::IntraOption:
      return "intra-option";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view text) {
  for (Algorithm a : {Algorithm::DifferentialQ, Algorithm::RviQ, Algorithm::InterOption, Algorithm::IntraOption}) {
    if (text == to_string(a)) return a;
  }
  throw Error(ErrorKind::ConfigError, "unknown algorithm '" + std::string(text) + "'");
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

namespace {

std::filesystem::path resolve_against(const std::filesystem::path& base_dir, const std::filesystem::path& p) {
  if (p.is_relative() && !base_dir.empty() && std::filesystem::exists(base_dir / p)) return base_dir / p;
  const auto resolved = resolve_data_path(p);
  if (!std::filesystem::exists(resolved)) throw Error(ErrorKind::ConfigError, "file not found: " + p.string());
  return resolved;
}

template <class T>
T field(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config field '") + key + "': " + e.what());
  }
}

/// Initial values: a number, a full array, or an object keyed by component
/// label or by state name.
std::vector<double> parse_initial(const json& spec, const std::vector<std::string>& labels,
                                  const std::vector<std::string>& state_of) {
  std::vector<double> q(labels.size(), 0.0);
  if (spec.is_number()) {
    std::fill(q.begin(), q.end(), spec.get<double>());
  } else if (spec.is_array()) {
    if (spec.size() != labels.size()) {
      throw Error(ErrorKind::ConfigError, "initial_q has " + std::to_string(spec.size()) + " entries, expected " +
                                              std::to_string(labels.size()));
    }
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = spec[i].get<double>();
  } else if (spec.is_object()) {
    for (const auto& [key, value] : spec.items()) {
      bool matched = false;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == key || state_of[i] == key) {
          q[i] = value.get<double>();
          matched = true;
        }
      }
      if (!matched) throw Error(ErrorKind::ConfigError, "initial_q names unknown component '" + key + "'");
    }
  } else {
    throw Error(ErrorKind::ConfigError, "initial_q must be a number, array or object");
  }
  return q;
}

/// Rows of a behavior table over `choices` for every state: either one
/// state-independent row {choice: p} or per-state rows with an optional "*".
std::vector<std::vector<double>> parse_behavior(const json& spec, const std::vector<std::string>& states,
                                                const std::vector<std::string>& choices) {
  auto read_row = [&](const json& row) {
    std::vector<double> out(choices.size(), 0.0);
    for (const auto& [key, value] : row.items()) {
      const auto it = std::find(choices.begin(), choices.end(), key);
      if (it == choices.end()) throw Error(ErrorKind::ConfigError, "behavior names unknown choice '" + key + "'");
      out[static_cast<std::size_t>(it - choices.begin())] = value.get<double>();
    }
    return out;
  };
  if (!spec.is_object() || spec.empty()) throw Error(ErrorKind::ConfigError, "behavior must be a nonempty object");
  const bool flat = std::all_of(spec.begin(), spec.end(), [](const json& v) { return v.is_number(); });
  std::vector<std::vector<double>> rows;
  for (const auto& s : states) {
    if (flat) {
      rows.push_back(read_row(spec));
    } else if (spec.contains(s)) {
      rows.push_back(read_row(spec.at(s)));
    } else if (spec.contains("*")) {
      rows.push_back(read_row(spec.at("*")));
    } else {
      throw Error(ErrorKind::ConfigError, "behavior has no row for state '" + s + "'");
    }
  }
  return rows;
}

/// Drops mass on unavailable actions and renormalizes each row.
StationaryPolicy action_behavior(const Model& model, const json& spec) {
  auto rows = parse_behavior(spec, model.state_names(), model.action_names());
  for (StateId s = 0; s < model.num_states(); ++s) {
    double total = 0.0;
    for (ActionId a = 0; a < model.num_actions(); ++a) {
      if (!model.available(s, a)) rows[s][a] = 0.0;
      total += rows[s][a];
    }
    if (!(total > 0.0)) {
      throw Error(ErrorKind::ConfigError, "behavior puts no mass on state '" + model.state_names()[s] + "'");
    }
    for (double& p : rows[s]) p /= total;
  }
  return StationaryPolicy(model, std::move(rows));
}

StateId resolve_state(const Model& model, const std::string& name) {
  if (name.empty()) return 0;
  const auto s = model.find_state(name);
  if (!s) throw Error(ErrorKind::ConfigError, "unknown start state '" + name + "'");
  return *s;
}

bool all_finite(const TraceRow& row) {
  return std::isfinite(row.f_value) && std::isfinite(row.rbar) &&
         std::all_of(row.q.begin(), row.q.end(), [](double v) { return std::isfinite(v); });
}

RunTrace run_primitive(const RunConfig& config, std::uint64_t seed) {
  const Model model = load_model(config.model);
  const auto eq = expected_quantities(model);
  const auto gain = optimal_gain(model);
  const auto cls = classify(model, {.check_unichain = false});
  const auto oracle = bundled_oracle(model);
  std::vector<bool> in_closed(model.num_states(), cls.closed_class.empty());
  for (StateId s : cls.closed_class) in_closed[s] = true;

  RunTrace trace;
  trace.seed = seed;
  trace.r_star = gain.r_star;
  std::vector<std::string> state_of;
  for (PairId p = 0; p < model.num_pairs(); ++p) {
    trace.labels.push_back(model.pair_label(p));
    state_of.push_back(model.state_names()[model.pair_state(p)]);
  }
  const auto q0 = parse_initial(config.initial_q, trace.labels, state_of);

  const bool diffq = config.algorithm == Algorithm::DifferentialQ;
  std::string f_text = config.f_spec;
  if (f_text.empty()) {
    if (!diffq) throw Error(ErrorKind::ConfigError, "RVI Q-learning needs an f specification");
    f_text = "diffq:eta=" + format_double(config.eta) + ",rbar0=" + format_double(config.rbar0);
  }
  const FFunction f = parse_ffunction(f_text, model, q0);
  const StepSchedule schedule = parse_schedule(config.schedule);

  UpdateSource source = Synchronous{};
  if (config.update == "stream") {
    source = OffPolicyStream{action_behavior(model, config.behavior), resolve_state(model, config.start_state)};
  } else if (config.update != "synchronous") {
    throw Error(ErrorKind::ConfigError, "update must be 'stream' or 'synchronous'");
  }

  LearnerState learner = LearnerState::initial(q0, config.rbar0);
  auto snapshot = [&] {
    TraceRow row;
    row.step = learner.n;
    row.q = learner.q;
    row.f_value = f(learner.q);
    row.rbar = diffq ? learner.rbar : row.f_value;
    row.residual = optimality_residual(model, eq, learner.q, gain.r_star);
    if (oracle) row.distance = oracle->distance(learner.q);
    row.greedy_optimal = gain.is_optimal(greedy_policy(model, learner.q));
    return row;
  };

  const Rng master(seed);
  trace.rows.push_back(snapshot());
  for (std::size_t n = 1; n <= config.steps; ++n) {
    if (const auto* stream = std::get_if<OffPolicyStream>(&source); stream && !in_closed[stream->state]) {
      trace.last_transient_visit = learner.n;
    }
    if (diffq) {
      differential_q_step(learner, model, config.eta, schedule, source, master);
    } else {
      step(learner, model, f, schedule, source, master);
    }
    if (n % config.record_every == 0) trace.rows.push_back(snapshot());
  }
  const TraceRow last = snapshot();
  trace.final_q = last.q;
  trace.final_f = last.rbar;
  trace.final_residual = last.residual;
  trace.final_distance = last.distance;
  trace.final_greedy_optimal = last.greedy_optimal;
  return trace;
}

RunTrace run_options(const RunConfig& config, std::uint64_t seed) {
  if (!config.options) throw Error(ErrorKind::ConfigError, "option algorithms need an options file");
  const Model model = load_model(config.model);
  const OptionSet opts = load_options(*config.options, model);
  const auto audit = audit_termination(model, opts);
  if (!audit.passed) throw Error(ErrorKind::ConfigError, "options fail the termination audit");
  const auto quantities = exact_option_quantities(model, opts);
  const Model smdp = induced_smdp(model, opts, quantities);
  const auto gain = optimal_gain(smdp);

  RunTrace trace;
  trace.seed = seed;
  trace.r_star = gain.r_star;
  std::vector<std::string> state_of;
  for (StateId s = 0; s < opts.num_states(); ++s) {
    for (OptionId o = 0; o < opts.num_options(); ++o) {
      trace.labels.push_back(model.state_names()[s] + "/" + opts.names()[o]);
      state_of.push_back(model.state_names()[s]);
    }
  }
  const auto q0 = parse_initial(config.initial_q, trace.labels, state_of);
  const FFunction f = parse_ffunction(config.f_spec, opts.num_pairs(), q0);
  const StepSchedule alpha = parse_schedule(config.schedule);
  const bool inter = config.algorithm == Algorithm::InterOption;

  InterOptionLearner inter_learner = InterOptionLearner::initial(q0, config.initial_duration);
  IntraOptionLearner intra_learner = IntraOptionLearner::initial(q0);
  const std::vector<double>& q = inter ? inter_learner.q : intra_learner.q;

  auto snapshot = [&](std::size_t n) {
    TraceRow row;
    row.step = n;
    row.q = q;
    row.f_value = f(q);
    row.rbar = row.f_value;
    const auto res = option_residuals(model, opts, quantities, q, gain.r_star);
    row.residual = inter ? res.inter : res.intra;
    const auto greedy = greedy_options(opts, q);
    row.greedy_optimal = gain.is_optimal(DeterministicPolicy(greedy.begin(), greedy.end()));
    return row;
  };

  const Rng master(seed);
  trace.rows.push_back(snapshot(0));
  if (inter) {
    const StepSchedule beta = parse_schedule(config.duration_schedule);
    OptionUpdateSource source = Synchronous{};
    if (config.update == "stream") {
      source = OptionStream{parse_behavior(config.behavior, model.state_names(), opts.names()),
                            resolve_state(model, config.start_state)};
    } else if (config.update != "synchronous") {
      throw Error(ErrorKind::ConfigError, "update must be 'stream' or 'synchronous'");
    }
    for (std::size_t n = 1; n <= config.steps; ++n) {
      inter_option_step(inter_learner, model, opts, f, alpha, beta, source, master);
      if (n % config.record_every == 0) trace.rows.push_back(snapshot(n));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < quantities.duration.size(); ++i) {
      worst = std::max(worst, std::abs(inter_learner.duration[i] - quantities.duration[i]));
    }
    trace.final_duration_error = worst;
  } else {
    if (config.update != "synchronous") {
      throw Error(ErrorKind::ConfigError, "the intra-option runner updates all states each iteration");
    }
    const IntraOptionConfig intra{action_behavior(model, config.behavior), config.epsilon, {}, {}};
    for (std::size_t n = 1; n <= config.steps; ++n) {
      intra_option_step(intra_learner, model, opts, f, alpha, intra, master);
      if (n % config.record_every == 0) trace.rows.push_back(snapshot(n));
    }
  }
  const TraceRow last = snapshot(config.steps);
  trace.final_q = last.q;
  trace.final_f = last.f_value;
  trace.final_residual = last.residual;
  trace.final_greedy_optimal = last.greedy_optimal;
  return trace;
}

Spread spread_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return {values.front(), median, values.back()};
}

json spread_json(const Spread& s) { return json{{"min", s.min}, {"median", s.median}, {"max", s.max}}; }

}  // namespace

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  try {
    cfg.name = field<std::string>(doc, "name", "experiment");
    if (!doc.contains("model")) throw Error(ErrorKind::ConfigError, "config needs a 'model'");
    cfg.model = resolve_against(base_dir, doc.at("model").get<std::string>());
    if (doc.contains("options")) cfg.options = resolve_against(base_dir, doc.at("options").get<std::string>());
    cfg.algorithm = parse_algorithm(field<std::string>(doc, "algorithm", "diffq"));
    cfg.f_spec = field<std::string>(doc, "f", "");
    cfg.schedule = field<std::string>(doc, "schedule", cfg.schedule);
    cfg.duration_schedule = field<std::string>(doc, "duration_schedule", cfg.duration_schedule);
    cfg.update = field<std::string>(doc, "update", cfg.update);
    cfg.behavior = doc.value("behavior", json::object());
    cfg.epsilon = field<double>(doc, "epsilon", cfg.epsilon);
    cfg.initial_q = doc.value("initial_q", json(0.0));
    cfg.eta = field<double>(doc, "eta", cfg.eta);
    cfg.rbar0 = field<double>(doc, "rbar0", cfg.rbar0);
    cfg.initial_duration = field<double>(doc, "initial_duration", cfg.initial_duration);
    cfg.start_state = field<std::string>(doc, "start_state", "");
    cfg.steps = field<std::size_t>(doc, "steps", 0);
    cfg.record_every = field<std::size_t>(doc, "record_every", 1);
    cfg.seeds = field<std::vector<std::uint64_t>>(doc, "seeds", {1});
    cfg.output = field<std::string>(doc, "output", "out/" + cfg.name);
    if (doc.contains("tolerances")) {
      const json& tol = doc.at("tolerances");
      cfg.tolerances.distance = field<double>(tol, "distance", cfg.tolerances.distance);
      cfg.tolerances.f_error = field<double>(tol, "f", cfg.tolerances.f_error);
      cfg.tolerances.duration = field<double>(tol, "duration", cfg.tolerances.duration);
      cfg.tolerances.quantile = field<double>(tol, "quantile", cfg.tolerances.quantile);
      cfg.tolerances.require_greedy = field<bool>(tol, "require_greedy", cfg.tolerances.require_greedy);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config: ") + e.what());
  }
  if (cfg.record_every == 0) throw Error(ErrorKind::ConfigError, "record_every must be positive");
  if (cfg.seeds.empty()) throw Error(ErrorKind::ConfigError, "config needs at least one seed");
  if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size()) {
    throw Error(ErrorKind::ConfigError, "seeds must be distinct");
  }
  // Fail early on files that do not validate.
  const Model model = load_model(cfg.model);
  if (cfg.options) (void)load_options(*cfg.options, model);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto resolved = resolve_data_path(path);
  try {
    return parse_run_config(read_json_file(resolved), resolved.parent_path());
  } catch (const Error& e) {
    throw Error(e.kind(), resolved.string() + ": " + e.what());
  }
}

RunTrace run_single(const RunConfig& config, std::uint64_t seed) {
  switch (config.algorithm) {
    case Algorithm::DifferentialQ:
    case Algorithm::RviQ:
      return run_primitive(config, seed);
    case Algorithm::InterOption:
    case Algorithm::IntraOption:
      return run_options(config, seed);
  }
  throw Error(ErrorKind::ConfigError, "unknown algorithm");
}

ExperimentResult run_experiment(const RunConfig& config) {
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(config.seeds.size(), 1));
  ExperimentResult result;
  result.traces.resize(config.seeds.size());
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < config.seeds.size(); i += workers) {
        result.traces[i] = run_single(config, config.seeds[i]);
      }
    }));
  }
  for (auto& job : jobs) job.get();
  result.summary = summarize(result.traces, config.tolerances);
  return result;
}

ExperimentSummary summarize(const std::vector<RunTrace>& traces, const Tolerances& tolerances) {
  if (traces.empty()) throw Error(ErrorKind::ConfigError, "nothing to summarize");
  ExperimentSummary summary;
  std::vector<double> distances;
  std::vector<double> f_errors;
  std::vector<double> durations;
  std::size_t distance_ok = 0;
  std::size_t f_ok = 0;
  std::size_t duration_ok = 0;
  std::size_t tail_ok = 0;
  summary.all_final_greedy_optimal = true;

  for (const auto& trace : traces) {
    SeedSummary s;
    s.seed = trace.seed;
    s.final_distance = trace.final_distance;
    s.final_f = trace.final_f;
    s.f_error = std::abs(trace.final_f - trace.r_star);
    s.final_residual = trace.final_residual;
    s.final_greedy_optimal = trace.final_greedy_optimal;
    s.duration_error = trace.final_duration_error;
    s.last_transient_visit = trace.last_transient_visit;
    for (std::size_t i = 0; i < trace.rows.size(); ++i) {
      if (!all_finite(trace.rows[i])) {
        s.first_nan_row = i;
        break;
      }
    }
    const std::size_t tail = std::max<std::size_t>(1, (trace.rows.size() + 9) / 10);
    std::size_t greedy = 0;
    for (std::size_t i = trace.rows.size() - std::min(tail, trace.rows.size()); i < trace.rows.size(); ++i) {
      if (trace.rows[i].greedy_optimal) ++greedy;
    }
    s.tail_greedy_fraction = static_cast<double>(greedy) / static_cast<double>(std::min(tail, trace.rows.size()));

    if (s.final_distance) {
      distances.push_back(*s.final_distance);
      if (*s.final_distance <= tolerances.distance) ++distance_ok;
    }
    f_errors.push_back(s.f_error);
    if (s.f_error <= tolerances.f_error) ++f_ok;
    if (s.duration_error) {
      durations.push_back(*s.duration_error);
      if (*s.duration_error <= tolerances.duration) ++duration_ok;
    }
    if (s.tail_greedy_fraction == 1.0) ++tail_ok;
    summary.all_final_greedy_optimal = summary.all_final_greedy_optimal && s.final_greedy_optimal;
    if (s.first_nan_row) {
      summary.failures.push_back("seed " + std::to_string(s.seed) + ": non-finite values from row " +
                                 std::to_string(*s.first_nan_row));
    }
    summary.seeds.push_back(s);
  }

  const auto n = static_cast<double>(traces.size());
  if (!distances.empty()) {
    summary.distance = spread_of(distances);
    summary.distance_pass_fraction = static_cast<double>(distance_ok) / static_cast<double>(distances.size());
  }
  summary.f_error = spread_of(f_errors);
  summary.f_pass_fraction = static_cast<double>(f_ok) / n;
  if (!durations.empty()) {
    summary.duration_error = spread_of(durations);
    summary.duration_pass_fraction = static_cast<double>(duration_ok) / static_cast<double>(durations.size());
  }
  summary.tail_greedy_pass_fraction = static_cast<double>(tail_ok) / n;

  const double q = tolerances.quantile;
  if (summary.distance_pass_fraction < q) summary.failures.push_back("distance quantile not met");
  if (summary.f_pass_fraction < q) summary.failures.push_back("f quantile not met");
  if (summary.duration_pass_fraction < q) summary.failures.push_back("duration quantile not met");
  if (tolerances.require_greedy) {
    if (!summary.all_final_greedy_optimal) summary.failures.push_back("a final greedy policy is not optimal");
    if (summary.tail_greedy_pass_fraction < q) summary.failures.push_back("greedy tail quantile not met");
  }
  return summary;
}

json summary_to_json(const ExperimentSummary& summary) {
  json seeds = json::array();
  for (const auto& s : summary.seeds) {
    json row{{"seed", s.seed},
             {"final_f", s.final_f},
             {"f_error", s.f_error},
             {"final_residual", s.final_residual},
             {"final_greedy_optimal", s.final_greedy_optimal},
             {"tail_greedy_fraction", s.tail_greedy_fraction}};
    row["final_distance"] = s.final_distance ? json(*s.final_distance) : json(nullptr);
    if (s.duration_error) row["duration_error"] = *s.duration_error;
    if (s.last_transient_visit) row["last_transient_visit"] = *s.last_transient_visit;
    if (s.first_nan_row) row["first_nan_row"] = *s.first_nan_row;
    seeds.push_back(std::move(row));
  }
  json out{{"seeds", seeds},
           {"f_error", spread_json(summary.f_error)},
           {"distance_pass_fraction", summary.distance_pass_fraction},
           {"f_pass_fraction", summary.f_pass_fraction},
           {"duration_pass_fraction", summary.duration_pass_fraction},
           {"tail_greedy_pass_fraction", summary.tail_greedy_pass_fraction},
           {"all_final_greedy_optimal", summary.all_final_greedy_optimal},
           {"failures", summary.failures},
           {"passed", summary.passed()}};
  if (summary.distance) out["distance"] = spread_json(*summary.distance);
  if (summary.duration_error) out["duration_error"] = spread_json(*summary.duration_error);
  return out;
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  out << "# arl-trace v1\n";
  out << "step";
  for (const auto& label : trace.labels) out << ",q[" << label << "]";
  out << ",f_value,rbar,residual,dist_to_Qo,greedy_optimal\n";
  for (const auto& row : trace.rows) {
    out << row.step;
    for (double v : row.q) out << ',' << format_double(v);
    out << ',' << format_double(row.f_value) << ',' << format_double(row.rbar) << ','
        << format_double(row.residual) << ',' << (row.distance ? format_double(*row.distance) : std::string()) << ','
        << (row.greedy_optimal ? 1 : 0) << '\n';
  }
}

void write_outputs(const ExperimentResult& result, const RunConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& trace : result.traces) {
    const auto path = dir / (config.name + "_seed" + std::to_string(trace.seed) + ".csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + path.string());
    write_trace_csv(trace, out);
  }
  json doc = summary_to_json(result.summary);
  doc["name"] = config.name;
  doc["algorithm"] = std::string(to_string(config.algorithm));
  doc["steps"] = config.steps;
  doc["r_star"] = result.traces.front().r_star;
  std::ofstream out(dir / "summary.json", std::ios::binary);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write summary.json");
  out << doc.dump(2) << '\n';
}

}  // namespace arl
