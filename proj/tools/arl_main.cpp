// Command-line front end for the average-reward learning toolkit.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "arl/chain.hpp"
#include "arl/errors.hpp"
#include "arl/experiment.hpp"
#include "arl/ffunction.hpp"
#include "arl/model_io.hpp"
#include "arl/ode.hpp"
#include "arl/options.hpp"
#include "arl/solvers.hpp"
#include "arl/structure.hpp"

namespace {

using nlohmann::json;
using namespace arl;

json policy_json(const Model& model, const DeterministicPolicy& policy) {
  json out = json::object();
  for (StateId s = 0; s < policy.size(); ++s) out[model.state_names()[s]] = model.action_names()[policy[s]];
  return out;
}

json q_json(const std::vector<std::string>& labels, std::span<const double> q) {
  json out = json::object();
  for (std::size_t i = 0; i < q.size(); ++i) out[labels[i]] = q[i];
  return out;
}

std::vector<std::string> pair_labels(const Model& model) {
  std::vector<std::string> out;
  for (PairId p = 0; p < model.num_pairs(); ++p) out.push_back(model.pair_label(p));
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = std::stoull(item.substr(0, dash));
      const auto hi = std::stoull(item.substr(dash + 1));
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(std::stoull(item));
    }
  }
  return seeds;
}

int cmd_run(const std::string& config_path, const std::string& seeds_override, const std::string& out_dir) {
  RunConfig config = load_run_config(config_path);
  if (!seeds_override.empty()) config.seeds = parse_seed_list(seeds_override);
  const auto result = run_experiment(config);
  const std::filesystem::path dir = out_dir.empty() ? config.output : std::filesystem::path(out_dir);
  write_outputs(result, config, dir);
  const auto& s = result.summary;
  std::cout << config.name << ": r* = " << format_double(result.traces.front().r_star)
            << ", f within tolerance for " << format_double(s.f_pass_fraction);
  if (s.distance) std::cout << ", distance within tolerance for " << format_double(s.distance_pass_fraction);
  std::cout << " of seeds -> " << (s.passed() ? "PASS" : "FAIL") << '\n';
  for (const auto& f : s.failures) std::cout << "  " << f << '\n';
  std::cout << "wrote " << (dir / "summary.json").string() << '\n';
  return s.passed() ? 0 : 1;
}

int cmd_classify(const std::string& model_path, bool skip_unichain) {
  const Model model = load_model(model_path);
  const auto c = classify(model, {.check_unichain = !skip_unichain});
  json out{{"model", model.name()},
           {"class", std::string(to_string(c.primary()))},
           {"communicating", c.communicating},
           {"weakly_communicating", c.weakly_communicating}};
  out["unichain"] = c.unichain ? json(*c.unichain) : json(nullptr);
  json closed = json::array();
  for (StateId s : c.closed_class) closed.push_back(model.state_names()[s]);
  out["closed_class"] = closed;
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_gain(const std::string& model_path) {
  const Model model = load_model(model_path);
  const auto gain = optimal_gain(model);
  json policies = json::array();
  for (const auto& p : gain.optimal_policies) policies.push_back(policy_json(model, p));
  json per_state = json::object();
  for (StateId s = 0; s < model.num_states(); ++s) per_state[model.state_names()[s]] = gain.per_state_gain[s];
  std::cout << json{{"model", model.name()},
                    {"r_star", gain.r_star},
                    {"constant", gain.constant},
                    {"per_state_gain", per_state},
                    {"optimal_policies", policies}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_structure(const std::string& model_path) {
  const Model model = load_model(model_path);
  std::cout << structure_to_json(compute_structure(model), model).dump(2) << '\n';
  return 0;
}

int cmd_dimcheck(const std::string& model_path, const std::string& f_text, std::size_t samples, std::uint64_t seed) {
  const Model model = load_model(model_path);
  const FFunction f = parse_ffunction(f_text, model);
  const auto oracle = bundled_oracle(model);
  Rng rng(seed);
  const auto report = verify_dimension_claim(model, f, samples, rng, oracle ? &*oracle : nullptr);
  std::cout << dimension_to_json(report).dump(2) << '\n';
  return report.passed() ? 0 : 1;
}

int cmd_solve(const std::string& model_path, const std::string& method, const std::string& reference, double alpha,
              double tol, bool as_json) {
  const Model model = load_model(model_path);
  const auto gain = optimal_gain(model);
  const std::vector<double> q0(model.num_pairs(), 0.0);
  const RviOptions opts{.alpha = alpha, .tol = tol, .record_traces = true, .residual_rate = gain.r_star};
  RviResult result;
  if (method == "schweitzer") {
    const auto pair = model.find_pair(reference);
    if (!pair) throw Error(ErrorKind::UnknownStateAction, "unknown reference pair '" + reference + "'");
    result = schweitzer_rvi(model, *pair, q0, opts);
  } else {
    RviReference ref = FixedPairReference{};
    if (const auto pair = model.find_pair(reference)) {
      ref = FixedPairReference{*pair};
    } else {
      ref = parse_ffunction(reference, model, q0);
    }
    result = classical_rvi(model, ref, q0, opts);
  }
  const double residual = optimality_residual(model, result.q, gain.r_star);
  const bool ok = result.converged && std::abs(result.f_final - gain.r_star) <= 1e-8;
  if (as_json) {
    std::cout << json{{"model", model.name()},
                      {"method", method},
                      {"converged", result.converged},
                      {"iterations", result.iterations},
                      {"f_final", result.f_final},
                      {"r_star", gain.r_star},
                      {"residual", residual},
                      {"q", q_json(pair_labels(model), result.q)},
                      {"greedy_policy", policy_json(model, greedy_policy(model, result.q))}}
                     .dump(2)
              << '\n';
  } else {
    std::cout << "iteration,f_value,span_delta,residual\n";
    for (std::size_t i = 0; i < result.span_trace.size(); ++i) {
      std::cout << i << ',' << format_double(result.f_trace[i]) << ',' << format_double(result.span_trace[i]) << ','
                << format_double(result.residual_trace[i]) << '\n';
    }
    std::cout << "# converged=" << (result.converged ? "true" : "false") << " f_final=" << format_double(result.f_final)
              << " r_star=" << format_double(gain.r_star) << " residual=" << format_double(residual) << '\n';
  }
  return ok ? 0 : 1;
}

struct LearnArgs {
  std::string model;
  std::string options;
  std::string algo;
  std::string f;
  std::string schedule = "harmonic";
  std::string update;
  std::string start_state;
  std::string behavior;  // JSON; uniform over actions when empty
  double epsilon = 0.1;
  std::size_t steps = 20000;
  std::size_t record_every = 10;
  std::uint64_t seed = 1;
  std::string out;
};

// A bare kind name picks the default member of that family.
std::string expand_f(const std::string& text) {
  if (text == "linear") return "linear:w=mean,b=0";
  if (text == "component") return "component:index=0";
  return text;
}

int cmd_learn(const LearnArgs& args, bool with_options) {
  RunConfig config;
  config.name = "learn";
  config.model = resolve_data_path(args.model);
  if (with_options) {
    config.options = resolve_data_path(args.options);
    config.algorithm = args.algo == "intra" ? Algorithm::IntraOption : Algorithm::InterOption;
    config.f_spec = expand_f(args.f.empty() ? "linear" : args.f);
    config.update = args.update.empty() ? "synchronous" : args.update;
    config.epsilon = args.epsilon;
  } else {
    config.algorithm = args.algo == "rvi" ? Algorithm::RviQ : Algorithm::DifferentialQ;
    config.f_spec = expand_f(args.f);
    config.update = args.update.empty() ? "stream" : args.update;
  }
  if (args.behavior.empty()) {
    const Model model = load_model(config.model);
    config.behavior = json::object();
    for (const auto& a : model.action_names()) config.behavior[a] = 1.0;
  } else {
    config.behavior = json::parse(args.behavior);
  }
  config.schedule = args.schedule;
  config.start_state = args.start_state;
  config.steps = args.steps;
  config.record_every = args.record_every;
  config.seeds = {args.seed};

  const RunTrace trace = run_single(config, args.seed);
  if (args.out.empty()) {
    write_trace_csv(trace, std::cout);
  } else {
    std::ofstream csv(args.out, std::ios::binary);
    if (!csv) throw Error(ErrorKind::ConfigError, "cannot write " + args.out);
    write_trace_csv(trace, csv);
  }
  std::cerr << "final f = " << format_double(trace.final_f) << ", r* = " << format_double(trace.r_star)
            << ", residual = " << format_double(trace.final_residual);
  if (trace.final_distance) std::cerr << ", distance = " << format_double(*trace.final_distance);
  if (trace.final_duration_error) std::cerr << ", duration error = " << format_double(*trace.final_duration_error);
  std::cerr << '\n';
  return 0;
}

struct OdeArgs {
  std::string config;
  std::string model;
  std::string options;
  std::string f = "linear:w=mean,b=0";
  std::string algo = "mdp";
  std::string x0 = "random:5";
  double t_end = 50.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  std::string out;
};

void merge_ode_config(OdeArgs& args) {
  if (args.config.empty()) return;
  const auto path = resolve_data_path(args.config);
  const json doc = read_json_file(path);
  auto rel = [&](const std::string& p) {
    const auto candidate = path.parent_path() / p;
    return std::filesystem::exists(candidate) ? candidate.string() : p;
  };
  if (args.model.empty() && doc.contains("model")) args.model = rel(doc["model"].get<std::string>());
  if (args.options.empty() && doc.contains("options")) args.options = rel(doc["options"].get<std::string>());
  args.f = doc.value("f", args.f);
  args.algo = doc.value("algo", args.algo);
  args.x0 = doc.value("x0", args.x0);
  args.t_end = doc.value("t_end", args.t_end);
  args.dt = doc.value("dt", args.dt);
  args.seed = doc.value("seed", args.seed);
}

int cmd_ode(OdeArgs args) {
  merge_ode_config(args);
  if (args.model.empty()) throw Error(ErrorKind::ConfigError, "ode needs a model");
  const Model mdp = load_model(args.model);

  std::optional<AbstractRvi> cfg;
  std::vector<std::string> labels;
  if (args.algo == "mdp") {
    const double rate = optimal_gain(mdp).r_star;
    labels = pair_labels(mdp);
    cfg = mdp_rvi(mdp, parse_ffunction(args.f, mdp), rate);
  } else if (args.algo == "inter" || args.algo == "intra") {
    if (args.options.empty()) throw Error(ErrorKind::ConfigError, "option forms need --options");
    const OptionSet opts = load_options(args.options, mdp);
    const auto quantities = exact_option_quantities(mdp, opts);
    const double rate = optimal_gain(induced_smdp(mdp, opts, quantities)).r_star;
    for (StateId s = 0; s < opts.num_states(); ++s) {
      for (OptionId o = 0; o < opts.num_options(); ++o) labels.push_back(mdp.state_names()[s] + "/" + opts.names()[o]);
    }
    auto f = parse_ffunction(args.f, opts.num_pairs());
    cfg = args.algo == "inter" ? scaled_option_rvi(opts, quantities, std::move(f), rate)
                               : intra_option_rvi(mdp, opts, std::move(f), rate);
  } else {
    throw Error(ErrorKind::ConfigError, "algo must be mdp, inter or intra");
  }

  const std::size_t dim = cfg->dim();
  std::vector<std::vector<double>> starts;
  Rng rng(args.seed);
  if (args.x0 == "zero") {
    starts.emplace_back(dim, 0.0);
  } else if (args.x0.rfind("random:", 0) == 0) {
    const auto k = std::stoul(args.x0.substr(7));
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> x(dim);
      for (double& v : x) v = 20.0 * rng.uniform() - 10.0;
      starts.push_back(std::move(x));
    }
  } else {
    const json doc = read_json_file(args.x0);
    starts = doc.get<std::vector<std::vector<double>>>();
  }
  if (starts.empty()) throw Error(ErrorKind::ConfigError, "no starting points");

  const auto probe = probe_operator(*cfg, 10'000, rng);
  const auto solved = solve_abstract(*cfg, std::vector<double>(dim, 0.0));
  const auto fields = build_vector_fields(*cfg);

  bool ok = probe.passed() && solved.converged;
  json shift_reports = json::array();
  for (const auto& x0 : starts) {
    const auto r = check_shift_lemma(*cfg, x0, args.t_end, args.dt);
    ok = ok && r.passed();
    shift_reports.push_back(json{{"max_span", r.max_span},
                                 {"max_gap_error", r.max_gap_error},
                                 {"final_gap", r.final_gap},
                                 {"limit_z", r.limit_z},
                                 {"passed", r.passed()}});
  }
  json lyapunov = nullptr;
  if (solved.converged) {
    const auto r = check_lyapunov(*cfg, starts, solved.q, args.t_end, args.dt);
    ok = ok && r.passed();
    lyapunov = json{{"max_increase", r.max_increase},
                    {"max_bound_ratio", r.max_bound_ratio},
                    {"worst_final_distance", r.worst_final_distance},
                    {"passed", r.passed()}};
  }

  const auto traj = integrate(fields.h, starts.front(), args.t_end, args.dt, 100);
  const auto& end = traj.states.back();
  const double end_residual = abstract_residual(*cfg, end);
  const double end_f_error = std::abs(cfg->f(end) - cfg->rate);
  ok = ok && end_residual <= 1e-6 && end_f_error <= 1e-6;

  if (!args.out.empty()) {
    std::ofstream csv(args.out, std::ios::binary);
    if (!csv) throw Error(ErrorKind::ConfigError, "cannot write " + args.out);
    csv << "# arl-ode v1 rk4 dt=" << format_double(args.dt) << "\nt";
    for (const auto& l : labels) csv << ",x[" << l << "]";
    csv << '\n';
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      csv << format_double(traj.times[i]);
      for (double v : traj.states[i]) csv << ',' << format_double(v);
      csv << '\n';
    }
  }

  std::cout << json{{"form", cfg->label},
                    {"rate", cfg->rate},
                    {"f", cfg->f.describe()},
                    {"operator_probe",
                     {{"worst_expansion", probe.worst_expansion},
                      {"worst_shift_error", probe.worst_shift_error},
                      {"worst_scale_error", probe.worst_scale_error},
                      {"passed", probe.passed()}}},
                    {"equilibrium", q_json(labels, solved.q)},
                    {"shift_lemma", shift_reports},
                    {"lyapunov", lyapunov},
                    {"end_residual", end_residual},
                    {"end_f_error", end_f_error},
                    {"passed", ok}}
                   .dump(2)
            << '\n';
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Average-reward RVI Q-learning toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seeds_override;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run a configured experiment over its seeds");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seeds-override", seeds_override, "Comma-separated seeds or ranges, e.g. 1-10");
  run->add_option("--out", out_dir, "Output directory");

  std::string model_path;
  bool skip_unichain = false;
  auto* classify_cmd = app.add_subcommand("classify", "Classify a model");
  classify_cmd->add_option("model", model_path, "Model file")->required();
  classify_cmd->add_flag("--skip-unichain", skip_unichain, "Skip the policy enumeration for the unichain check");

  auto* gain = app.add_subcommand("gain", "Optimal gain by policy enumeration");
  gain->add_option("model", model_path, "Model file")->required();

  auto* structure = app.add_subcommand("structure", "Optimal recurrent structure (R*, K*, n*)");
  structure->add_option("model", model_path, "Model file")->required();

  std::string f_text = "linear:w=mean,b=0";
  std::size_t samples = 20;
  std::uint64_t seed = 1;
  auto* dimcheck = app.add_subcommand("dimcheck", "Empirical local dimension of the constrained solution set");
  dimcheck->add_option("model", model_path, "Model file")->required();
  dimcheck->add_option("--f", f_text, "Reference function");
  dimcheck->add_option("--samples", samples, "Number of RVI samples");
  dimcheck->add_option("--seed", seed, "Seed for the random starts");

  std::string method = "classical";
  std::string reference = "linear:w=mean,b=0";
  double alpha = 0.5;
  double tol = 1e-12;
  auto* solve = app.add_subcommand("solve", "Relative value iteration on action values");
  solve->add_option("model", model_path, "Model file")->required();
  solve->add_option("--method", method, "classical or schweitzer")->check(CLI::IsMember({"classical", "schweitzer"}));
  solve->add_option("--ref", reference, "Reference pair label (s/a) or f specification");
  solve->add_option("--alpha", alpha, "Step size");
  solve->add_option("--tol", tol, "Stopping tolerance");
  bool solve_json = false;
  solve->add_flag("--json", solve_json, "Print the final iterate as JSON instead of the CSV trace");

  LearnArgs learn_args;
  learn_args.algo = "diffq";
  auto* learn = app.add_subcommand("learn", "One seeded RVI or Differential Q-learning run");
  learn->add_option("--model", learn_args.model, "Model file")->required();
  learn->add_option("--algo", learn_args.algo, "rvi or diffq")->check(CLI::IsMember({"rvi", "diffq"}));
  learn->add_option("--f", learn_args.f, "Reference function: linear, max, component, diffq or a full spec");
  learn->add_option("--schedule", learn_args.schedule, "Step-size schedule");
  learn->add_option("--update", learn_args.update, "stream or synchronous");
  learn->add_option("--behavior", learn_args.behavior, R"(Behavior policy as JSON, e.g. {"solid":0.8,"dashed":0.2})");
  learn->add_option("--start-state", learn_args.start_state, "Initial state of the stream");
  learn->add_option("--steps", learn_args.steps, "Number of updates");
  learn->add_option("--seed", learn_args.seed, "Seed");
  learn->add_option("--record-every", learn_args.record_every, "Trace row interval");
  learn->add_option("--out", learn_args.out, "Trace CSV (stdout when omitted)");

  LearnArgs option_args;
  option_args.algo = "inter";
  option_args.steps = 100000;
  option_args.record_every = 1000;
  auto* learn_options = app.add_subcommand("learn-options", "One seeded inter- or intra-option learning run");
  learn_options->add_option("--model", option_args.model, "Model file")->required();
  learn_options->add_option("--options", option_args.options, "Options file")->required();
  learn_options->add_option("--algo", option_args.algo, "inter or intra")->check(CLI::IsMember({"inter", "intra"}));
  learn_options->add_option("--f", option_args.f, "Reference function");
  learn_options->add_option("--behavior", option_args.behavior, "Behavior policy over actions as JSON (intra)");
  learn_options->add_option("--epsilon", option_args.epsilon, "Lower bound on behavior probabilities (intra)");
  learn_options->add_option("--schedule", option_args.schedule, "Step-size schedule");
  learn_options->add_option("--steps", option_args.steps, "Number of iterations");
  learn_options->add_option("--seed", option_args.seed, "Seed");
  learn_options->add_option("--record-every", option_args.record_every, "Trace row interval");
  learn_options->add_option("--out", option_args.out, "Trace CSV (stdout when omitted)");

  OdeArgs ode_args;
  auto* ode = app.add_subcommand("ode", "Integrate the mean-field ODEs and check their lemmas");
  ode->add_option("config", ode_args.config, "Optional JSON config with the same keys as the flags");
  ode->add_option("--model", ode_args.model, "Model file");
  ode->add_option("--options", ode_args.options, "Options file (inter/intra forms)");
  ode->add_option("--f", ode_args.f, "Reference function");
  ode->add_option("--algo", ode_args.algo, "mdp, inter or intra")->check(CLI::IsMember({"mdp", "inter", "intra"}));
  ode->add_option("--x0", ode_args.x0, "zero, random:k or a JSON file of start vectors");
  ode->add_option("--t-end", ode_args.t_end, "Integration horizon");
  ode->add_option("--dt", ode_args.dt, "RK4 step");
  ode->add_option("--seed", ode_args.seed, "Seed for random starts and probes");
  ode->add_option("--out", ode_args.out, "Trajectory CSV for the first start");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seeds_override, out_dir);
    if (*classify_cmd) return cmd_classify(model_path, skip_unichain);
    if (*gain) return cmd_gain(model_path);
    if (*structure) return cmd_structure(model_path);
    if (*dimcheck) return cmd_dimcheck(model_path, f_text, samples, seed);
    if (*solve) return cmd_solve(model_path, method, reference, alpha, tol, solve_json);
    if (*ode) return cmd_ode(ode_args);
    if (*learn) return cmd_learn(learn_args, false);
    if (*learn_options) return cmd_learn(option_args, true);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
