#include "arl/ffunction.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "arl/errors.hpp"
#include "arl/model.hpp"

namespace arl {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double parse_double(std::string_view text, std::string_view context) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw Error(ErrorKind::ConfigError, std::string(context) + ": not a number '" + std::string(text) + "'");
  }
  return value;
}

struct ParsedSpec {
  std::string kind;
  std::map<std::string, std::string, std::less<>> args;
};

ParsedSpec split_spec(std::string_view text) {
  ParsedSpec out;
  const auto colon = text.find(':');
  out.kind = std::string(text.substr(0, colon));
  if (colon == std::string_view::npos) return out;
  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigError, "f spec '" + std::string(text) + "': expected key=value, got '" +
                                              std::string(item) + "'");
    }
    out.args.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

double arg_or(const ParsedSpec& spec, std::string_view key, double fallback) {
  auto it = spec.args.find(key);
  return it == spec.args.end() ? fallback : parse_double(it->second, key);
}

FFunction parse_impl(std::string_view text, std::size_t dim, std::span<const double> initial_q,
                     const Model* model) {
  const ParsedSpec spec = split_spec(text);
  if (spec.kind == "linear") {
    const double b = arg_or(spec, "b", 0.0);
    if (auto it = spec.args.find("nu"); it != spec.args.end()) {
      std::vector<double> weights;
      std::string_view rest = it->second;
      while (!rest.empty()) {
        const auto semi = rest.find(';');
        weights.push_back(parse_double(rest.substr(0, semi), "nu"));
        if (semi == std::string_view::npos) break;
        rest = rest.substr(semi + 1);
      }
      if (weights.size() != dim) {
        throw Error(ErrorKind::ConfigError, "linear f: nu has " + std::to_string(weights.size()) +
                                                " entries, expected " + std::to_string(dim));
      }
      return FFunction::linear(std::move(weights), b);
    }
    double w = 1.0;
    if (auto it = spec.args.find("w"); it != spec.args.end()) {
      w = it->second == "mean" ? 1.0 / static_cast<double>(dim) : parse_double(it->second, "w");
    }
    return FFunction::uniform_linear(dim, w, b);
  }
  if (spec.kind == "max") {
    return FFunction::max_based(dim, arg_or(spec, "beta", 1.0), arg_or(spec, "b", 0.0));
  }
  if (spec.kind == "component") {
    const double coeff = arg_or(spec, "coeff", 1.0);
    if (auto it = spec.args.find("pair"); it != spec.args.end()) {
      if (model == nullptr) throw Error(ErrorKind::ConfigError, "component f by pair name needs a model");
      const auto p = model->find_pair(it->second);
      if (!p) throw Error(ErrorKind::ConfigError, "component f: unknown pair '" + it->second + "'");
      return FFunction::component(dim, *p, coeff);
    }
    const double index = arg_or(spec, "index", -1.0);
    if (index < 0.0 || index >= static_cast<double>(dim)) {
      throw Error(ErrorKind::ConfigError, "component f: needs pair=<state>/<action> or a valid index");
    }
    return FFunction::component(dim, static_cast<std::size_t>(index), coeff);
  }
  if (spec.kind == "diffq") {
    const double sum = initial_q.empty() ? 0.0 : std::accumulate(initial_q.begin(), initial_q.end(), 0.0);
    return FFunction::differential(dim, arg_or(spec, "eta", 1.0), sum, arg_or(spec, "rbar0", 0.0));
  }
  throw Error(ErrorKind::ConfigError, "unknown f kind '" + spec.kind + "'");
}

}  // namespace

FFunction::FFunction(Kind kind, std::size_t dim) : kind_(std::move(kind)), dim_(dim) {
  std::visit(Overloaded{
                 [&](const LinearRef& k) {
                   if (k.weights.size() != dim_) throw Error(ErrorKind::ConfigError, "linear f: weight size mismatch");
                   if (!(std::accumulate(k.weights.begin(), k.weights.end(), 0.0) > 0.0)) {
                     throw Error(ErrorKind::ConfigError, "linear f: weights must sum to a positive u");
                   }
                 },
                 [&](const MaxRef& k) {
                   if (!(k.scale > 0.0)) throw Error(ErrorKind::ConfigError, "max f: beta must be positive");
                 },
                 [&](const ComponentRef& k) {
                   if (k.index >= dim_) throw Error(ErrorKind::ConfigError, "component f: index out of range");
                   if (!(k.coeff > 0.0)) throw Error(ErrorKind::ConfigError, "component f: coeff must be positive");
                 },
                 [&](const DifferentialRef& k) {
                   if (!(k.eta > 0.0)) throw Error(ErrorKind::ConfigError, "diffq f: eta must be positive");
                 },
             },
             kind_);
}

FFunction FFunction::linear(std::vector<double> weights, double offset) {
  const std::size_t dim = weights.size();
  return FFunction(LinearRef{std::move(weights), offset}, dim);
}

FFunction FFunction::uniform_linear(std::size_t dim, double weight, double offset) {
  return linear(std::vector<double>(dim, weight), offset);
}

FFunction FFunction::max_based(std::size_t dim, double scale, double offset) { return FFunction(MaxRef{scale, offset}, dim); }

FFunction FFunction::component(std::size_t dim, std::size_t index, double coeff) {
  return FFunction(ComponentRef{index, coeff}, dim);
}

FFunction FFunction::differential(std::size_t dim, double eta, double initial_sum, double initial_rate) {
  return FFunction(DifferentialRef{eta, initial_sum, initial_rate}, dim);
}

double FFunction::operator()(std::span<const double> q) const {
  return std::visit(Overloaded{
                        [&](const LinearRef& k) {
                          double acc = k.offset;
                          for (std::size_t i = 0; i < q.size(); ++i) acc += k.weights[i] * q[i];
                          return acc;
                        },
                        [&](const MaxRef& k) { return k.scale * *std::max_element(q.begin(), q.end()) + k.offset; },
                        [&](const ComponentRef& k) { return k.coeff * q[k.index]; },
                        [&](const DifferentialRef& k) {
                          const double sum = std::accumulate(q.begin(), q.end(), 0.0);
                          return k.eta * sum - k.eta * k.initial_sum + k.initial_rate;
                        },
                    },
                    kind_);
}

double FFunction::at_zero() const noexcept {
  return std::visit(Overloaded{
                        [](const LinearRef& k) { return k.offset; },
                        [](const MaxRef& k) { return k.offset; },
                        [](const ComponentRef&) { return 0.0; },
                        [](const DifferentialRef& k) { return k.initial_rate - k.eta * k.initial_sum; },
                    },
                    kind_);
}

double FFunction::shift_gain() const noexcept {
  return std::visit(Overloaded{
                        [](const LinearRef& k) { return std::accumulate(k.weights.begin(), k.weights.end(), 0.0); },
                        [](const MaxRef& k) { return k.scale; },
                        [](const ComponentRef& k) { return k.coeff; },
                        [&](const DifferentialRef& k) { return k.eta * static_cast<double>(dim_); },
                    },
                    kind_);
}

double FFunction::lipschitz() const noexcept {
  return std::visit(Overloaded{
                        [](const LinearRef& k) {
                          double acc = 0.0;
                          for (double w : k.weights) acc += std::abs(w);
                          return acc;
                        },
                        [](const MaxRef& k) { return k.scale; },
                        [](const ComponentRef& k) { return k.coeff; },
                        [&](const DifferentialRef& k) { return k.eta * static_cast<double>(dim_); },
                    },
                    kind_);
}

std::string FFunction::describe() const {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const LinearRef& k) { out << "linear(u=" << shift_gain() << ", b=" << k.offset << ")"; },
                 [&](const MaxRef& k) { out << "max(beta=" << k.scale << ", b=" << k.offset << ")"; },
                 [&](const ComponentRef& k) { out << "component(index=" << k.index << ", coeff=" << k.coeff << ")"; },
                 [&](const DifferentialRef& k) {
                   out << "diffq(eta=" << k.eta << ", sum0=" << k.initial_sum << ", rbar0=" << k.initial_rate << ")";
                 },
             },
             kind_);
  return out.str();
}

FFunction parse_ffunction(std::string_view text, const Model& model, std::span<const double> initial_q) {
  return parse_impl(text, model.num_pairs(), initial_q, &model);
}

FFunction parse_ffunction(std::string_view text, std::size_t dim, std::span<const double> initial_q) {
  return parse_impl(text, dim, initial_q, nullptr);
}

PropertyCheckReport ffunction_property_check(const FFunction& f, std::size_t trials, Rng& rng) {
  PropertyCheckReport report;
  report.u = f.shift_gain();
  report.lipschitz = f.lipschitz();
  report.trials = trials;
  const std::size_t d = f.dim();
  std::vector<double> x(d), y(d), tmp(d);
  auto draw = [&](std::vector<double>& v, double scale) {
    for (auto& e : v) e = scale * (2.0 * rng.uniform() - 1.0);
  };
  const double f0 = f.at_zero();
  for (std::size_t t = 0; t < trials; ++t) {
    const double scale = std::pow(10.0, 4.0 * rng.uniform() - 1.0);
    draw(x, scale);
    draw(y, scale);
    const double fx = f(x);
    const double fy = f(y);

    double dist = 0.0;
    for (std::size_t i = 0; i < d; ++i) dist = std::max(dist, std::abs(x[i] - y[i]));
    const double slack = 1e-9 * (1.0 + std::abs(fx) + std::abs(fy));
    if (dist > 0.0) {
      const double ratio = std::abs(fx - fy) / (report.lipschitz * dist);
      report.worst_lipschitz_ratio = std::max(report.worst_lipschitz_ratio, ratio);
      if (std::abs(fx - fy) > report.lipschitz * dist + slack) report.lipschitz_ok = false;
    }

    const double c = scale * (2.0 * rng.uniform() - 1.0);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + c;
    const double shift_err = std::abs(f(tmp) - fx - c * report.u) / (1.0 + std::abs(fx) + std::abs(c * report.u));
    report.worst_shift_error = std::max(report.worst_shift_error, shift_err);
    if (shift_err > 1e-9) report.shift_ok = false;

    const double k = 10.0 * rng.uniform();
    for (std::size_t i = 0; i < d; ++i) tmp[i] = k * x[i];
    const double hom_err = std::abs((f(tmp) - f0) - k * (fx - f0)) / (1.0 + std::abs(f(tmp)) + k * std::abs(fx) + std::abs(f0));
    report.worst_homogeneity_error = std::max(report.worst_homogeneity_error, hom_err);
    if (hom_err > 1e-9) report.homogeneity_ok = false;
  }
  return report;
}

}  // namespace arl
