#include "arl/model_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "arl/errors.hpp"

namespace arl {
namespace {

using nlohmann::json;

std::size_t resolve_index(const json& ref, const std::vector<std::string>& names, std::string_view what,
                          std::string_view where) {
  if (ref.is_string()) {
    const auto& s = ref.get_ref<const std::string&>();
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == s) return i;
    }
    throw Error(ErrorKind::ModelError, std::string(where) + ": unknown " + std::string(what) + " '" + s + "'");
  }
  if (ref.is_number_integer()) {
    const auto i = ref.get<long long>();
    if (i < 0 || static_cast<std::size_t>(i) >= names.size()) {
      throw Error(ErrorKind::ModelError,
                  std::string(where) + ": " + std::string(what) + " index " + std::to_string(i) + " out of range");
    }
    return static_cast<std::size_t>(i);
  }
  throw Error(ErrorKind::ModelError, std::string(where) + ": " + std::string(what) + " must be a name or index");
}

std::vector<std::string> read_names(const json& doc, const char* key, std::string_view source) {
  if (!doc.contains(key) || !doc.at(key).is_array()) {
    throw Error(ErrorKind::ModelError, std::string(source) + ": missing array '" + key + "'");
  }
  std::vector<std::string> names;
  for (const auto& item : doc.at(key)) {
    if (item.is_string()) {
      names.push_back(item.get<std::string>());
    } else if (item.is_number_integer()) {
      names.push_back(std::to_string(item.get<long long>()));
    } else {
      throw Error(ErrorKind::ModelError, std::string(source) + ": entries of '" + key + "' must be names");
    }
  }
  return names;
}

}  // namespace

ModelSpec parse_model_spec(const json& doc, std::string_view source) {
  ModelSpec spec;
  spec.name = doc.value("name", std::string(source));
  spec.states = read_names(doc, "states", source);
  spec.actions = read_names(doc, "actions", source);
  spec.holding_floor = doc.value("holding_floor", kDefaultHoldingFloor);
  if (!doc.contains("transitions") || !doc.at("transitions").is_array()) {
    throw Error(ErrorKind::ModelError, std::string(source) + ": missing array 'transitions'");
  }
  std::size_t line = 0;
  for (const auto& t : doc.at("transitions")) {
    const std::string where = std::string(source) + ": transitions[" + std::to_string(line++) + "]";
    for (const char* key : {"s", "a", "s2", "p"}) {
      if (!t.contains(key)) throw Error(ErrorKind::ModelError, where + ": missing field '" + key + "'");
    }
    TransitionEntry e{};
    e.state = resolve_index(t.at("s"), spec.states, "state", where);
    e.action = resolve_index(t.at("a"), spec.actions, "action", where);
    e.next = resolve_index(t.at("s2"), spec.states, "state", where);
    e.reward = t.value("r", 0.0);
    e.holding = t.value("l", 1.0);
    e.prob = t.at("p").get<double>();
    spec.transitions.push_back(e);
  }
  return spec;
}

Model model_from_json(const json& doc, std::string_view source) {
  return Model::from_spec(parse_model_spec(doc, source));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t end = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n');
    throw Error(ErrorKind::ConfigError, path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

Model load_model(const std::filesystem::path& path) {
  const auto resolved = resolve_data_path(path);
  return model_from_json(read_json_file(resolved), resolved.filename().string());
}

json model_to_json(const Model& model) {
  json doc;
  doc["name"] = model.name();
  doc["states"] = model.state_names();
  doc["actions"] = model.action_names();
  json rows = json::array();
  for (PairId p = 0; p < model.num_pairs(); ++p) {
    for (const auto& o : model.outcomes(p)) {
      json t{{"s", model.state_names()[model.pair_state(p)]},
             {"a", model.action_names()[model.pair_action(p)]},
             {"s2", model.state_names()[o.next]},
             {"r", o.reward},
             {"p", o.prob}};
      if (o.holding != 1.0) t["l"] = o.holding;
      rows.push_back(std::move(t));
    }
  }
  doc["transitions"] = std::move(rows);
  return doc;
}

std::filesystem::path resolve_data_path(const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) return path;
  const std::filesystem::path bundled = std::filesystem::path(ARL_DATA_DIR) / path;
  if (std::filesystem::exists(bundled)) return bundled;
  return path;
}

}  // namespace arl
