#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "arl/model.hpp"

namespace arl {

/// Reads { "states", "actions", "transitions": [{s, a, s2, r, l?, p}] }.
/// States and actions may be referenced by name or by index.
ModelSpec parse_model_spec(const nlohmann::json& doc, std::string_view source = "<json>");
Model model_from_json(const nlohmann::json& doc, std::string_view source = "<json>");
Model load_model(const std::filesystem::path& path);
nlohmann::json model_to_json(const Model& model);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Resolves a path relative to the bundled data directory unless it already
/// exists as given.
std::filesystem::path resolve_data_path(const std::filesystem::path& path);

}  // namespace arl
