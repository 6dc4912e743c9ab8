#pragma once

// Versioned, field-tagged JSON encoding of fitted ensembles. Doubles are
// written in shortest round-trip form, so save -> load is bit-exact.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ecmirror/ensemble.hpp"

namespace ecmirror {

inline constexpr const char* kModelFormat = "ecmirror.ensemble";
inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const EnsembleModel& model);
EnsembleModel model_from_json(const nlohmann::json& doc);  // throws FormatError

std::string serialize_model(const EnsembleModel& model);
EnsembleModel deserialize_model(const std::string& text);

void save_model(const EnsembleModel& model, const std::filesystem::path& path);
EnsembleModel load_model(const std::filesystem::path& path);

}  // namespace ecmirror
