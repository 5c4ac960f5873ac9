#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "relaysim/harness.hpp"

namespace relaysim {

using Json = nlohmann::json;

/// Parses a JSON file. Syntax errors become ConfigError with the byte offset.
Json load_json_file(const std::string& path);

/// Strict readers: unknown keys and wrong types raise ConfigError with the
/// dotted path of the offending field. Missing keys keep their defaults.
SystemTemplate system_from_json(const Json& j, const std::string& path = "system");
ExperimentPlan experiment_plan_from_json(const Json& j);
TolerancePlan tolerance_plan_from_json(const Json& j);

Json to_json(const SystemTemplate& system);
Json to_json(const ExperimentPlan& plan);
Json to_json(const TolerancePlan& plan);

std::uint64_t fnv1a64(std::string_view bytes);
/// Hash of the canonical (sorted-key, compact) serialisation.
std::uint64_t config_hash(const Json& j);
std::string hex64(std::uint64_t value);

}  // namespace relaysim
