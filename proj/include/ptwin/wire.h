#pragma once

// JSON encodings shared by every HTTP surface. Field names are snake_case.

#include <json.hpp>

#include "ptwin/error.h"
#include "ptwin/farm_sim.h"
#include "ptwin/geometry.h"

namespace ptwin::wire {

nlohmann::json to_json(Vec3 v);
Vec3 vec3_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SensorMeta& sensor);
nlohmann::json to_json(const SensorReading& reading);
SensorReading reading_from_json(const nlohmann::json& j);

// {"mode": "on"|"off"|"auto", "condition"?: {...}, "period"?: {...}}
nlohmann::json to_json(const Directive& directive);
// Throws InvalidDirective for contract violations and MalformedRequest for
// type errors.
Directive directive_from_json(const nlohmann::json& j);

FieldKind field_kind_from_json(const nlohmann::json& j);

// Rejects keys outside `allowed`; throws `code` naming the first offender.
void reject_unknown_keys(const nlohmann::json& object, std::initializer_list<const char*> allowed,
                         ErrorCode code, const std::string& pointer = {});

}  // namespace ptwin::wire
