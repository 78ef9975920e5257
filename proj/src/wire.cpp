#include "ptwin/wire.h"

#include <algorithm>
#include <cmath>

#include "ptwin/error.h"

namespace ptwin::wire {

using nlohmann::json;

json to_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
        !j[2].is_number()) {
        throw Error(ErrorCode::MalformedRequest, "expected [x, y, z] array of numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json to_json(const SensorMeta& s) {
    return {{"id", s.id}, {"position", to_json(s.position)}, {"kind", to_string(s.kind)},
            {"sigma", s.sigma}};
}

json to_json(const SensorReading& r) {
    return {{"sensor_id", r.sensor_id}, {"kind", to_string(r.kind)}, {"value", r.value},
            {"timestamp", r.timestamp}};
}

SensorReading reading_from_json(const json& j) {
    return {j.at("sensor_id").get<std::string>(), field_kind_from_json(j.at("kind")),
            j.at("value").get<double>(), j.at("timestamp").get<double>()};
}

FieldKind field_kind_from_json(const json& j) {
    if (!j.is_string()) throw Error(ErrorCode::MalformedRequest, "field kind must be a string");
    auto kind = parse_field_kind(j.get<std::string>());
    if (!kind) {
        throw Error(ErrorCode::UnknownFieldKind, "unknown field kind '" + j.get<std::string>() + "'");
    }
    return *kind;
}

json to_json(const Directive& d) {
    json j{{"mode", to_string(d.mode)}};
    if (d.condition) {
        j["condition"] = {{"kind", to_string(d.condition->kind)},
                          {"comparator", to_string(d.condition->comparator)},
                          {"threshold", d.condition->threshold}};
    }
    if (d.period) j["period"] = {{"on_s", d.period->on_s}, {"off_s", d.period->off_s}};
    return j;
}

Directive directive_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidDirective, "directive must be an object");
    reject_unknown_keys(j, {"mode", "condition", "period", "actuator_id"}, ErrorCode::InvalidDirective);
    if (!j.contains("mode") || !j["mode"].is_string()) {
        throw Error(ErrorCode::InvalidDirective, "directive needs a string 'mode'");
    }
    auto mode = parse_actuator_mode(j["mode"].get<std::string>());
    if (!mode) throw Error(ErrorCode::InvalidDirective, "mode must be on, off or auto");

    Directive d;
    d.mode = *mode;
    try {
        if (j.contains("condition") && !j["condition"].is_null()) {
            const json& c = j["condition"];
            reject_unknown_keys(c, {"kind", "comparator", "threshold"}, ErrorCode::InvalidDirective,
                                "/condition");
            auto cmp = parse_comparator(c.at("comparator").get<std::string>());
            if (!cmp) throw Error(ErrorCode::InvalidDirective, "comparator must be <, <=, > or >=");
            d.condition = Condition{field_kind_from_json(c.at("kind")), *cmp,
                                    c.at("threshold").get<double>()};
        }
        if (j.contains("period") && !j["period"].is_null()) {
            const json& p = j["period"];
            reject_unknown_keys(p, {"on_s", "off_s"}, ErrorCode::InvalidDirective, "/period");
            d.period = Period{p.at("on_s").get<double>(), p.at("off_s").get<double>()};
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidDirective, std::string("malformed directive: ") + e.what());
    }
    d.validate();
    return d;
}

void reject_unknown_keys(const json& object, std::initializer_list<const char*> allowed,
                         ErrorCode code, const std::string& pointer) {
    if (!object.is_object()) throw Error(code, "expected an object", pointer);
    for (const auto& [key, _] : object.items()) {
        bool known = std::any_of(allowed.begin(), allowed.end(),
                                 [&](const char* name) { return key == name; });
        if (!known) throw Error(code, "unknown key '" + key + "'", pointer + "/" + key);
    }
}

}  // namespace ptwin::wire
