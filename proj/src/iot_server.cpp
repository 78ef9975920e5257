#include "ptwin/iot_server.h"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "ptwin/wire.h"

namespace ptwin {

using nlohmann::json;

IotServer::IotServer(FactoryConfig factory, std::vector<SensorMeta> sensors,
                     std::vector<ActuatorDescriptor> actuators, Forward forward)
    : factory_(std::move(factory)),
      sensors_([&] {
          std::sort(sensors.begin(), sensors.end(),
                    [](const SensorMeta& a, const SensorMeta& b) { return a.id < b.id; });
          return std::move(sensors);
      }()),
      forward_(std::move(forward)),
      actuators_(std::move(actuators)) {
    std::sort(actuators_.begin(), actuators_.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    std::set<std::string> ids;
    for (const auto& s : sensors_) {
        if (!ids.insert(s.id).second) {
            throw Error(ErrorCode::InvalidScenario, "duplicate sensor id '" + s.id + "'");
        }
        if (!factory_.in_extent(s.position)) {
            throw Error(ErrorCode::InvalidScenario, "sensor '" + s.id + "' outside extent");
        }
    }
}

const SensorMeta* IotServer::find_sensor(const std::string& id) const {
    auto it = std::lower_bound(sensors_.begin(), sensors_.end(), id,
                               [](const SensorMeta& s, const std::string& key) { return s.id < key; });
    return (it != sensors_.end() && it->id == id) ? &*it : nullptr;
}

void IotServer::require_kind(FieldKind kind) const {
    if (factory_.field(kind) == nullptr) {
        throw Error(ErrorCode::UnknownFieldKind,
                    "field '" + std::string(to_string(kind)) + "' is not configured");
    }
}

DeviceList IotServer::list_devices() const {
    std::shared_lock lock(mutex_);
    return {sensors_, actuators_};
}

std::vector<SensorReading> IotServer::latest_readings(std::optional<FieldKind> kind) const {
    if (kind) require_kind(*kind);
    std::shared_lock lock(mutex_);
    std::vector<SensorReading> out;
    for (const auto& [id, reading] : latest_) {
        if (!kind || reading.kind == *kind) out.push_back(reading);
    }
    return out;
}

ActuatorAck IotServer::command_actuator(const std::string& actuator_id, const Directive& directive) {
    std::unique_lock lock(mutex_);
    auto it = std::find_if(actuators_.begin(), actuators_.end(),
                           [&](const auto& a) { return a.id == actuator_id; });
    if (it == actuators_.end()) {
        throw Error(ErrorCode::UnknownActuator, "unknown actuator '" + actuator_id + "'");
    }
    directive.validate();
    // Identical consecutive directives are absorbed.
    if (!(it->directive == directive)) {
        if (forward_) forward_(actuator_id, directive);
        it->directive = directive;
    }
    return {actuator_id, directive.mode, clock_};
}

Interpolated IotServer::interpolate(const EnvironmentQuery& query) const {
    require_kind(query.kind);
    if (!factory_.in_extent(query.position)) {
        throw Error(ErrorCode::OutOfExtent, "query position outside factory extent");
    }
    std::vector<SensorSample> samples;
    {
        std::shared_lock lock(mutex_);
        double horizon = kStaleTicks * factory_.tick_interval;
        for (const auto& [id, reading] : latest_) {
            if (reading.kind != query.kind || clock_ - reading.timestamp > horizon) continue;
            samples.push_back({id, find_sensor(id)->position, reading.value});
        }
    }
    if (samples.empty()) {
        throw Error(ErrorCode::NoSensorsOfKind,
                    "no fresh readings of kind '" + std::string(to_string(query.kind)) + "'");
    }
    return inverse_distance(samples, query.position);
}

void IotServer::ingest(const SensorReading& reading) {
    const SensorMeta* sensor = find_sensor(reading.sensor_id);
    if (sensor == nullptr) throw Error(ErrorCode::NotFound, "unknown sensor '" + reading.sensor_id + "'");
    if (sensor->kind != reading.kind || !std::isfinite(reading.value)) {
        throw Error(ErrorCode::InvariantViolation, "reading does not match sensor '" + sensor->id + "'");
    }
    std::unique_lock lock(mutex_);
    auto it = latest_.find(reading.sensor_id);
    if (it != latest_.end() && reading.timestamp < it->second.timestamp) {
        throw Error(ErrorCode::InvariantViolation, "reading timestamp went backwards");
    }
    latest_[reading.sensor_id] = reading;
}

void IotServer::set_clock(double now) {
    std::unique_lock lock(mutex_);
    clock_ = now;
}

double IotServer::now() const {
    std::shared_lock lock(mutex_);
    return clock_;
}

void IotServer::set_actuator_active(const std::string& actuator_id, bool active) {
    std::unique_lock lock(mutex_);
    for (auto& a : actuators_) {
        if (a.id == actuator_id) a.active = active;
    }
}

void IotServer::sync_from(const World& world) {
    for (const auto& s : sensors_) ingest(world.sample(s));
    std::unique_lock lock(mutex_);
    clock_ = world.now();
    for (auto& a : actuators_) a.active = world.actuator(a.id).active;
}

HttpResponse IotServer::handle(const HttpRequest& request) {
    auto seg = path_segments(request.path);
    bool v1 = seg.size() >= 2 && seg[0] == "v1";
    if (v1 && seg.size() == 2 && request.method == "GET") {
        if (seg[1] == "health") return json_response({{"status", "ok"}, {"time", now()}});
        if (seg[1] == "devices") return json_response(to_json(list_devices()));
        if (seg[1] == "readings") {
            std::optional<FieldKind> kind;
            if (auto k = request.query_value("kind"); k && !k->empty()) {
                kind = wire::field_kind_from_json(*k);
            }
            json list = json::array();
            for (const auto& r : latest_readings(kind)) list.push_back(wire::to_json(r));
            return json_response({{"readings", list}});
        }
    }
    if (v1 && seg.size() == 2 && seg[1] == "interpolate" && request.method == "POST") {
        json body = parse_json_body(request);
        wire::reject_unknown_keys(body, {"position", "kind"}, ErrorCode::MalformedRequest);
        EnvironmentQuery q{wire::vec3_from_json(body.at("position")),
                           wire::field_kind_from_json(body.at("kind"))};
        return json_response(to_json(interpolate(q)));
    }
    if (v1 && seg.size() == 4 && seg[1] == "actuators" && seg[3] == "command" &&
        request.method == "POST") {
        json body = parse_json_body(request);
        // Resolve the id first so a ghost actuator reports 404 before any directive check.
        {
            std::shared_lock lock(mutex_);
            bool known = std::any_of(actuators_.begin(), actuators_.end(),
                                     [&](const auto& a) { return a.id == seg[2]; });
            if (!known) throw Error(ErrorCode::UnknownActuator, "unknown actuator '" + seg[2] + "'");
        }
        return json_response(to_json(command_actuator(seg[2], wire::directive_from_json(body))));
    }
    throw Error(ErrorCode::NotFound, request.method + " " + request.path + " not found");
}

Handler IotServer::handler() {
    return [this](const HttpRequest& r) { return handle(r); };
}

json to_json(const ActuatorDescriptor& a) {
    json j{{"id", a.id},
           {"kind", to_string(a.kind)},
           {"position", wire::to_json(a.position)},
           {"target", to_string(a.target)},
           {"active", a.active}};
    j.update(wire::to_json(a.directive));
    return j;
}

json to_json(const DeviceList& devices) {
    json sensors = json::array();
    for (const auto& s : devices.sensors) sensors.push_back(wire::to_json(s));
    json actuators = json::array();
    for (const auto& a : devices.actuators) actuators.push_back(to_json(a));
    return {{"sensors", sensors}, {"actuators", actuators}};
}

json to_json(const ActuatorAck& ack) {
    return {{"actuator_id", ack.actuator_id}, {"applied_mode", to_string(ack.applied_mode)},
            {"at", ack.at}};
}

json to_json(const Interpolated& r) {
    json contributing = json::array();
    for (const auto& [id, w] : r.contributing) contributing.push_back({{"sensor_id", id}, {"weight", w}});
    return {{"value", r.value}, {"contributing", contributing}};
}

}  // namespace ptwin
