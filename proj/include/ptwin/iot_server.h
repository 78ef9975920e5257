#pragma once

#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ptwin/farm_sim.h"
#include "ptwin/http.h"
#include "ptwin/interpolation.h"

namespace ptwin {

struct ActuatorDescriptor {
    std::string id;
    ActuatorKind kind = ActuatorKind::heater;
    Vec3 position;
    FieldKind target = FieldKind::temperature;
    Directive directive;
    bool active = false;
};

struct DeviceList {
    std::vector<SensorMeta> sensors;
    std::vector<ActuatorDescriptor> actuators;
};

struct ActuatorAck {
    std::string actuator_id;
    ActuatorMode applied_mode = ActuatorMode::off;
    double at = 0.0;
};

struct EnvironmentQuery {
    Vec3 position;
    FieldKind kind = FieldKind::temperature;
};

// Readings older than this many tick intervals are ignored by interpolate().
constexpr double kStaleTicks = 10.0;

// Device registry, latest telemetry and actuator command API.
class IotServer {
public:
    // Receives every accepted directive that changes an actuator.
    using Forward = std::function<void(const std::string& actuator_id, const Directive&)>;

    IotServer(FactoryConfig factory, std::vector<SensorMeta> sensors,
              std::vector<ActuatorDescriptor> actuators, Forward forward);

    DeviceList list_devices() const;
    std::vector<SensorReading> latest_readings(std::optional<FieldKind> kind = std::nullopt) const;
    ActuatorAck command_actuator(const std::string& actuator_id, const Directive& directive);
    Interpolated interpolate(const EnvironmentQuery& query) const;

    // Throws InvariantViolation when a sensor's timestamps go backwards.
    void ingest(const SensorReading& reading);
    void set_clock(double now);
    double now() const;
    void set_actuator_active(const std::string& actuator_id, bool active);

    // Samples every registered sensor from the world and mirrors its clock and
    // actuator activity.
    void sync_from(const World& world);

    // HTTP surface: /v1/health, /v1/devices, /v1/readings,
    // /v1/actuators/{id}/command, /v1/interpolate.
    HttpResponse handle(const HttpRequest& request);
    Handler handler();

private:
    const SensorMeta* find_sensor(const std::string& id) const;
    void require_kind(FieldKind kind) const;

    const FactoryConfig factory_;
    const std::vector<SensorMeta> sensors_;  // sorted by id
    Forward forward_;

    mutable std::shared_mutex mutex_;
    std::vector<ActuatorDescriptor> actuators_;  // sorted by id
    std::map<std::string, SensorReading> latest_;
    double clock_ = 0.0;
};

nlohmann::json to_json(const DeviceList& devices);
nlohmann::json to_json(const ActuatorDescriptor& actuator);
nlohmann::json to_json(const ActuatorAck& ack);
nlohmann::json to_json(const Interpolated& result);

}  // namespace ptwin
