#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptwin/geometry.h"

namespace ptwin {

enum class FieldKind { temperature, humidity, co2, ec, ph };

std::string_view to_string(FieldKind kind);
std::optional<FieldKind> parse_field_kind(std::string_view name);

enum class ActuatorKind { heater, vent, humidifier, co2_injector, led_bank, pump };

std::string_view to_string(ActuatorKind kind);
std::optional<ActuatorKind> parse_actuator_kind(std::string_view name);

enum class ActuatorMode { off, on, automatic };

std::string_view to_string(ActuatorMode mode);
std::optional<ActuatorMode> parse_actuator_mode(std::string_view name);

enum class Comparator { less, less_equal, greater, greater_equal };

std::string_view to_string(Comparator cmp);
std::optional<Comparator> parse_comparator(std::string_view symbol);

struct Condition {
    FieldKind kind = FieldKind::temperature;
    Comparator comparator = Comparator::less;
    double threshold = 0.0;

    bool holds(double value) const;
    friend bool operator==(const Condition&, const Condition&) = default;
};

struct Period {
    double on_s = 0.0;
    double off_s = 0.0;
    friend bool operator==(const Period&, const Period&) = default;
};

// on | off | auto(condition) | auto(period)
struct Directive {
    ActuatorMode mode = ActuatorMode::off;
    std::optional<Condition> condition;
    std::optional<Period> period;

    static Directive on() { return {ActuatorMode::on, {}, {}}; }
    static Directive off() { return {ActuatorMode::off, {}, {}}; }
    static Directive automatic(Condition c) { return {ActuatorMode::automatic, c, {}}; }
    static Directive automatic(Period p) { return {ActuatorMode::automatic, {}, p}; }

    // Throws Error(InvalidDirective) when auto lacks exactly one driver, when
    // on/off carries one, or when a period is not positive.
    void validate() const;
    friend bool operator==(const Directive&, const Directive&) = default;
};

struct FieldSpec {
    FieldKind kind = FieldKind::temperature;
    double base = 0.0;
    Vec3 gradient;  // per-meter coefficients, measured from the extent origin
};

struct FactoryConfig {
    Vec3 extent;  // box [0, extent] in meters
    double tick_interval = 1.0;
    std::uint64_t seed = 0;
    std::vector<FieldSpec> fields;

    void validate() const;
    bool in_extent(Vec3 p) const;
    const FieldSpec* field(FieldKind kind) const;
};

struct Effect {
    FieldKind target = FieldKind::temperature;
    double amplitude = 0.0;  // field units per second active
    double radius = 1.0;     // decay radius, meters
    double saturation = std::numeric_limits<double>::infinity();
};

struct SimActuator {
    std::string id;
    Vec3 position;
    ActuatorKind kind = ActuatorKind::heater;
    Effect effect;
    Directive directive;
    bool active = false;
    double perturbation = 0.0;  // magnitude at the actuator position
    double mode_since = 0.0;    // clock value when the directive was applied
};

struct SensorMeta {
    std::string id;
    Vec3 position;
    FieldKind kind = FieldKind::temperature;
    double sigma = 0.0;
};

struct SensorReading {
    std::string sensor_id;
    FieldKind kind = FieldKind::temperature;
    double value = 0.0;
    double timestamp = 0.0;
    friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

// Half-life of a perturbation left behind by an inactive actuator.
constexpr double kPerturbationHalfLife = 30.0;

// Smooth radial falloff (1 - (d/r)^2)^2, exactly 0 for d >= r.
double radial_falloff(double distance, double radius);

// Deterministic standard normal variate keyed by (seed, sensor id, sample index).
double seeded_gaussian(std::uint64_t seed, std::string_view sensor_id, std::uint64_t index);

// The simulated factory. A plain value: copy it to take a snapshot.
class World {
public:
    World(FactoryConfig config, std::vector<SimActuator> actuators);

    const FactoryConfig& config() const { return config_; }
    double now() const { return clock_; }
    std::uint64_t tick_count() const { return ticks_; }
    const std::vector<SimActuator>& actuators() const { return actuators_; }
    const SimActuator& actuator(std::string_view id) const;

    // Closed-form field value: base + gradient + actuator perturbations.
    double field_value(FieldKind kind, Vec3 position) const;

    // Sample a sensor; noise is keyed by the world seed, sensor id and tick count.
    SensorReading sample(const SensorMeta& sensor) const;

    // Stores the directive; the activation state is recomputed on the next tick.
    void set_actuator(std::string_view id, const Directive& directive);

    // Overrides an actuator's perturbation magnitude (disturbance injection).
    void set_perturbation(std::string_view id, double magnitude);

    void tick(double dt);

    // Canonical JSON of the full state, full double precision.
    std::string serialize() const;

private:
    SimActuator& mutable_actuator(std::string_view id);
    bool decide_active(const SimActuator& actuator) const;

    FactoryConfig config_;
    std::vector<SimActuator> actuators_;
    double clock_ = 0.0;
    std::uint64_t ticks_ = 0;
};

// Single-writer wrapper publishing an immutable snapshot after every tick.
class FarmSim {
public:
    explicit FarmSim(World world);

    std::shared_ptr<const World> snapshot() const;

    void tick(double dt);
    void tick() { tick(snapshot()->config().tick_interval); }
    void set_actuator(std::string_view id, const Directive& directive);
    void set_perturbation(std::string_view id, double magnitude);

private:
    void publish();

    mutable std::mutex mutex_;
    World world_;
    std::shared_ptr<const World> published_;
};

}  // namespace ptwin
