#include "ptwin/farm_sim.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <utility>

#include <json.hpp>

#include "ptwin/error.h"

namespace ptwin {
namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table,
                        std::string_view name) {
    for (const auto& [value, text] : table) {
        if (text == name) return value;
    }
    return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
    for (const auto& [v, text] : table) {
        if (v == value) return text;
    }
    return "?";
}

constexpr std::array<std::pair<FieldKind, std::string_view>, 5> kFieldKinds{{
    {FieldKind::temperature, "temperature"},
    {FieldKind::humidity, "humidity"},
    {FieldKind::co2, "co2"},
    {FieldKind::ec, "ec"},
    {FieldKind::ph, "ph"},
}};

constexpr std::array<std::pair<ActuatorKind, std::string_view>, 6> kActuatorKinds{{
    {ActuatorKind::heater, "heater"},
    {ActuatorKind::vent, "vent"},
    {ActuatorKind::humidifier, "humidifier"},
    {ActuatorKind::co2_injector, "co2_injector"},
    {ActuatorKind::led_bank, "led_bank"},
    {ActuatorKind::pump, "pump"},
}};

constexpr std::array<std::pair<ActuatorMode, std::string_view>, 3> kModes{{
    {ActuatorMode::off, "off"},
    {ActuatorMode::on, "on"},
    {ActuatorMode::automatic, "auto"},
}};

constexpr std::array<std::pair<Comparator, std::string_view>, 4> kComparators{{
    {Comparator::less, "<"},
    {Comparator::less_equal, "<="},
    {Comparator::greater, ">"},
    {Comparator::greater_equal, ">="},
}};

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

nlohmann::json vec_json(Vec3 v) { return nlohmann::json::array({v.x, v.y, v.z}); }

}  // namespace

std::string_view to_string(FieldKind kind) { return name_of(kFieldKinds, kind); }
std::optional<FieldKind> parse_field_kind(std::string_view name) { return lookup(kFieldKinds, name); }
std::string_view to_string(ActuatorKind kind) { return name_of(kActuatorKinds, kind); }
std::optional<ActuatorKind> parse_actuator_kind(std::string_view name) {
    return lookup(kActuatorKinds, name);
}
std::string_view to_string(ActuatorMode mode) { return name_of(kModes, mode); }
std::optional<ActuatorMode> parse_actuator_mode(std::string_view name) { return lookup(kModes, name); }
std::string_view to_string(Comparator cmp) { return name_of(kComparators, cmp); }
std::optional<Comparator> parse_comparator(std::string_view symbol) {
    return lookup(kComparators, symbol);
}

bool Condition::holds(double value) const {
    switch (comparator) {
    case Comparator::less: return value < threshold;
    case Comparator::less_equal: return value <= threshold;
    case Comparator::greater: return value > threshold;
    case Comparator::greater_equal: return value >= threshold;
    }
    return false;
}

void Directive::validate() const {
    if (mode == ActuatorMode::automatic) {
        if (condition.has_value() == period.has_value()) {
            throw Error(ErrorCode::InvalidDirective,
                        "auto mode requires exactly one of condition or period");
        }
    } else if (condition || period) {
        throw Error(ErrorCode::InvalidDirective,
                    std::string(to_string(mode)) + " mode takes no condition or period");
    }
    if (period) {
        if (!(period->on_s > 0.0) || !(period->off_s > 0.0) || !std::isfinite(period->on_s) ||
            !std::isfinite(period->off_s)) {
            throw Error(ErrorCode::InvalidDirective, "period on/off seconds must be positive");
        }
    }
    if (condition && !std::isfinite(condition->threshold)) {
        throw Error(ErrorCode::InvalidDirective, "condition threshold must be finite");
    }
}

void FactoryConfig::validate() const {
    if (!(extent.x > 0.0) || !(extent.y > 0.0) || !(extent.z > 0.0)) {
        throw Error(ErrorCode::InvalidScenario, "extent dimensions must be > 0", "/factory/extent");
    }
    if (!(tick_interval > 0.0)) {
        throw Error(ErrorCode::InvalidScenario, "tick_interval must be > 0",
                    "/factory/tick_interval");
    }
    std::set<FieldKind> seen;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (!seen.insert(fields[i].kind).second) {
            throw Error(ErrorCode::InvalidScenario, "duplicate field kind",
                        "/factory/fields/" + std::to_string(i) + "/kind");
        }
    }
}

bool FactoryConfig::in_extent(Vec3 p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0 && p.x <= extent.x && p.y <= extent.y &&
           p.z <= extent.z;
}

const FieldSpec* FactoryConfig::field(FieldKind kind) const {
    for (const auto& f : fields) {
        if (f.kind == kind) return &f;
    }
    return nullptr;
}

double radial_falloff(double distance, double radius) {
    if (distance >= radius) return 0.0;
    double q = distance / radius;
    double s = 1.0 - q * q;
    return s * s;
}

double seeded_gaussian(std::uint64_t seed, std::string_view sensor_id, std::uint64_t index) {
    std::uint64_t state = seed ^ fnv1a(sensor_id) ^ (index * 0xD1B54A32D192ED03ull);
    // Box-Muller on two 53-bit uniforms; u1 in (0, 1].
    double u1 = (static_cast<double>(splitmix64(state) >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

World::World(FactoryConfig config, std::vector<SimActuator> actuators)
    : config_(std::move(config)), actuators_(std::move(actuators)) {
    config_.validate();
    std::sort(actuators_.begin(), actuators_.end(),
              [](const SimActuator& a, const SimActuator& b) { return a.id < b.id; });
    for (const auto& a : actuators_) {
        if (!std::isfinite(a.effect.amplitude)) {
            throw Error(ErrorCode::InvalidScenario, "actuator amplitude must be finite", a.id);
        }
        if (!(a.effect.radius > 0.0)) {
            throw Error(ErrorCode::InvalidScenario, "decay radius must be > 0", a.id);
        }
        a.directive.validate();
    }
}

const SimActuator& World::actuator(std::string_view id) const {
    for (const auto& a : actuators_) {
        if (a.id == id) return a;
    }
    throw Error(ErrorCode::UnknownActuator, "unknown actuator '" + std::string(id) + "'");
}

SimActuator& World::mutable_actuator(std::string_view id) {
    return const_cast<SimActuator&>(std::as_const(*this).actuator(id));
}

double World::field_value(FieldKind kind, Vec3 position) const {
    const FieldSpec* spec = config_.field(kind);
    if (spec == nullptr) {
        throw Error(ErrorCode::UnknownFieldKind,
                    "field '" + std::string(to_string(kind)) + "' is not configured");
    }
    if (!config_.in_extent(position)) {
        throw Error(ErrorCode::OutOfExtent, "position outside factory extent");
    }
    double value = spec->base + dot(spec->gradient, position);
    for (const auto& a : actuators_) {
        if (a.effect.target != kind || a.perturbation == 0.0) continue;
        value += a.perturbation * radial_falloff(distance(a.position, position), a.effect.radius);
    }
    return value;
}

SensorReading World::sample(const SensorMeta& sensor) const {
    double value = field_value(sensor.kind, sensor.position);
    if (sensor.sigma > 0.0) {
        value += sensor.sigma * seeded_gaussian(config_.seed, sensor.id, ticks_);
    }
    return {sensor.id, sensor.kind, value, clock_};
}

void World::set_actuator(std::string_view id, const Directive& directive) {
    directive.validate();
    SimActuator& a = mutable_actuator(id);
    a.directive = directive;
    a.mode_since = clock_;
}

void World::set_perturbation(std::string_view id, double magnitude) {
    mutable_actuator(id).perturbation = magnitude;
}

bool World::decide_active(const SimActuator& a) const {
    switch (a.directive.mode) {
    case ActuatorMode::on: return true;
    case ActuatorMode::off: return false;
    case ActuatorMode::automatic:
        break;
    }
    if (a.directive.period) {
        const Period& p = *a.directive.period;
        double phase = std::fmod(clock_ - a.mode_since, p.on_s + p.off_s);
        return phase < p.on_s;
    }
    const Condition& c = *a.directive.condition;
    if (config_.field(c.kind) == nullptr || !config_.in_extent(a.position)) return false;
    return c.holds(field_value(c.kind, a.position));
}

void World::tick(double dt) {
    if (!(dt > 0.0)) throw Error(ErrorCode::InvariantViolation, "tick dt must be > 0");
    // Decide every activation against the pre-tick state before mutating any field.
    std::vector<bool> active(actuators_.size());
    for (std::size_t i = 0; i < actuators_.size(); ++i) active[i] = decide_active(actuators_[i]);

    double decay = std::exp2(-dt / kPerturbationHalfLife);
    for (std::size_t i = 0; i < actuators_.size(); ++i) {
        SimActuator& a = actuators_[i];
        a.active = active[i];
        if (a.active) {
            double cap = a.effect.saturation;
            a.perturbation = std::clamp(a.perturbation + a.effect.amplitude * dt, -cap, cap);
        } else {
            a.perturbation *= decay;
        }
    }
    clock_ += dt;
    ++ticks_;
}

std::string World::serialize() const {
    nlohmann::json j;
    j["clock"] = clock_;
    j["ticks"] = ticks_;
    auto& list = j["actuators"] = nlohmann::json::array();
    for (const auto& a : actuators_) {
        nlohmann::json e{{"id", a.id},
                         {"position", vec_json(a.position)},
                         {"mode", to_string(a.directive.mode)},
                         {"active", a.active},
                         {"perturbation", a.perturbation},
                         {"mode_since", a.mode_since}};
        if (a.directive.condition) {
            e["condition"] = {{"kind", to_string(a.directive.condition->kind)},
                              {"comparator", to_string(a.directive.condition->comparator)},
                              {"threshold", a.directive.condition->threshold}};
        }
        if (a.directive.period) {
            e["period"] = {{"on_s", a.directive.period->on_s}, {"off_s", a.directive.period->off_s}};
        }
        list.push_back(std::move(e));
    }
    return j.dump();
}

FarmSim::FarmSim(World world)
    : world_(std::move(world)), published_(std::make_shared<const World>(world_)) {}

std::shared_ptr<const World> FarmSim::snapshot() const {
    std::lock_guard lock(mutex_);
    return published_;
}

void FarmSim::publish() { published_ = std::make_shared<const World>(world_); }

void FarmSim::tick(double dt) {
    std::lock_guard lock(mutex_);
    world_.tick(dt);
    publish();
}

void FarmSim::set_actuator(std::string_view id, const Directive& directive) {
    std::lock_guard lock(mutex_);
    world_.set_actuator(id, directive);
    publish();
}

void FarmSim::set_perturbation(std::string_view id, double magnitude) {
    std::lock_guard lock(mutex_);
    world_.set_perturbation(id, magnitude);
    publish();
}

}  // namespace ptwin
