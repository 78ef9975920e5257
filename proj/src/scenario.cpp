#include "ptwin/scenario.h"

#include <cmath>
#include <fstream>
#include <set>

#include "ptwin/error.h"
#include "ptwin/wire.h"

namespace ptwin {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& message) {
    throw Error(ErrorCode::InvalidScenario, pointer + ": " + message, pointer);
}

// A JSON value together with its pointer, so every failure can name its field.
struct Node {
    const json& value;
    std::string pointer;

    Node at(const std::string& key) const {
        if (!value.contains(key)) fail(pointer + "/" + key, "missing required field");
        return {value.at(key), pointer + "/" + key};
    }
    Node at(std::size_t index) const { return {value.at(index), pointer + "/" + std::to_string(index)}; }
    bool has(const std::string& key) const { return value.contains(key) && !value.at(key).is_null(); }

    void object(std::initializer_list<const char*> allowed) const {
        if (!value.is_object()) fail(pointer, "expected an object");
        wire::reject_unknown_keys(value, allowed, ErrorCode::InvalidScenario, pointer);
    }
    const json& array() const {
        if (!value.is_array()) fail(pointer, "expected an array");
        return value;
    }
    double number() const {
        if (!value.is_number()) fail(pointer, "expected a number");
        double v = value.get<double>();
        if (!std::isfinite(v)) fail(pointer, "expected a finite number");
        return v;
    }
    double positive() const {
        double v = number();
        if (!(v > 0.0)) fail(pointer, "must be > 0");
        return v;
    }
    int integer() const {
        if (!value.is_number_integer()) fail(pointer, "expected an integer");
        return value.get<int>();
    }
    std::string string() const {
        if (!value.is_string()) fail(pointer, "expected a string");
        return value.get<std::string>();
    }
    Vec3 vec3() const {
        if (!value.is_array() || value.size() != 3) fail(pointer, "expected [x, y, z]");
        return {at(0).number(), at(1).number(), at(2).number()};
    }
    FieldKind kind() const {
        auto k = parse_field_kind(string());
        if (!k) fail(pointer, "unknown field kind '" + value.get<std::string>() + "'");
        return *k;
    }
    Rgb color() const {
        if (!value.is_array() || value.size() != 3) fail(pointer, "expected [r, g, b]");
        Rgb c;
        std::uint8_t* channels[3] = {&c.r, &c.g, &c.b};
        for (std::size_t i = 0; i < 3; ++i) {
            int v = at(i).integer();
            if (v < 0 || v > 255) fail(at(i).pointer, "channel must be 0..255");
            *channels[i] = static_cast<std::uint8_t>(v);
        }
        return c;
    }
};

FactoryConfig parse_factory(const Node& n, double& default_sigma) {
    n.object({"extent", "tick_interval", "seed", "fields", "noise"});
    FactoryConfig f;
    f.extent = n.at("extent").vec3();
    for (int axis = 0; axis < 3; ++axis) {
        if (!(f.extent[axis] > 0.0)) fail(n.at("extent").pointer, "extent dimensions must be > 0");
    }
    f.tick_interval = n.at("tick_interval").positive();
    if (n.has("seed")) {
        if (!n.value["seed"].is_number_unsigned()) fail(n.pointer + "/seed", "expected a non-negative integer");
        f.seed = n.value["seed"].get<std::uint64_t>();
    }
    if (n.has("noise")) {
        default_sigma = n.at("noise").number();
        if (default_sigma < 0.0) fail(n.pointer + "/noise", "must be >= 0");
    }
    const Node fields = n.at("fields");
    std::set<FieldKind> seen;
    for (std::size_t i = 0; i < fields.array().size(); ++i) {
        Node e = fields.at(i);
        e.object({"kind", "base", "gradient"});
        FieldSpec spec{e.at("kind").kind(), e.at("base").number(), {}};
        if (e.has("gradient")) spec.gradient = e.at("gradient").vec3();
        if (!seen.insert(spec.kind).second) fail(e.pointer + "/kind", "duplicate field kind");
        f.fields.push_back(spec);
    }
    return f;
}

Directive parse_directive(const Node& n) {
    try {
        return wire::directive_from_json(n.value);
    } catch (const Error& e) {
        fail(n.pointer, e.what());
    }
}

}  // namespace

const InteractableObject* Scenario::object(const std::string& id) const {
    for (const auto& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

Scenario parse_scenario(const json& doc) {
    Node root{doc, ""};
    root.object({"factory", "sensors", "actuators", "objects", "severity", "camera", "run"});
    Scenario s;
    double default_sigma = 0.0;
    s.factory = parse_factory(root.at("factory"), default_sigma);

    std::set<std::string> sensor_ids;
    const Node sensors = root.at("sensors");
    for (std::size_t i = 0; i < sensors.array().size(); ++i) {
        Node e = sensors.at(i);
        e.object({"id", "position", "kind", "sigma"});
        SensorMeta m{e.at("id").string(), e.at("position").vec3(), e.at("kind").kind(), default_sigma};
        if (e.has("sigma")) {
            m.sigma = e.at("sigma").number();
            if (m.sigma < 0.0) fail(e.pointer + "/sigma", "must be >= 0");
        }
        if (!sensor_ids.insert(m.id).second) fail(e.pointer + "/id", "duplicate sensor id");
        if (!s.factory.in_extent(m.position)) fail(e.pointer + "/position", "outside factory extent");
        if (s.factory.field(m.kind) == nullptr) fail(e.pointer + "/kind", "field kind not configured");
        s.sensors.push_back(m);
    }

    std::set<std::string> actuator_ids;
    if (root.has("actuators")) {
        const Node actuators = root.at("actuators");
        for (std::size_t i = 0; i < actuators.array().size(); ++i) {
            Node e = actuators.at(i);
            e.object({"id", "kind", "position", "effect", "initial"});
            SimActuator a;
            a.id = e.at("id").string();
            auto kind = parse_actuator_kind(e.at("kind").string());
            if (!kind) fail(e.pointer + "/kind", "unknown actuator kind");
            a.kind = *kind;
            a.position = e.at("position").vec3();
            if (!s.factory.in_extent(a.position)) fail(e.pointer + "/position", "outside factory extent");
            Node eff = e.at("effect");
            eff.object({"target", "amplitude", "radius", "saturation"});
            a.effect.target = eff.at("target").kind();
            if (s.factory.field(a.effect.target) == nullptr) {
                fail(eff.pointer + "/target", "field kind not configured");
            }
            a.effect.amplitude = eff.at("amplitude").number();
            a.effect.radius = eff.at("radius").positive();
            if (eff.has("saturation")) a.effect.saturation = eff.at("saturation").positive();
            if (e.has("initial")) a.directive = parse_directive(e.at("initial"));
            if (!actuator_ids.insert(a.id).second) fail(e.pointer + "/id", "duplicate actuator id");
            s.actuators.push_back(a);
        }
    }

    if (root.has("objects")) {
        const Node objects = root.at("objects");
        std::set<std::string> object_ids;
        for (std::size_t i = 0; i < objects.array().size(); ++i) {
            Node e = objects.at(i);
            e.object({"id", "label", "bounds", "linked_sensors", "linked_actuators", "target_ranges"});
            InteractableObject o;
            o.id = e.at("id").string();
            o.label = e.has("label") ? e.at("label").string() : o.id;
            Node b = e.at("bounds");
            b.object({"min", "max"});
            o.bounds = {b.at("min").vec3(), b.at("max").vec3()};
            if (!o.bounds.valid()) fail(b.pointer, "min must be < max on every axis");
            auto links = [&](const char* key, const std::set<std::string>& known,
                             std::vector<std::string>& out) {
                if (!e.has(key)) return;
                Node list = e.at(key);
                for (std::size_t k = 0; k < list.array().size(); ++k) {
                    std::string id = list.at(k).string();
                    if (!known.count(id)) fail(list.at(k).pointer, "dangling reference '" + id + "'");
                    out.push_back(id);
                }
            };
            links("linked_sensors", sensor_ids, o.linked_sensors);
            links("linked_actuators", actuator_ids, o.linked_actuators);
            if (e.has("target_ranges")) {
                Node ranges = e.at("target_ranges");
                if (!ranges.value.is_object()) fail(ranges.pointer, "expected an object");
                for (const auto& [key, _] : ranges.value.items()) {
                    Node r = ranges.at(key);
                    auto kind = parse_field_kind(key);
                    if (!kind) fail(r.pointer, "unknown field kind");
                    if (!r.value.is_array() || r.value.size() != 2) fail(r.pointer, "expected [lo, hi]");
                    TargetRange tr{r.at(0).number(), r.at(1).number()};
                    if (!(tr.lo < tr.hi)) fail(r.pointer, "lo must be < hi");
                    o.target_ranges[*kind] = tr;
                }
            }
            if (!object_ids.insert(o.id).second) fail(e.pointer + "/id", "duplicate object id");
            s.objects.push_back(o);
        }
    }

    if (root.has("severity")) {
        Node n = root.at("severity");
        n.object({"warning_above", "critical_above", "colors"});
        if (n.has("warning_above")) s.severity.warning_above = n.at("warning_above").number();
        if (n.has("critical_above")) s.severity.critical_above = n.at("critical_above").number();
        if (!(s.severity.warning_above < s.severity.critical_above)) {
            fail(n.pointer, "warning_above must be < critical_above");
        }
        if (n.has("colors")) {
            Node c = n.at("colors");
            c.object({"none", "warning", "critical"});
            if (c.has("none")) s.severity.none_color = c.at("none").color();
            if (c.has("warning")) s.severity.warning_color = c.at("warning").color();
            if (c.has("critical")) s.severity.critical_color = c.at("critical").color();
            if (s.severity.none_color == s.severity.warning_color ||
                s.severity.none_color == s.severity.critical_color ||
                s.severity.warning_color == s.severity.critical_color) {
                fail(c.pointer, "severity colours must be distinct");
            }
        }
    }

    if (root.has("camera")) {
        Node n = root.at("camera");
        n.object({"position", "yaws", "hfov", "frame_width", "frame_height", "panorama_height",
                  "backend", "cylinder"});
        CameraConfig& c = s.camera;
        c.position = n.at("position").vec3();
        if (!s.factory.in_extent(c.position)) fail(n.pointer + "/position", "outside factory extent");
        if (n.has("yaws")) {
            c.yaws.clear();
            Node yaws = n.at("yaws");
            std::set<double> seen;
            for (std::size_t i = 0; i < yaws.array().size(); ++i) {
                double y = std::fmod(yaws.at(i).number(), 360.0);
                if (y < 0) y += 360.0;
                if (!seen.insert(y).second) fail(yaws.at(i).pointer, "capture yaws must be distinct");
                c.yaws.push_back(yaws.at(i).number());
            }
            if (c.yaws.empty()) fail(yaws.pointer, "at least one capture yaw required");
        }
        if (n.has("hfov")) {
            c.hfov = n.at("hfov").number();
            if (!(c.hfov > 0.0 && c.hfov < 180.0)) fail(n.pointer + "/hfov", "must lie in (0, 180)");
        }
        auto positive_int = [&](const char* key, int& out) {
            if (!n.has(key)) return;
            out = n.at(key).integer();
            if (out <= 0) fail(n.pointer + "/" + key, "must be > 0");
        };
        positive_int("frame_width", c.frame_width);
        positive_int("frame_height", c.frame_height);
        positive_int("panorama_height", c.panorama_height);
        if (n.has("backend")) c.backend = n.at("backend").string();
        if (n.has("cylinder")) {
            Node cyl = n.at("cylinder");
            cyl.object({"radius", "half_height"});
            if (cyl.has("radius")) c.cylinder.radius = cyl.at("radius").positive();
            if (cyl.has("half_height")) c.cylinder.half_height = cyl.at("half_height").positive();
        }
    }

    if (root.has("run")) {
        Node n = root.at("run");
        n.object({"cadence", "iot_port", "interface_port", "queue_depth", "time_scale"});
        if (n.has("cadence")) s.run.cadence = n.at("cadence").positive();
        if (n.has("time_scale")) s.run.time_scale = n.at("time_scale").positive();
        auto port = [&](const char* key, int& out) {
            if (!n.has(key)) return;
            out = n.at(key).integer();
            if (out < 0 || out > 65535) fail(n.pointer + "/" + key, "port must be 0..65535");
        };
        port("iot_port", s.run.iot_port);
        port("interface_port", s.run.interface_port);
        if (n.has("queue_depth")) {
            int d = n.at("queue_depth").integer();
            if (d <= 0) fail(n.pointer + "/queue_depth", "must be > 0");
            s.run.queue_depth = static_cast<std::size_t>(d);
        }
    }
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidScenario, "cannot open scenario '" + path + "'", "");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::InvalidScenario, "scenario is not valid JSON", "");
    return parse_scenario(doc);
}

}  // namespace ptwin
