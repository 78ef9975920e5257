#include "ptwin/twin.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ptwin/error.h"

namespace ptwin {

using nlohmann::json;

std::vector<ActuatorDescriptor> actuator_descriptors(const Scenario& s) {
    std::vector<ActuatorDescriptor> out;
    for (const auto& a : s.actuators) out.push_back({a.id, a.kind, a.position, a.effect.target, a.directive, false});
    return out;
}

InterfaceConfig interface_config(const Scenario& s) {
    InterfaceConfig c;
    c.objects = s.objects;
    for (const auto& f : s.factory.fields) c.kinds.push_back(f.kind);
    c.severity = s.severity;
    c.camera_position = s.camera.position;
    c.queue_depth = s.run.queue_depth;
    return c;
}

std::vector<SceneFrame> capture_frames(const Scenario& s, double captured_at, const std::string& camera_id) {
    std::vector<SceneFrame> frames;
    const CameraConfig& cam = s.camera;
    for (double yaw : cam.yaws) {
        SceneFrame f;
        f.camera_id = camera_id;
        f.yaw = yaw;
        f.pitch = 0.0;
        f.hfov = cam.hfov;
        f.captured_at = captured_at;
        f.image = render_cylinder_frame(cam.cylinder, yaw, 0.0, cam.hfov, cam.frame_width, cam.frame_height);
        frames.push_back(std::move(f));
    }
    return frames;
}

Twin::Twin(Scenario scenario, TwinOptions options) : scenario_(std::move(scenario)) {
    farm_ = std::make_shared<FarmSim>(World(scenario_.factory, scenario_.actuators));
    auto farm = farm_;
    iot_ = std::make_unique<IotServer>(
        scenario_.factory, scenario_.sensors, actuator_descriptors(scenario_),
        [farm](const std::string& id, const Directive& d) { farm->set_actuator(id, d); });
    iot_->sync_from(*farm_->snapshot());

    audit_ = options.audit_log_path.empty() ? std::make_shared<AuditLog>()
                                            : std::make_shared<AuditLog>(options.audit_log_path);
    frames_ = std::make_shared<FrameStore>(make_backend(scenario_.camera.backend),
                                           scenario_.camera.panorama_height);
    std::shared_ptr<Transport> transport =
        options.iot_transport ? options.iot_transport(*iot_) : std::make_shared<InMemoryTransport>(iot_->handler());
    interface_ = std::make_unique<InterfaceServer>(interface_config(scenario_), std::move(transport), frames_, audit_);
    next_snapshot_ = scenario_.run.cadence;
}

double Twin::now() const { return farm_->snapshot()->now(); }

void Twin::step() {
    farm_->tick(scenario_.factory.tick_interval);
    auto world = farm_->snapshot();
    iot_->sync_from(*world);
    double t = world->now();
    interface_->set_time(t);
    constexpr double kSlack = 1e-9;
    if (t + kSlack >= next_snapshot_) {
        interface_->publish_snapshot(t);
        while (next_snapshot_ <= t + kSlack) next_snapshot_ += scenario_.run.cadence;
    }
}

void Twin::advance_to(double t) {
    double half_tick = 0.5 * scenario_.factory.tick_interval;
    while (now() + half_tick < t) step();
}

std::uint64_t Twin::capture() {
    for (auto& f : capture_frames(scenario_, now())) frames_->ingest(std::move(f));
    return frames_->version();
}

void Twin::force(const std::string& actuator_id, double perturbation) {
    farm_->set_perturbation(actuator_id, perturbation);
    audit_->append({{"t", now()},
                    {"event", "force"},
                    {"actuator_id", actuator_id},
                    {"perturbation", perturbation}});
}

std::string ScriptResult::transcript_text() const {
    std::string out;
    for (const auto& e : transcript) out += e.dump() + "\n";
    return out;
}

namespace {

// Does the snapshot satisfy an expectation like {"object": id, "severity": level}?
bool matches(const json& snapshot, const json& expect, json& observed) {
    if (!expect.is_object() || (!expect.contains("object") && !expect.contains("actuator"))) {
        throw Error(ErrorCode::MalformedCommand, "expectation must name an object or an actuator");
    }
    if (snapshot.is_null()) {
        observed = nullptr;
        return false;
    }
    if (expect.contains("object")) {
        for (const auto& o : snapshot.at("objects")) {
            if (o.at("id") != expect.at("object")) continue;
            bool ok = true;
            observed = {{"object", o.at("id")}, {"timestamp", snapshot.at("timestamp")}};
            if (expect.contains("severity")) {
                observed["severity"] = o.at("severity").at("level");
                ok = ok && o.at("severity").at("level") == expect.at("severity");
            }
            if (expect.contains("highlight")) {
                observed["highlight"] = o.at("highlight").at("mode");
                ok = ok && o.at("highlight").at("mode") == expect.at("highlight");
            }
            return ok;
        }
        observed = {{"object", nullptr}};
        return false;
    }
    if (expect.contains("actuator")) {
        for (const auto& a : snapshot.at("actuators")) {
            if (a.at("id") != expect.at("actuator")) continue;
            bool ok = true;
            observed = {{"actuator", a.at("id")}, {"timestamp", snapshot.at("timestamp")}};
            if (expect.contains("mode")) {
                observed["mode"] = a.at("mode");
                ok = ok && a.at("mode") == expect.at("mode");
            }
            if (expect.contains("active")) {
                observed["active"] = a.at("active");
                ok = ok && a.at("active") == expect.at("active");
            }
            return ok;
        }
        observed = {{"actuator", nullptr}};
        return false;
    }
    return false;
}

}  // namespace

ScriptResult run_script(Twin& twin, const json& script) {
    if (!script.is_array()) throw Error(ErrorCode::MalformedCommand, "script must be a JSON array of steps");
    ScriptResult result;
    InterfaceServer& iface = twin.interface();
    std::string session = iface.open_session();
    json latest;
    std::uint64_t next_seq = 1;
    auto collect = [&] {
        for (auto& m : iface.drain(session)) {
            if (m.at("type") == "snapshot") latest = m.at("body");
        }
    };

    for (std::size_t i = 0; i < script.size(); ++i) {
        const json& step = script[i];
        if (!step.is_object()) throw Error(ErrorCode::MalformedCommand, "step must be an object", std::to_string(i));
        if (step.contains("at")) twin.advance_to(step.at("at").get<double>());
        collect();
        json entry{{"step", i}, {"t", twin.now()}};

        if (step.contains("command")) {
            json message{{"type", "command"}, {"seq", next_seq++}, {"body", step.at("command")}};
            entry["type"] = "command";
            entry["response"] = iface.handle_message(session, message);
        } else if (step.contains("force")) {
            const json& f = step.at("force");
            twin.force(f.at("actuator").get<std::string>(), f.at("perturbation").get<double>());
            entry["type"] = "force";
            entry["force"] = f;
        } else if (step.contains("capture")) {
            entry["type"] = "capture";
            entry["panorama_version"] = twin.capture();
        } else if (step.contains("expect") || step.contains("await")) {
            bool waiting = step.contains("await");
            const json& expect = waiting ? step.at("await") : step.at("expect");
            double deadline = twin.now() + (waiting ? step.value("within", 0.0) : 0.0);
            json observed;
            bool ok = matches(latest, expect, observed);
            while (!ok && waiting && twin.now() + 1e-9 < deadline) {
                twin.step();
                collect();
                ok = matches(latest, expect, observed);
            }
            entry["type"] = waiting ? "await" : "expect";
            entry["t"] = twin.now();
            entry["expected"] = expect;
            entry["observed"] = observed;
            entry["ok"] = ok;
            if (!ok) {
                result.transcript.push_back(entry);
                result.exit_code = 1;
                result.failure = Error(ErrorCode::AssertionFailed,
                                       "step " + std::to_string(i) + ": expected " + expect.dump() +
                                           ", observed " + observed.dump(),
                                       std::to_string(i));
                break;
            }
        } else if (!step.contains("at")) {
            throw Error(ErrorCode::MalformedCommand, "step has no action", std::to_string(i));
        } else {
            entry["type"] = "advance";
        }
        result.transcript.push_back(std::move(entry));
    }
    twin.audit().flush();
    return result;
}

void replay_audit(Twin& twin, const std::vector<json>& records) {
    InterfaceServer& iface = twin.interface();
    std::map<std::string, std::string> sessions;  // recorded id -> replay id
    for (const auto& r : records) {
        twin.advance_to(r.at("t").get<double>());
        std::string event = r.value("event", std::string());
        if (event == "session_open") {
            ViewPose pose;
            const json& p = r.at("pose");
            pose.yaw = p.at("yaw");
            pose.pitch = p.at("pitch");
            pose.vfov = p.at("vfov");
            pose.width = p.at("width");
            pose.height = p.at("height");
            sessions[r.at("session").get<std::string>()] = iface.open_session(pose);
        } else if (event == "session_close") {
            iface.close_session(sessions.at(r.at("session").get<std::string>()));
        } else if (event == "force") {
            twin.force(r.at("actuator_id").get<std::string>(), r.at("perturbation").get<double>());
        } else {
            auto stream = parse_stream(r.at("stream").get<std::string>());
            Command cmd{sessions.at(r.at("session").get<std::string>()), r.at("command_seq").get<std::uint64_t>(),
                        stream.value_or(Stream::device), r.at("payload")};
            try {
                iface.route_command(cmd);
            } catch (const Error&) {
                // The error is already recorded in the replay's own audit log.
            }
        }
    }
    twin.audit().flush();
}

std::vector<json> read_json_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MalformedRequest, "cannot open '" + path + "'");
    std::vector<json> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(json::parse(line));
    }
    return out;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MalformedRequest, "cannot open '" + path + "'");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::MalformedRequest, "'" + path + "' is not valid JSON");
    return doc;
}

}  // namespace ptwin
