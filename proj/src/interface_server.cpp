#include "ptwin/interface_server.h"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "ptwin/wire.h"

namespace ptwin {

using nlohmann::json;

namespace {

json color_json(Rgb c) { return json::array({c.r, c.g, c.b}); }

json pose_json(const ViewPose& p) {
    return {{"yaw", p.yaw}, {"pitch", p.pitch}, {"vfov", p.vfov}, {"width", p.width}, {"height", p.height}};
}

ViewPose pose_from_json(const json& j, ViewPose base) {
    wire::reject_unknown_keys(j, {"yaw", "pitch", "vfov", "width", "height"}, ErrorCode::MalformedCommand,
                              "/pose");
    if (j.contains("yaw")) base.yaw = j.at("yaw").get<double>();
    if (j.contains("pitch")) base.pitch = j.at("pitch").get<double>();
    if (j.contains("vfov")) base.vfov = j.at("vfov").get<double>();
    if (j.contains("width")) base.width = j.at("width").get<int>();
    if (j.contains("height")) base.height = j.at("height").get<int>();
    try {
        base.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedCommand, e.what());
    }
    return base;
}

std::string_view to_string(Panel p) { return p == Panel::actions ? "actions" : "details"; }

json session_json(const Session& s) {
    json popup = nullptr;
    if (s.open_popup) popup = {{"object_id", s.open_popup->first}, {"panel", to_string(s.open_popup->second)}};
    return {{"id", s.id},
            {"pose", pose_json(s.pose)},
            {"selection", s.selection ? json(*s.selection) : json(nullptr)},
            {"open_popup", popup}};
}

json highlight_json(const HighlightState& h) {
    return {{"mode", to_string(h.mode)},
            {"severity", h.mode == HighlightMode::issue ? json(to_string(h.severity)) : json(nullptr)}};
}

json severity_json(const Severity& s) {
    return {{"level", to_string(s.level)}, {"color", color_json(s.color)}, {"deviation", s.deviation}};
}

Error downstream_error(const HttpResponse& response) {
    auto body = json::parse(response.body, nullptr, false);
    std::string code = "HTTP" + std::to_string(response.status);
    std::string message = response.body;
    if (body.is_object()) {
        code = body.value("code", code);
        message = body.value("message", message);
    }
    return Error(ErrorCode::IotRejected, message, code);
}

std::string base64(const std::string& in) {
    static constexpr char kTable[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < in.size(); i += 3) {
        unsigned n = (static_cast<unsigned char>(in[i]) << 16) |
                     (static_cast<unsigned char>(in[i + 1]) << 8) | static_cast<unsigned char>(in[i + 2]);
        out += kTable[(n >> 18) & 63];
        out += kTable[(n >> 12) & 63];
        out += kTable[(n >> 6) & 63];
        out += kTable[n & 63];
    }
    if (i < in.size()) {
        unsigned n = static_cast<unsigned char>(in[i]) << 16;
        if (i + 1 < in.size()) n |= static_cast<unsigned char>(in[i + 1]) << 8;
        out += kTable[(n >> 18) & 63];
        out += kTable[(n >> 12) & 63];
        out += i + 1 < in.size() ? kTable[(n >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

}  // namespace

std::string_view to_string(Stream stream) {
    switch (stream) {
    case Stream::iot: return "iot";
    case Stream::interface: return "interface";
    case Stream::device: return "device";
    }
    return "?";
}

std::optional<Stream> parse_stream(std::string_view name) {
    for (auto s : {Stream::iot, Stream::interface, Stream::device}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// IotClient

IotClient::IotClient(std::shared_ptr<Transport> transport) : transport_(std::move(transport)) {}

IotOutcome IotClient::call(const HttpRequest& request) {
    IotOutcome out;
    for (int attempt = 1; attempt <= 2; ++attempt) {
        out.attempts = attempt;
        HttpResponse response;
        try {
            response = transport_->send(request);
        } catch (const TransportError& e) {
            out.error = Error(ErrorCode::IotUnreachable, e.what(), "iot");
            continue;
        }
        out.error.reset();
        if (response.ok()) {
            auto body = json::parse(response.body, nullptr, false);
            if (body.is_discarded()) {
                out.error = Error(ErrorCode::IotRejected, "IoT server returned invalid JSON", "MalformedResponse");
            } else {
                out.body = std::move(body);
            }
        } else {
            out.error = downstream_error(response);
        }
        return out;
    }
    return out;
}

IotOutcome IotClient::command(const std::string& actuator_id, const json& directive) {
    HttpRequest r;
    r.method = "POST";
    r.path = "/v1/actuators/" + actuator_id + "/command";
    r.body = directive.dump();
    return call(r);
}

json IotClient::devices() {
    HttpRequest r;
    r.path = "/v1/devices";
    IotOutcome o = call(r);
    if (o.error) throw *o.error;
    return *o.body;
}

Interpolated IotClient::interpolate(FieldKind kind, Vec3 position) {
    HttpRequest r;
    r.method = "POST";
    r.path = "/v1/interpolate";
    r.body = json{{"position", wire::to_json(position)}, {"kind", to_string(kind)}}.dump();
    IotOutcome o = call(r);
    if (o.error) throw *o.error;
    Interpolated out;
    out.value = o.body->at("value").get<double>();
    for (const auto& c : o.body->at("contributing")) {
        out.contributing.emplace_back(c.at("sensor_id").get<std::string>(), c.at("weight").get<double>());
    }
    return out;
}

// ---------------------------------------------------------------------------
// AuditLog

AuditLog::AuditLog(const std::string& path) : file_(path, std::ios::out | std::ios::trunc) {
    if (!file_) throw Error(ErrorCode::InvariantViolation, "cannot open audit log '" + path + "'");
}

void AuditLog::append(json record) {
    std::lock_guard lock(mutex_);
    if (file_.is_open()) file_ << record.dump() << '\n';
    records_.push_back(std::move(record));
}

std::vector<json> AuditLog::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::string AuditLog::text() const {
    std::lock_guard lock(mutex_);
    std::string out;
    for (const auto& r : records_) out += r.dump() + "\n";
    return out;
}

void AuditLog::flush() {
    std::lock_guard lock(mutex_);
    if (file_.is_open()) file_.flush();
}

// ---------------------------------------------------------------------------
// InterfaceServer

InterfaceServer::InterfaceServer(InterfaceConfig config, std::shared_ptr<Transport> iot,
                                 std::shared_ptr<FrameStore> frames, std::shared_ptr<AuditLog> audit)
    : config_(std::move(config)),
      iot_(std::move(iot)),
      frames_(std::move(frames)),
      audit_(audit ? std::move(audit) : std::make_shared<AuditLog>()) {
    std::sort(config_.objects.begin(), config_.objects.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    for (const auto& o : config_.objects) {
        objects_[o.id].severity = {SeverityLevel::none, config_.severity.color(SeverityLevel::none), 0.0};
    }
    config_.default_pose.validate();
    if (config_.queue_depth == 0) throw Error(ErrorCode::InvariantViolation, "queue depth must be > 0");
}

void InterfaceServer::set_time(double now) {
    std::lock_guard lock(mutex_);
    clock_ = now;
}

double InterfaceServer::time() const {
    std::lock_guard lock(mutex_);
    return clock_;
}

std::string InterfaceServer::open_session(std::optional<ViewPose> pose) {
    auto s = std::make_shared<SessionSlot>();
    s->state.pose = pose.value_or(config_.default_pose);
    s->state.pose.validate();
    std::string id;
    double now = 0.0;
    std::uint64_t seq = 0;
    {
        std::lock_guard lock(mutex_);
        id = "s" + std::to_string(next_session_++);
        s->state.id = id;
        sessions_[id] = s;
        now = clock_;
        seq = audit_seq_++;
    }
    audit_->append({{"seq", seq}, {"t", now}, {"event", "session_open"}, {"session", id},
                    {"pose", pose_json(s->state.pose)}});
    return id;
}

void InterfaceServer::close_session(const std::string& session_id) {
    auto s = slot(session_id);
    std::lock_guard command_lock(s->command_mutex);
    double now = 0.0;
    std::uint64_t seq = 0;
    {
        std::lock_guard lock(mutex_);
        if (s->state.selection) hover(*s->state.selection, false);
        sessions_.erase(session_id);
        now = clock_;
        seq = audit_seq_++;
    }
    audit_->append({{"seq", seq}, {"t", now}, {"event", "session_close"}, {"session", session_id}});
    queue_cv_.notify_all();
}

std::shared_ptr<InterfaceServer::SessionSlot> InterfaceServer::slot(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session '" + session_id + "'");
    return it->second;
}

Session InterfaceServer::session(const std::string& session_id) const {
    auto s = slot(session_id);
    std::lock_guard lock(mutex_);
    return s->state;
}

std::vector<std::string> InterfaceServer::session_ids() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions_) ids.push_back(id);
    return ids;
}

const InteractableObject& InterfaceServer::object(const std::string& object_id) const {
    auto it = std::lower_bound(config_.objects.begin(), config_.objects.end(), object_id,
                               [](const InteractableObject& o, const std::string& id) { return o.id < id; });
    if (it == config_.objects.end() || it->id != object_id) {
        throw Error(ErrorCode::UnknownObject, "unknown object '" + object_id + "'");
    }
    return *it;
}

HighlightState InterfaceServer::highlight(const std::string& object_id) const {
    object(object_id);
    std::lock_guard lock(mutex_);
    return objects_.at(object_id).highlight;
}

// Caller holds mutex_.
void InterfaceServer::hover(const std::string& object_id, bool on) {
    ObjectState& st = objects_.at(object_id);
    if (on) {
        if (st.hover_count++ == 0) st.highlight = highlight_transition(st.highlight, HighlightEvent::hover_on());
    } else if (st.hover_count > 0) {
        if (--st.hover_count == 0) st.highlight = highlight_transition(st.highlight, HighlightEvent::hover_off());
    }
}

// Caller holds mutex_.
void InterfaceServer::select(Session& session, const std::optional<std::string>& object_id) {
    if (session.selection == object_id) return;
    if (session.selection) hover(*session.selection, false);
    session.selection = object_id;
    if (object_id) hover(*object_id, true);
    if (session.open_popup && session.open_popup->first != object_id) session.open_popup.reset();
}

json InterfaceServer::route_command(const Command& command) {
    auto s = slot(command.session_id);
    std::lock_guard command_lock(s->command_mutex);
    int attempts = 0;
    json record{{"session", command.session_id},
                {"command_seq", command.seq},
                {"stream", to_string(command.stream)},
                {"payload", command.payload}};
    json ack;
    try {
        switch (command.stream) {
        case Stream::iot:
            ack = {{"origin", "iot"}, {"result", route_iot(command, attempts)}};
            break;
        case Stream::interface:
            ack = {{"origin", "interface"}, {"result", route_interface(s, command)}};
            break;
        case Stream::device:
            throw Error(ErrorCode::ClientLocalCommand,
                        "device-stream commands are handled by the console and never sent", "device");
        }
    } catch (const Error& e) {
        record["attempts"] = attempts;
        record["outcome"] = "error";
        record["error"] = {{"code", to_string(e.code())}, {"message", e.what()}, {"where", e.where()}};
        {
            std::lock_guard lock(mutex_);
            record["seq"] = audit_seq_++;
            record["t"] = clock_;
        }
        audit_->append(std::move(record));
        throw;
    }
    record["attempts"] = attempts;
    record["outcome"] = "ack";
    record["result"] = ack["result"];
    {
        std::lock_guard lock(mutex_);
        record["seq"] = audit_seq_++;
        record["t"] = clock_;
    }
    audit_->append(std::move(record));
    return ack;
}

json InterfaceServer::route_iot(const Command& command, int& attempts) {
    const json& p = command.payload;
    if (!p.is_object()) throw Error(ErrorCode::MalformedCommand, "iot payload must be an object", "iot");
    IotOutcome outcome;
    if (p.contains("request")) {
        if (!p["request"].is_string()) throw Error(ErrorCode::MalformedCommand, "request must be a string", "iot");
        std::string kind = p["request"].get<std::string>();
        HttpRequest r;
        if (kind == "devices") {
            wire::reject_unknown_keys(p, {"request"}, ErrorCode::MalformedCommand);
            r.path = "/v1/devices";
        } else if (kind == "readings") {
            wire::reject_unknown_keys(p, {"request", "kind"}, ErrorCode::MalformedCommand);
            r.path = "/v1/readings";
            if (p.contains("kind")) {
                if (!p["kind"].is_string()) throw Error(ErrorCode::MalformedCommand, "kind must be a string", "iot");
                r.query["kind"] = p["kind"].get<std::string>();
            }
        } else if (kind == "interpolate") {
            wire::reject_unknown_keys(p, {"request", "kind", "position"}, ErrorCode::MalformedCommand);
            if (!p.contains("kind") || !p.contains("position")) {
                throw Error(ErrorCode::MalformedCommand, "interpolate needs kind and position", "iot");
            }
            r.method = "POST";
            r.path = "/v1/interpolate";
            r.body = json{{"kind", p["kind"]}, {"position", p["position"]}}.dump();
        } else {
            throw Error(ErrorCode::MalformedCommand, "unknown data request '" + kind + "'", "iot");
        }
        outcome = iot_.call(r);
    } else {
        if (!p.contains("actuator_id") || !p["actuator_id"].is_string() || p["actuator_id"].get<std::string>().empty()) {
            throw Error(ErrorCode::MalformedCommand, "iot directive needs an actuator_id", "iot");
        }
        std::string id = p["actuator_id"].get<std::string>();
        if (id.find_first_of("/?#% ") != std::string::npos) {
            throw Error(ErrorCode::MalformedCommand, "actuator_id contains reserved characters", "iot");
        }
        json directive = p;
        directive.erase("actuator_id");
        outcome = iot_.command(id, directive);
    }
    attempts = outcome.attempts;
    if (outcome.error) throw *outcome.error;
    return *outcome.body;
}

json InterfaceServer::route_interface(const std::shared_ptr<SessionSlot>& s, const Command& command) {
    const json& p = command.payload;
    if (!p.is_object() || !p.contains("op") || !p["op"].is_string()) {
        throw Error(ErrorCode::MalformedCommand, "interface payload needs a string 'op'", "interface");
    }
    const std::string op = p["op"].get<std::string>();
    auto object_arg = [&]() -> std::optional<std::string> {
        if (!p.contains("object_id") || p["object_id"].is_null()) return std::nullopt;
        if (!p["object_id"].is_string()) throw Error(ErrorCode::MalformedCommand, "object_id must be a string");
        std::string id = p["object_id"].get<std::string>();
        object(id);
        return id;
    };

    if (op == "select") {
        wire::reject_unknown_keys(p, {"op", "object_id"}, ErrorCode::MalformedCommand);
        auto target = object_arg();
        std::lock_guard lock(mutex_);
        select(s->state, target);
        return {{"session", session_json(s->state)}};
    }
    if (op == "popup_open") {
        wire::reject_unknown_keys(p, {"op", "object_id", "panel"}, ErrorCode::MalformedCommand);
        auto target = object_arg();
        if (!target) throw Error(ErrorCode::MalformedCommand, "popup_open needs an object_id");
        std::string panel = p.value("panel", std::string("actions"));
        if (panel != "actions" && panel != "details") {
            throw Error(ErrorCode::MalformedCommand, "panel must be actions or details");
        }
        std::lock_guard lock(mutex_);
        select(s->state, target);
        s->state.open_popup = {{*target, panel == "actions" ? Panel::actions : Panel::details}};
        return {{"session", session_json(s->state)}};
    }
    if (op == "popup_close") {
        wire::reject_unknown_keys(p, {"op"}, ErrorCode::MalformedCommand);
        std::lock_guard lock(mutex_);
        s->state.open_popup.reset();
        return {{"session", session_json(s->state)}};
    }
    if (op == "camera_move") {
        wire::reject_unknown_keys(p, {"op", "pose", "delta"}, ErrorCode::MalformedCommand);
        ViewPose pose;
        {
            std::lock_guard lock(mutex_);
            pose = s->state.pose;
        }
        if (p.contains("pose")) pose = pose_from_json(p["pose"], pose);
        if (p.contains("delta")) {
            const json& d = p["delta"];
            wire::reject_unknown_keys(d, {"yaw", "pitch", "vfov"}, ErrorCode::MalformedCommand, "/delta");
            pose.yaw = wrap_degrees(pose.yaw + d.value("yaw", 0.0));
            pose.pitch = std::clamp(pose.pitch + d.value("pitch", 0.0), -90.0, 90.0);
            pose.vfov += d.value("vfov", 0.0);
            try {
                pose.validate();
            } catch (const Error& e) {
                throw Error(ErrorCode::MalformedCommand, e.what());
            }
        }
        std::lock_guard lock(mutex_);
        s->state.pose = pose;
        return {{"session", session_json(s->state)}};
    }
    if (op == "pick") {
        wire::reject_unknown_keys(p, {"op", "u", "v"}, ErrorCode::MalformedCommand);
        double u = p.value("u", 0.5);
        double v = p.value("v", 0.5);
        if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
            throw Error(ErrorCode::MalformedCommand, "screen point must lie in [0,1]^2");
        }
        std::lock_guard lock(mutex_);
        Ray ray = ray_from_view(config_.camera_position, s->state.pose, u, v);
        select(s->state, pick(ray, config_.objects));
        return {{"selection", s->state.selection ? json(*s->state.selection) : json(nullptr)},
                {"session", session_json(s->state)}};
    }
    throw Error(ErrorCode::MalformedCommand, "unknown interface op '" + op + "'", "interface");
}

json InterfaceServer::handle_message(const std::string& session_id, const json& message) {
    std::uint64_t seq = 0;
    try {
        if (!message.is_object()) throw Error(ErrorCode::MalformedCommand, "message must be an object");
        if (message.contains("seq") && message["seq"].is_number_unsigned()) seq = message["seq"].get<std::uint64_t>();
        if (message.value("type", std::string()) != "command") {
            throw Error(ErrorCode::MalformedCommand, "expected a message of type 'command'");
        }
        if (!message.contains("body") || !message["body"].is_object()) {
            throw Error(ErrorCode::MalformedCommand, "command message needs an object body");
        }
        const json& body = message["body"];
        if (!body.contains("stream") || !body["stream"].is_string()) {
            throw Error(ErrorCode::MalformedCommand, "command body needs a string stream");
        }
        auto stream = parse_stream(body["stream"].get<std::string>());
        if (!stream) throw Error(ErrorCode::MalformedCommand, "stream must be iot, interface or device");
        Command cmd{session_id, seq, *stream, body.value("payload", json::object())};
        return {{"type", "ack"}, {"seq", seq}, {"body", route_command(cmd)}};
    } catch (const Error& e) {
        json body{{"code", to_string(e.code())}, {"message", e.what()}};
        if (e.code() == ErrorCode::IotRejected) {
            body["origin"] = "iot";
            body["downstream"] = e.where();
        } else if (!e.where().empty()) {
            body["origin"] = e.where();
        }
        return {{"type", "error"}, {"seq", seq}, {"body", body}};
    } catch (const json::exception& e) {
        return {{"type", "error"},
                {"seq", seq},
                {"body", {{"code", to_string(ErrorCode::MalformedCommand)}, {"message", e.what()}}}};
    }
}

std::map<FieldKind, std::optional<Interpolated>> InterfaceServer::sample_object(const InteractableObject& o) {
    std::map<FieldKind, std::optional<Interpolated>> out;
    for (FieldKind kind : config_.kinds) {
        try {
            out[kind] = iot_.interpolate(kind, o.bounds.center());
        } catch (const Error&) {
            out[kind] = std::nullopt;
        }
    }
    return out;
}

json InterfaceServer::object_details(const std::string& object_id) {
    const InteractableObject& o = object(object_id);
    auto samples = sample_object(o);
    json values = json::object();
    std::map<FieldKind, double> ranged;
    for (const auto& [kind, sample] : samples) {
        std::string key(to_string(kind));
        if (!sample) {
            values[key] = {{"available", false}, {"error", to_string(ErrorCode::NoSensorsOfKind)}};
            continue;
        }
        json contributing = json::array();
        for (const auto& [id, w] : sample->contributing) contributing.push_back({{"sensor_id", id}, {"weight", w}});
        values[key] = {{"available", true}, {"value", sample->value}, {"contributing", contributing}};
        if (o.target_ranges.count(kind)) ranged[kind] = sample->value;
    }
    Severity sev = compute_severity(o, ranged, config_.severity);
    json ranges = json::object();
    for (const auto& [kind, r] : o.target_ranges) ranges[std::string(to_string(kind))] = {r.lo, r.hi};
    return {{"id", o.id},
            {"label", o.label},
            {"bounds", {{"min", wire::to_json(o.bounds.min)}, {"max", wire::to_json(o.bounds.max)}}},
            {"center", wire::to_json(o.bounds.center())},
            {"linked_sensors", o.linked_sensors},
            {"linked_actuators", o.linked_actuators},
            {"target_ranges", ranges},
            {"values", values},
            {"partial", std::any_of(samples.begin(), samples.end(), [](const auto& e) { return !e.second; })},
            {"severity", severity_json(sev)},
            {"highlight", highlight_json(highlight(object_id))}};
}

json InterfaceServer::object_actions(const std::string& object_id) {
    const InteractableObject& o = object(object_id);
    json out = json::array();
    if (o.linked_actuators.empty()) return out;
    json devices = iot_.devices();
    for (const auto& actuator_id : o.linked_actuators) {
        json current;
        for (const auto& a : devices.at("actuators")) {
            if (a.at("id") == actuator_id) current = a;
        }
        if (current.is_null()) throw Error(ErrorCode::UnknownActuator, "actuator '" + actuator_id + "' not registered");
        auto target = parse_field_kind(current.at("target").get<std::string>()).value_or(FieldKind::temperature);
        bool cooling = current.at("kind") == "vent";
        double threshold = 0.0;
        if (auto r = o.target_ranges.find(target); r != o.target_ranges.end()) {
            threshold = cooling ? r->second.hi : r->second.lo;
        }
        std::string mode = current.at("mode").get<std::string>();
        std::string active_option = mode;
        if (mode == "auto") active_option = current.contains("condition") ? "auto_condition" : "auto_period";

        json options = json::array({
            {{"option", "on"}, {"directive", {{"mode", "on"}}}},
            {{"option", "off"}, {"directive", {{"mode", "off"}}}},
            {{"option", "auto_condition"},
             {"directive",
              {{"mode", "auto"},
               {"condition", {{"kind", to_string(target)}, {"comparator", cooling ? ">" : "<"}, {"threshold", threshold}}}}}},
            {{"option", "auto_period"}, {"directive", {{"mode", "auto"}, {"period", {{"on_s", 60.0}, {"off_s", 60.0}}}}}},
        });
        for (auto& opt : options) {
            opt["actuator_id"] = actuator_id;
            opt["current"] = opt["option"] == active_option;
            out.push_back(opt);
        }
    }
    return out;
}

json InterfaceServer::list_objects() const {
    json out = json::array();
    std::lock_guard lock(mutex_);
    for (const auto& o : config_.objects) {
        const ObjectState& st = objects_.at(o.id);
        out.push_back({{"id", o.id},
                       {"label", o.label},
                       {"bounds", {{"min", wire::to_json(o.bounds.min)}, {"max", wire::to_json(o.bounds.max)}}},
                       {"highlight", highlight_json(st.highlight)},
                       {"severity", severity_json(st.severity)}});
    }
    return out;
}

std::optional<std::string> InterfaceServer::pick_at(const std::string& session_id, double u, double v) {
    Command cmd{session_id, 0, Stream::interface, {{"op", "pick"}, {"u", u}, {"v", v}}};
    json ack = route_command(cmd);
    const json& sel = ack.at("result").at("selection");
    if (sel.is_null()) return std::nullopt;
    return sel.get<std::string>();
}

json InterfaceServer::publish_snapshot(double now) {
    {
        std::lock_guard lock(mutex_);
        if (last_snapshot_ && !(now > *last_snapshot_)) {
            throw Error(ErrorCode::InvariantViolation, "snapshot timestamps must strictly increase");
        }
    }
    // IoT reads happen outside the state lock.
    std::vector<std::pair<const InteractableObject*, std::map<FieldKind, std::optional<Interpolated>>>> sampled;
    for (const auto& o : config_.objects) sampled.emplace_back(&o, sample_object(o));
    json actuators = json::array();
    bool iot_available = true;
    try {
        json devices = iot_.devices();
        for (const auto& a : devices.at("actuators")) {
            actuators.push_back({{"id", a.at("id")}, {"mode", a.at("mode")}, {"active", a.at("active")}});
        }
    } catch (const Error&) {
        iot_available = false;
    }
    std::uint64_t panorama_version = frames_ ? frames_->version() : 0;

    json objects = json::array();
    std::lock_guard lock(mutex_);
    for (const auto& [o, samples] : sampled) {
        std::map<FieldKind, double> ranged;
        json values = json::object();
        for (const auto& [kind, sample] : samples) {
            values[std::string(to_string(kind))] = sample ? json(sample->value) : json(nullptr);
            if (sample && o->target_ranges.count(kind)) ranged[kind] = sample->value;
        }
        ObjectState& st = objects_.at(o->id);
        st.severity = compute_severity(*o, ranged, config_.severity);
        st.highlight = highlight_transition(st.highlight, HighlightEvent::issue_raised(st.severity.level));
        if (st.highlight.mode == HighlightMode::normal && st.hover_count > 0) {
            st.highlight = highlight_transition(st.highlight, HighlightEvent::hover_on());
        }
        objects.push_back({{"id", o->id},
                           {"label", o->label},
                           {"highlight", highlight_json(st.highlight)},
                           {"severity", severity_json(st.severity)},
                           {"values", values}});
    }
    json snapshot{{"timestamp", now},
                  {"objects", objects},
                  {"actuators", actuators},
                  {"iot_available", iot_available},
                  {"panorama_version", panorama_version}};
    last_snapshot_ = now;

    for (auto& [id, s] : sessions_) {
        if (s->queued_snapshots >= config_.queue_depth) {
            // Drop the oldest snapshot and fold the loss into a leading gap marker.
            auto it = std::find_if(s->queue.begin(), s->queue.end(),
                                   [](const json& m) { return m.at("type") == "snapshot"; });
            if (it != s->queue.end()) {
                s->queue.erase(it);
                --s->queued_snapshots;
                if (!s->queue.empty() && s->queue.front().at("type") == "gap") {
                    s->queue.front()["body"]["dropped"] = s->queue.front()["body"]["dropped"].get<int>() + 1;
                } else {
                    s->queue.push_front({{"type", "gap"}, {"body", {{"dropped", 1}}}});
                }
            }
        }
        s->queue.push_back({{"type", "snapshot"}, {"body", snapshot}});
        ++s->queued_snapshots;
    }
    queue_cv_.notify_all();
    return snapshot;
}

std::vector<json> InterfaceServer::drain(const std::string& session_id) {
    auto s = slot(session_id);
    std::lock_guard lock(mutex_);
    std::vector<json> out;
    while (!s->queue.empty()) {
        json m = std::move(s->queue.front());
        s->queue.pop_front();
        if (m.at("type") == "snapshot") --s->queued_snapshots;
        m["seq"] = s->next_seq++;
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<json> InterfaceServer::wait_and_drain(const std::string& session_id, int wait_ms) {
    auto s = slot(session_id);
    {
        std::unique_lock lock(mutex_);
        queue_cv_.wait_for(lock, std::chrono::milliseconds(std::max(wait_ms, 0)), [&] {
            return !s->queue.empty() || !sessions_.count(session_id);
        });
    }
    return drain(session_id);
}

std::pair<json, Image> InterfaceServer::view_response(const HttpRequest& request) {
    if (!frames_) throw Error(ErrorCode::BackendUnavailable, "no scene pipeline attached");
    auto number = [&](const char* key, double fallback) {
        auto v = request.query_value(key);
        if (!v || v->empty()) return fallback;
        try {
            std::size_t used = 0;
            double d = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument(key);
            return d;
        } catch (const std::exception&) {
            throw Error(ErrorCode::MalformedRequest, std::string("query parameter '") + key + "' must be a number");
        }
    };
    ViewPose pose;
    pose.yaw = number("yaw", config_.default_pose.yaw);
    pose.pitch = number("pitch", config_.default_pose.pitch);
    pose.vfov = number("vfov", config_.default_pose.vfov);
    pose.width = static_cast<int>(number("w", config_.default_pose.width));
    pose.height = static_cast<int>(number("h", config_.default_pose.height));
    try {
        pose.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedRequest, e.what());
    }
    if (pose.width > 4096 || pose.height > 4096) throw Error(ErrorCode::MalformedRequest, "viewport too large");
    auto [pano, version] = frames_->panorama();
    if (!pano) throw Error(ErrorCode::UncoveredRegion, "no frames ingested yet");
    Image img = extract_view(*pano, pose);

    json objects = json::array();
    {
        std::lock_guard lock(mutex_);
        for (const auto& o : config_.objects) {
            json corners = json::array();
            for (int k = 0; k < 8; ++k) {
                Vec3 c{(k & 1) ? o.bounds.max.x : o.bounds.min.x, (k & 2) ? o.bounds.max.y : o.bounds.min.y,
                       (k & 4) ? o.bounds.max.z : o.bounds.min.z};
                double px = 0.0;
                double py = 0.0;
                if (project_point(config_.camera_position, pose, c, px, py)) {
                    corners.push_back({px, py});
                } else {
                    corners.push_back(nullptr);
                }
            }
            const ObjectState& st = objects_.at(o.id);
            Rgb tint = st.highlight.mode == HighlightMode::issue ? config_.severity.color(st.highlight.severity)
                                                                 : st.severity.color;
            objects.push_back({{"id", o.id},
                               {"corners", corners},
                               {"highlight", highlight_json(st.highlight)},
                               {"color", color_json(tint)}});
        }
    }
    json meta{{"width", img.width()},
              {"height", img.height()},
              {"pose", pose_json(pose)},
              {"panorama_version", version},
              {"objects", objects}};
    return {std::move(meta), std::move(img)};
}

json InterfaceServer::channel_open(const HttpRequest& request) {
    std::optional<ViewPose> pose;
    if (!request.body.empty()) {
        json body = parse_json_body(request);
        wire::reject_unknown_keys(body, {"pose"}, ErrorCode::MalformedRequest);
        if (body.contains("pose")) pose = pose_from_json(body["pose"], config_.default_pose);
    }
    std::string id = open_session(pose);
    return {{"type", "hello"}, {"seq", 0}, {"body", {{"session_id", id}, {"session", session_json(session(id))}}}};
}

HttpResponse InterfaceServer::handle(const HttpRequest& request) {
    auto seg = path_segments(request.path);
    if (seg.size() < 2 || seg[0] != "v1") throw Error(ErrorCode::NotFound, request.path + " not found");
    const std::string& root = seg[1];
    const std::string& method = request.method;

    if (root == "health" && seg.size() == 2 && method == "GET") {
        return json_response({{"status", "ok"}, {"time", time()}});
    }
    if (root == "objects" && method == "GET") {
        if (seg.size() == 2) return json_response({{"objects", list_objects()}});
        if (seg.size() == 4 && seg[3] == "details") return json_response(object_details(seg[2]));
        if (seg.size() == 4 && seg[3] == "actions") {
            return json_response({{"object_id", seg[2]}, {"actions", object_actions(seg[2])}});
        }
    }
    if (root == "channel") {
        if (seg.size() == 2 && method == "POST") return json_response(channel_open(request));
        if (seg.size() == 3 && method == "DELETE") {
            close_session(seg[2]);
            return json_response({{"type", "closed"}, {"body", {{"session_id", seg[2]}}}});
        }
        if (seg.size() == 4 && seg[3] == "messages") {
            if (method == "POST") {
                slot(seg[2]);
                auto message = json::parse(request.body, nullptr, false);
                return json_response(handle_message(seg[2], message.is_discarded() ? json() : message));
            }
            if (method == "GET") {
                int wait_ms = 0;
                if (auto w = request.query_value("wait_ms"); w && !w->empty()) {
                    try {
                        wait_ms = std::clamp(std::stoi(*w), 0, 30000);
                    } catch (const std::exception&) {
                        throw Error(ErrorCode::MalformedRequest, "wait_ms must be an integer");
                    }
                }
                return json_response({{"messages", wait_and_drain(seg[2], wait_ms)}});
            }
        }
    }
    if (root == "frames" && seg.size() == 2 && method == "POST") {
        if (!frames_) throw Error(ErrorCode::BackendUnavailable, "no scene pipeline attached");
        auto meta_it = request.form.find("metadata");
        auto image_it = request.form.find("image");
        if (meta_it == request.form.end() || image_it == request.form.end()) {
            throw Error(ErrorCode::MalformedRequest, "multipart upload needs 'metadata' and 'image' parts");
        }
        json meta = json::parse(meta_it->second, nullptr, false);
        if (meta.is_discarded()) throw Error(ErrorCode::MalformedRequest, "metadata part is not valid JSON");
        wire::reject_unknown_keys(meta, {"camera_id", "yaw", "pitch", "hfov", "captured_at"},
                                  ErrorCode::MalformedRequest);
        SceneFrame frame;
        frame.camera_id = meta.at("camera_id").get<std::string>();
        frame.yaw = meta.at("yaw").get<double>();
        frame.pitch = meta.value("pitch", 0.0);
        frame.hfov = meta.at("hfov").get<double>();
        frame.captured_at = meta.value("captured_at", time());
        frame.image = decode_image(image_it->second);
        auto ack = frames_->ingest(std::move(frame));
        return json_response({{"camera_id", ack.camera_id},
                              {"yaw", ack.yaw},
                              {"frames", ack.frames},
                              {"replaced", ack.replaced}});
    }
    if (root == "panorama" && method == "GET") {
        if (!frames_) throw Error(ErrorCode::BackendUnavailable, "no scene pipeline attached");
        auto [pano, version] = frames_->panorama();
        if (!pano) throw Error(ErrorCode::UncoveredRegion, "no frames ingested yet");
        if (seg.size() == 3 && seg[2] == "info") {
            std::size_t covered = std::count(pano->coverage.begin(), pano->coverage.end(), 1);
            return json_response({{"version", version},
                                  {"width", pano->image.width()},
                                  {"height", pano->image.height()},
                                  {"covered_columns", covered},
                                  {"fully_covered", pano->fully_covered()},
                                  {"composed_at", pano->composed_at}});
        }
        if (seg.size() == 2) {
            if (request.accept.find("image/x-portable-pixmap") != std::string::npos) {
                return {200, encode_ppm(pano->image), "image/x-portable-pixmap"};
            }
            return {200, encode_png(pano->image), "image/png"};
        }
    }
    if (root == "view" && seg.size() == 2 && method == "GET") {
        auto [view, img] = view_response(request);
        if (request.accept.find("application/json") != std::string::npos) {
            view["image"] = {{"encoding", "png"}, {"data", base64(encode_png(img))}};
            return json_response(view);
        }
        if (request.accept.find("image/x-portable-pixmap") != std::string::npos) {
            return {200, encode_ppm(img), "image/x-portable-pixmap"};
        }
        return {200, encode_png(img), "image/png"};
    }
    throw Error(ErrorCode::NotFound, method + " " + request.path + " not found");
}

Handler InterfaceServer::handler() {
    return [this](const HttpRequest& r) { return handle(r); };
}

}  // namespace ptwin
