#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptwin/farm_sim.h"
#include "ptwin/http.h"
#include "ptwin/interaction.h"
#include "ptwin/iot_server.h"
#include "ptwin/scene.h"
#include "ptwin/view.h"

namespace ptwin {

enum class Stream { iot, interface, device };

std::string_view to_string(Stream stream);
std::optional<Stream> parse_stream(std::string_view name);

// One user command. The payload is the per-stream tagged body exactly as it
// travels on the channel; it is validated when routed.
struct Command {
    std::string session_id;
    std::uint64_t seq = 0;
    Stream stream = Stream::interface;
    nlohmann::json payload;
};

enum class Panel { actions, details };

struct Session {
    std::string id;
    ViewPose pose;
    std::optional<std::string> selection;
    std::optional<std::pair<std::string, Panel>> open_popup;
};

// Result of one forwarded IoT call, including how many attempts it took.
struct IotOutcome {
    std::optional<nlohmann::json> body;
    std::optional<Error> error;
    int attempts = 0;
};

// Client for the IoT server wire contract. Retries once on transport failure,
// never on an HTTP error status.
class IotClient {
public:
    explicit IotClient(std::shared_ptr<Transport> transport);

    IotOutcome call(const HttpRequest& request);
    IotOutcome command(const std::string& actuator_id, const nlohmann::json& directive);

    // Convenience reads; throw the mapped Error on failure.
    nlohmann::json devices();
    Interpolated interpolate(FieldKind kind, Vec3 position);

private:
    std::shared_ptr<Transport> transport_;
};

// Append-only JSON-lines log of routed commands.
class AuditLog {
public:
    AuditLog() = default;
    explicit AuditLog(const std::string& path);

    void append(nlohmann::json record);
    std::vector<nlohmann::json> records() const;
    std::string text() const;
    void flush();

private:
    mutable std::mutex mutex_;
    std::vector<nlohmann::json> records_;
    std::ofstream file_;
};

struct InterfaceConfig {
    std::vector<InteractableObject> objects;
    std::vector<FieldKind> kinds;  // environment kinds configured in the factory
    SeverityPolicy severity;
    Vec3 camera_position;
    ViewPose default_pose;
    std::size_t queue_depth = 16;
};

// Aggregates IoT data, routes the three command streams, owns session and
// highlight state, serves panorama views, and queues snapshots per session.
class InterfaceServer {
public:
    InterfaceServer(InterfaceConfig config, std::shared_ptr<Transport> iot,
                    std::shared_ptr<FrameStore> frames = nullptr,
                    std::shared_ptr<AuditLog> audit = nullptr);

    // Simulated time stamped on audit records.
    void set_time(double now);
    double time() const;

    std::string open_session(std::optional<ViewPose> pose = std::nullopt);
    void close_session(const std::string& session_id);
    Session session(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;

    // Routes one command; returns the ack body {origin, result}. Throws Error
    // (UnknownSession, ClientLocalCommand, MalformedCommand, IotRejected, ...).
    nlohmann::json route_command(const Command& command);

    // Channel entry point: a {type: "command", seq, body: {stream, payload}}
    // message in, an ack or error message out. Never throws.
    nlohmann::json handle_message(const std::string& session_id, const nlohmann::json& message);

    nlohmann::json object_details(const std::string& object_id);
    nlohmann::json object_actions(const std::string& object_id);
    nlohmann::json list_objects() const;

    std::optional<std::string> pick_at(const std::string& session_id, double u, double v);

    // Builds a snapshot at `now` (strictly after the previous one), updates
    // issue highlights, and queues it for every session.
    nlohmann::json publish_snapshot(double now);

    // Removes and returns queued messages for a session, assigning seq numbers.
    std::vector<nlohmann::json> drain(const std::string& session_id);
    // Blocks up to wait_ms for at least one message.
    std::vector<nlohmann::json> wait_and_drain(const std::string& session_id, int wait_ms);

    HighlightState highlight(const std::string& object_id) const;

    HttpResponse handle(const HttpRequest& request);
    Handler handler();

private:
    struct SessionSlot {
        std::mutex command_mutex;  // keeps acks in per-session command order
        Session state;
        std::deque<nlohmann::json> queue;
        std::size_t queued_snapshots = 0;
        std::uint64_t next_seq = 1;
    };
    struct ObjectState {
        HighlightState highlight;
        int hover_count = 0;
        Severity severity;
    };

    std::shared_ptr<SessionSlot> slot(const std::string& session_id) const;
    const InteractableObject& object(const std::string& object_id) const;
    nlohmann::json route_iot(const Command& command, int& attempts);
    nlohmann::json route_interface(const std::shared_ptr<SessionSlot>& slot, const Command& command);
    void select(Session& session, const std::optional<std::string>& object_id);
    void hover(const std::string& object_id, bool on);
    std::map<FieldKind, std::optional<Interpolated>> sample_object(const InteractableObject& object);
    std::pair<nlohmann::json, Image> view_response(const HttpRequest& request);
    nlohmann::json channel_open(const HttpRequest& request);

    InterfaceConfig config_;
    IotClient iot_;
    std::shared_ptr<FrameStore> frames_;
    std::shared_ptr<AuditLog> audit_;

    mutable std::mutex mutex_;  // sessions map, object state, clock
    std::condition_variable queue_cv_;
    std::map<std::string, std::shared_ptr<SessionSlot>> sessions_;
    std::map<std::string, ObjectState> objects_;
    std::uint64_t next_session_ = 1;
    std::uint64_t audit_seq_ = 1;
    double clock_ = 0.0;
    std::optional<double> last_snapshot_;
};

}  // namespace ptwin
