#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptwin/farm_sim.h"
#include "ptwin/interface_server.h"
#include "ptwin/iot_server.h"
#include "ptwin/scenario.h"
#include "ptwin/scene.h"

namespace ptwin {

std::vector<ActuatorDescriptor> actuator_descriptors(const Scenario& scenario);
InterfaceConfig interface_config(const Scenario& scenario);

// Renders the capture rig's frames (one per configured yaw) from the
// procedural cylinder scene.
std::vector<SceneFrame> capture_frames(const Scenario& scenario, double captured_at,
                                       const std::string& camera_id = "rig-0");

struct TwinOptions {
    std::string audit_log_path;  // empty keeps the log in memory only
    // How the interface server reaches the IoT server; in-memory by default.
    std::function<std::shared_ptr<Transport>(IotServer&)> iot_transport;
};

// farm-sim, iot-server, interface-server and the frame store wired together
// and driven by the simulated clock.
class Twin {
public:
    explicit Twin(Scenario scenario, TwinOptions options = {});
    Twin(const Twin&) = delete;
    Twin& operator=(const Twin&) = delete;

    const Scenario& scenario() const { return scenario_; }
    FarmSim& farm() { return *farm_; }
    IotServer& iot() { return *iot_; }
    InterfaceServer& interface() { return *interface_; }
    FrameStore& frames() { return *frames_; }
    AuditLog& audit() { return *audit_; }

    double now() const;

    // One tick: advance the farm, ingest telemetry, publish a snapshot when a
    // cadence boundary is crossed.
    void step();
    // Steps until now() >= t (within half a tick).
    void advance_to(double t);

    // Ingests one full capture sweep; returns the panorama version after it.
    std::uint64_t capture();

    // Overrides an actuator's perturbation and records the injection.
    void force(const std::string& actuator_id, double perturbation);

private:
    Scenario scenario_;
    std::shared_ptr<FarmSim> farm_;
    std::unique_ptr<IotServer> iot_;
    std::shared_ptr<AuditLog> audit_;
    std::shared_ptr<FrameStore> frames_;
    std::unique_ptr<InterfaceServer> interface_;
    double next_snapshot_ = 0.0;
};

struct ScriptResult {
    int exit_code = 0;
    std::vector<nlohmann::json> transcript;
    std::optional<Error> failure;  // AssertionFailed with where() = step index

    std::string transcript_text() const;
};

// Executes a script (JSON array of timed steps) against the twin through the
// channel message interface. Stops at the first failed assertion.
ScriptResult run_script(Twin& twin, const nlohmann::json& script);

// Re-executes the session events, injections and commands of an audit log at
// their recorded times. The twin's own audit log then holds the replay.
void replay_audit(Twin& twin, const std::vector<nlohmann::json>& records);

std::vector<nlohmann::json> read_json_lines(const std::string& path);
nlohmann::json read_json_file(const std::string& path);

}  // namespace ptwin
