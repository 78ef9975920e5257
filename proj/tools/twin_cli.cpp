// twin-cli: run the plant-factory twin, feed it synthetic captures, and drive
// scripted scenarios headlessly.
//
// Exit codes: 0 success, 1 assertion failed, 2 invalid scenario or usage,
// 3 port in use, 4 server unreachable, 5 any other error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "ptwin/error.h"
#include "ptwin/http.h"
#include "ptwin/twin.h"

namespace {

using namespace ptwin;
using nlohmann::json;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::AssertionFailed: return 1;
    case ErrorCode::InvalidScenario:
    case ErrorCode::BackendUnavailable: return 2;
    case ErrorCode::PortInUse: return 3;
    case ErrorCode::ServerUnreachable: return 4;
    default: return 5;
    }
}

void install_signal_handlers() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error(ErrorCode::InvariantViolation, "cannot write '" + path + "'");
}

struct RunFlags {
    std::string scenario;
    std::string ports;
    std::string host = "127.0.0.1";
    std::string audit_log;
    bool split = false;
    double cadence = 0.0;
    double time_scale = 0.0;
    double duration = 0.0;
};

void apply_overrides(Scenario& s, const RunFlags& f) {
    if (!f.ports.empty()) {
        auto comma = f.ports.find(',');
        if (comma == std::string::npos) throw CLI::ValidationError("--ports", "expected IOT_PORT,INTERFACE_PORT");
        s.run.iot_port = std::stoi(f.ports.substr(0, comma));
        s.run.interface_port = std::stoi(f.ports.substr(comma + 1));
    }
    if (f.cadence > 0.0) s.run.cadence = f.cadence;
    if (f.time_scale > 0.0) s.run.time_scale = f.time_scale;
}

// Sleeps in small slices so signals are noticed promptly.
void sleep_interruptible(double seconds) {
    auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
    while (!g_stop && std::chrono::steady_clock::now() < until) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
}

int cmd_run(const RunFlags& f) {
    Scenario scenario = load_scenario(f.scenario);
    apply_overrides(scenario, f);
    Twin* twin_ptr = nullptr;
    HttpService iot_http([&twin_ptr](const HttpRequest& r) { return twin_ptr->iot().handle(r); });
    HttpService iface_http([&twin_ptr](const HttpRequest& r) { return twin_ptr->interface().handle(r); });
    iot_http.bind(f.host, scenario.run.iot_port);
    iface_http.bind(f.host, scenario.run.interface_port);

    TwinOptions options;
    options.audit_log_path = f.audit_log;
    if (f.split) {
        std::string host = f.host;
        int port = iot_http.port();
        options.iot_transport = [host, port](IotServer&) { return std::make_shared<HttpClientTransport>(host, port); };
    }
    Twin twin(scenario, options);
    twin_ptr = &twin;
    iot_http.start();
    iface_http.start();
    std::cout << "iot-server listening on http://" << f.host << ":" << iot_http.port() << "\n"
              << "interface-server listening on http://" << f.host << ":" << iface_http.port() << "\n"
              << "ready" << std::endl;

    install_signal_handlers();
    double wall_tick = scenario.factory.tick_interval / scenario.run.time_scale;
    auto started = std::chrono::steady_clock::now();
    while (!g_stop) {
        sleep_interruptible(wall_tick);
        if (g_stop) break;
        twin.step();
        if (f.duration > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >= f.duration) {
            break;
        }
    }
    iface_http.stop();
    iot_http.stop();
    twin.audit().flush();
    std::cout << "stopped at t=" << twin.now() << std::endl;
    return 0;
}

int cmd_serve_iot(const RunFlags& f) {
    Scenario scenario = load_scenario(f.scenario);
    apply_overrides(scenario, f);
    auto farm = std::make_shared<FarmSim>(World(scenario.factory, scenario.actuators));
    IotServer iot(scenario.factory, scenario.sensors, actuator_descriptors(scenario),
                  [farm](const std::string& id, const Directive& d) { farm->set_actuator(id, d); });
    iot.sync_from(*farm->snapshot());
    HttpService http(iot.handler());
    http.bind(f.host, scenario.run.iot_port);
    http.start();
    std::cout << "iot-server listening on http://" << f.host << ":" << http.port() << "\nready" << std::endl;
    install_signal_handlers();
    while (!g_stop) {
        sleep_interruptible(scenario.factory.tick_interval / scenario.run.time_scale);
        if (g_stop) break;
        farm->tick();
        iot.sync_from(*farm->snapshot());
    }
    http.stop();
    return 0;
}

int cmd_serve_interface(const RunFlags& f, const std::string& iot_endpoint) {
    Scenario scenario = load_scenario(f.scenario);
    apply_overrides(scenario, f);
    auto [iot_host, iot_port] = iot_endpoint.empty() ? std::make_pair(f.host, scenario.run.iot_port)
                                                     : parse_endpoint(iot_endpoint);
    auto transport = std::make_shared<HttpClientTransport>(iot_host, iot_port);
    auto audit = f.audit_log.empty() ? std::make_shared<AuditLog>() : std::make_shared<AuditLog>(f.audit_log);
    auto frames = std::make_shared<FrameStore>(make_backend(scenario.camera.backend), scenario.camera.panorama_height);
    InterfaceServer iface(interface_config(scenario), transport, frames, audit);
    HttpService http(iface.handler());
    http.bind(f.host, scenario.run.interface_port);
    http.start();
    std::cout << "interface-server listening on http://" << f.host << ":" << http.port() << "\nready" << std::endl;
    install_signal_handlers();

    // The simulated clock lives with the farm; follow it through /v1/health.
    double next_snapshot = scenario.run.cadence;
    HttpRequest health;
    health.path = "/v1/health";
    while (!g_stop) {
        sleep_interruptible(0.25 * scenario.run.cadence / scenario.run.time_scale);
        try {
            HttpResponse r = transport->send(health);
            if (!r.ok()) continue;
            double t = json::parse(r.body).at("time").get<double>();
            iface.set_time(t);
            if (t + 1e-9 >= next_snapshot) {
                iface.publish_snapshot(t);
                while (next_snapshot <= t + 1e-9) next_snapshot += scenario.run.cadence;
            }
        } catch (const TransportError&) {
            // IoT server not up yet; keep polling.
        }
    }
    http.stop();
    audit->flush();
    return 0;
}

int cmd_capture(const std::string& scenario_path, const std::string& url, const std::string& out_dir) {
    Scenario scenario = load_scenario(scenario_path);
    std::vector<SceneFrame> frames = capture_frames(scenario, 0.0);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        for (const auto& f : frames) {
            char name[64];
            std::snprintf(name, sizeof name, "frame_yaw%03d.ppm", static_cast<int>(std::lround(f.yaw)));
            write_ppm_file((std::filesystem::path(out_dir) / name).string(), f.image);
        }
        Panorama pano = compose_panorama(frames, scenario.camera.panorama_height);
        write_ppm_file((std::filesystem::path(out_dir) / "panorama.ppm").string(), pano.image);
        std::cout << json{{"frames", frames.size()},
                          {"covered_columns", std::count(pano.coverage.begin(), pano.coverage.end(), 1)},
                          {"width", pano.image.width()}}
                         .dump()
                  << std::endl;
        return 0;
    }

    auto [host, port] = url.empty() ? std::make_pair(std::string("127.0.0.1"), scenario.run.interface_port)
                                    : parse_endpoint(url);
    HttpClientTransport client(host, port);
    auto send = [&](const HttpRequest& r) {
        try {
            return client.send(r);
        } catch (const TransportError& e) {
            throw Error(ErrorCode::ServerUnreachable, e.what());
        }
    };
    HttpRequest health;
    health.path = "/v1/health";
    double now = json::parse(send(health).body).value("time", 0.0);
    for (const auto& f : frames) {
        HttpRequest r;
        r.method = "POST";
        r.path = "/v1/frames";
        r.form["metadata"] = json{{"camera_id", f.camera_id}, {"yaw", f.yaw}, {"pitch", f.pitch},
                                  {"hfov", f.hfov}, {"captured_at", now}}
                                 .dump();
        r.form["image"] = encode_ppm(f.image);
        HttpResponse resp = send(r);
        if (!resp.ok()) throw Error(ErrorCode::ServerUnreachable, "frame upload rejected: " + resp.body);
        std::cout << resp.body << "\n";
    }
    HttpRequest info;
    info.path = "/v1/panorama/info";
    std::cout << send(info).body << std::endl;
    return 0;
}

int cmd_script(const std::string& scenario_path, const std::string& script_path, const std::string& transcript,
               const std::string& audit_log) {
    Scenario scenario = load_scenario(scenario_path);
    json script = read_json_file(script_path);
    Twin twin(scenario, {audit_log, {}});
    ScriptResult result = run_script(twin, script);
    if (!transcript.empty()) {
        write_text(transcript, result.transcript_text());
    } else {
        std::cout << result.transcript_text();
    }
    if (result.failure) {
        std::cerr << "AssertionFailed at step " << result.failure->where() << ": " << result.failure->what() << "\n";
    }
    return result.exit_code;
}

int cmd_replay(const std::string& scenario_path, const std::string& input, const std::string& output) {
    Scenario scenario = load_scenario(scenario_path);
    Twin twin(scenario, {output, {}});
    replay_audit(twin, read_json_lines(input));
    if (output.empty()) std::cout << twin.audit().text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Plant-factory digital twin: simulator, IoT server, interface server"};
    app.require_subcommand(1);

    RunFlags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", flags.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
        sub->add_option("--ports", flags.ports, "IOT_PORT,INTERFACE_PORT (overrides the scenario)");
        sub->add_option("--host", flags.host, "Bind address");
        sub->add_option("--audit-log", flags.audit_log, "Audit log path (JSON lines)");
        sub->add_option("--cadence", flags.cadence, "Snapshot cadence in simulated seconds");
        sub->add_option("--time-scale", flags.time_scale, "Simulated seconds per wall second");
    };

    auto* run = app.add_subcommand("run", "Launch farm-sim, iot-server and interface-server");
    add_common(run);
    run->add_flag("--split", flags.split, "Route interface -> IoT traffic over a real socket");
    run->add_option("--duration", flags.duration, "Stop after this many wall seconds (0 = until signalled)");

    auto* serve_iot = app.add_subcommand("serve-iot", "Run farm-sim and the IoT server only");
    add_common(serve_iot);

    std::string iot_endpoint;
    auto* serve_iface = app.add_subcommand("serve-interface", "Run the interface server against a remote IoT server");
    add_common(serve_iface);
    serve_iface->add_option("--iot", iot_endpoint, "IoT server host:port");

    std::string url;
    std::string out_dir;
    auto* capture = app.add_subcommand("capture-sim", "Render the capture sweep and POST it to /v1/frames");
    capture->add_option("--scenario", flags.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    capture->add_option("--url", url, "Interface server host:port");
    capture->add_option("--out-dir", out_dir, "Write PPM frames and the composed panorama here instead");

    std::string script_path;
    std::string transcript;
    auto* script = app.add_subcommand("script", "Run a scripted scenario headlessly");
    script->add_option("--scenario", flags.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    script->add_option("script", script_path, "Script JSON file")->required()->check(CLI::ExistingFile);
    script->add_option("--transcript", transcript, "Write the transcript here instead of stdout");
    script->add_option("--audit-log", flags.audit_log, "Audit log path (JSON lines)");

    std::string replay_in;
    auto* replay = app.add_subcommand("replay", "Re-execute an audit log against a fresh twin");
    replay->add_option("--scenario", flags.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    replay->add_option("input", replay_in, "Recorded audit log")->required()->check(CLI::ExistingFile);
    replay->add_option("--audit-log", flags.audit_log, "Write the replay's audit log here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(flags);
        if (*serve_iot) return cmd_serve_iot(flags);
        if (*serve_iface) return cmd_serve_interface(flags, iot_endpoint);
        if (*capture) return cmd_capture(flags.scenario, url, out_dir);
        if (*script) return cmd_script(flags.scenario, script_path, transcript, flags.audit_log);
        if (*replay) return cmd_replay(flags.scenario, replay_in, flags.audit_log);
    } catch (const Error& e) {
        std::cerr << to_string(e.code()) << ": " << e.what();
        if (!e.where().empty()) std::cerr << " (at " << e.where() << ")";
        std::cerr << std::endl;
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 5;
    }
    return 0;
}
