#include <random>
#include <thread>

#include <doctest.h>

#include "ptwin/error.h"
#include "ptwin/interface_server.h"
#include "ptwin/twin.h"
#include "support.h"

using namespace ptwin;
using nlohmann::json;

namespace {

struct FakeRig {
    Scenario scenario = test::demo_scenario();
    std::shared_ptr<test::FakeIot> iot = std::make_shared<test::FakeIot>();
    std::shared_ptr<AuditLog> audit = std::make_shared<AuditLog>();
    InterfaceServer server{interface_config(scenario), iot, nullptr, audit};
};

json command(std::uint64_t seq, const std::string& stream, json payload) {
    return {{"type", "command"}, {"seq", seq}, {"body", {{"stream", stream}, {"payload", std::move(payload)}}}};
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvariantViolation;
}

// Pose that looks from the camera straight at a point.
ViewPose aim_at(Vec3 camera, Vec3 target) {
    Angles a = angles_from_direction(target - camera);
    return {a.yaw, a.pitch, 60.0, 640, 480};
}

void check_popup_invariant(const Session& s) {
    if (s.open_popup) {
        REQUIRE(s.selection.has_value());
        CHECK(*s.selection == s.open_popup->first);
    }
}

}  // namespace

TEST_SUITE("interface_server") {

TEST_CASE("iot stream makes exactly one IoT call and echoes origin") {
    FakeRig rig;
    auto sid = rig.server.open_session();
    json ack = rig.server.route_command({sid, 1, Stream::iot, {{"actuator_id", "heater-1"}, {"mode", "on"}}});
    CHECK(rig.iot->calls() == 1);
    CHECK(rig.iot->calls_to("/v1/actuators/heater-1/command") == 1);
    CHECK(ack.at("origin") == "iot");
    CHECK(ack.at("result").at("applied_mode") == "on");
    json sent = json::parse(rig.iot->log().at(0).body);
    CHECK(sent == json{{"mode", "on"}});
}

TEST_CASE("interface stream mutates state without IoT calls") {
    FakeRig rig;
    auto sid = rig.server.open_session();
    rig.server.route_command({sid, 1, Stream::interface, {{"op", "select"}, {"object_id", "bed-2"}}});
    CHECK(rig.server.session(sid).selection == std::optional<std::string>("bed-2"));
    CHECK(rig.server.highlight("bed-2").mode == HighlightMode::active);
    rig.server.route_command({sid, 2, Stream::interface, {{"op", "camera_move"}, {"delta", {{"yaw", 30}, {"vfov", -10}}}}});
    CHECK(rig.server.session(sid).pose.yaw == 30.0);
    CHECK(rig.server.session(sid).pose.vfov == 50.0);
    rig.server.route_command({sid, 3, Stream::interface, {{"op", "select"}, {"object_id", nullptr}}});
    CHECK(rig.server.highlight("bed-2").mode == HighlightMode::normal);
    CHECK(rig.iot->calls() == 0);
}

TEST_CASE("device stream is rejected as client-local") {
    FakeRig rig;
    auto sid = rig.server.open_session();
    CHECK(code_of([&] { rig.server.route_command({sid, 1, Stream::device, {{"op", "zoom"}, {"factor", 2}}}); }) ==
          ErrorCode::ClientLocalCommand);
    CHECK(rig.iot->calls() == 0);
    json reply = rig.server.handle_message(sid, command(7, "device", {{"op", "zoom"}}));
    CHECK(reply.at("type") == "error");
    CHECK(reply.at("seq") == 7);
    CHECK(reply.at("body").at("code") == "ClientLocalCommand");
}

TEST_CASE("unknown session is reported") {
    FakeRig rig;
    CHECK(code_of([&] { rig.server.route_command({"s99", 1, Stream::interface, {{"op", "popup_close"}}}); }) ==
          ErrorCode::UnknownSession);
}

TEST_CASE("IoT errors pass through with their downstream code and no retry") {
    FakeRig rig;
    auto sid = rig.server.open_session();
    rig.iot->inject(test::FakeIot::Fault::not_found);
    json reply = rig.server.handle_message(sid, command(1, "iot", {{"actuator_id", "ghost-9"}, {"mode", "off"}}));
    CHECK(reply.at("type") == "error");
    CHECK(reply.at("body").at("code") == "IotRejected");
    CHECK(reply.at("body").at("origin") == "iot");
    CHECK(reply.at("body").at("downstream") == "UnknownActuator");
    CHECK(rig.iot->calls() == 1);
}

TEST_CASE("a dropped transport is retried once and the audit log records both attempts") {
    FakeRig rig;
    auto sid = rig.server.open_session();
    rig.iot->inject(test::FakeIot::Fault::drop);
    json reply = rig.server.handle_message(sid, command(1, "iot", {{"actuator_id", "vent-1"}, {"mode", "on"}}));
    CHECK(reply.at("type") == "ack");
    CHECK(rig.iot->calls() == 2);
    json last = rig.audit->records().back();
    CHECK(last.at("attempts") == 2);
    CHECK(last.at("outcome") == "ack");

    rig.iot->inject(test::FakeIot::Fault::drop);
    rig.iot->inject(test::FakeIot::Fault::drop);
    json failed = rig.server.handle_message(sid, command(2, "iot", {{"actuator_id", "vent-1"}, {"mode", "off"}}));
    CHECK(failed.at("body").at("code") == "IotUnreachable");
    CHECK(rig.iot->calls() == 4);
    CHECK(rig.audit->records().back().at("attempts") == 2);
}

TEST_CASE("popup invariant holds through any command sequence") {
    FakeRig rig;
    auto sid = rig.server.open_session();
    rig.server.route_command({sid, 1, Stream::interface, {{"op", "popup_open"}, {"object_id", "bed-1"}, {"panel", "details"}}});
    Session s = rig.server.session(sid);
    CHECK(s.selection == std::optional<std::string>("bed-1"));
    REQUIRE(s.open_popup);
    CHECK(s.open_popup->second == Panel::details);
    rig.server.route_command({sid, 2, Stream::interface, {{"op", "select"}, {"object_id", "bed-2"}}});
    CHECK_FALSE(rig.server.session(sid).open_popup);

    std::mt19937_64 rng(12);
    std::vector<json> ops{{{"op", "select"}, {"object_id", "bed-1"}},
                          {{"op", "select"}, {"object_id", "bed-2"}},
                          {{"op", "select"}, {"object_id", nullptr}},
                          {{"op", "popup_open"}, {"object_id", "bed-1"}},
                          {{"op", "popup_open"}, {"object_id", "bed-2"}, {"panel", "actions"}},
                          {{"op", "popup_close"}},
                          {{"op", "pick"}, {"u", 0.5}, {"v", 0.5}},
                          {{"op", "camera_move"}, {"delta", {{"yaw", 45}}}}};
    for (int k = 0; k < 500; ++k) {
        json op = ops[rng() % ops.size()];
        rig.server.route_command({sid, static_cast<std::uint64_t>(k + 3), Stream::interface, op});
        check_popup_invariant(rig.server.session(sid));
    }
}

TEST_CASE("sessions are isolated") {
    FakeRig rig;
    auto a = rig.server.open_session();
    auto b = rig.server.open_session();
    Session before = rig.server.session(b);
    rig.server.route_command({a, 1, Stream::interface, {{"op", "popup_open"}, {"object_id", "bed-1"}}});
    rig.server.route_command({a, 2, Stream::interface, {{"op", "camera_move"}, {"pose", {{"yaw", 90}, {"pitch", -10}}}}});
    Session after = rig.server.session(b);
    CHECK(after.selection == before.selection);
    CHECK(after.open_popup == before.open_popup);
    CHECK(after.pose.yaw == before.pose.yaw);
    CHECK(after.pose.pitch == before.pose.pitch);

    // Both sessions hovering the same object keep it active until both leave.
    rig.server.route_command({b, 1, Stream::interface, {{"op", "select"}, {"object_id", "bed-1"}}});
    rig.server.route_command({a, 3, Stream::interface, {{"op", "select"}, {"object_id", nullptr}}});
    CHECK(rig.server.highlight("bed-1").mode == HighlightMode::active);
    rig.server.close_session(b);
    CHECK(rig.server.highlight("bed-1").mode == HighlightMode::normal);
}

TEST_CASE("pick_at selects what the centre ray hits") {
    FakeRig rig;
    Vec3 cam = rig.scenario.camera.position;
    auto sid = rig.server.open_session(aim_at(cam, rig.scenario.object("bed-1")->bounds.center()));
    CHECK(rig.server.pick_at(sid, 0.5, 0.5) == std::optional<std::string>("bed-1"));
    CHECK(rig.server.highlight("bed-1").mode == HighlightMode::active);

    rig.server.route_command({sid, 1, Stream::interface, {{"op", "camera_move"}, {"pose", {{"yaw", 90}, {"pitch", 60}}}}});
    CHECK_FALSE(rig.server.pick_at(sid, 0.5, 0.5));
    CHECK_FALSE(rig.server.session(sid).selection);
    CHECK(rig.server.highlight("bed-1").mode == HighlightMode::normal);
    CHECK(rig.iot->calls() == 0);
}

TEST_CASE("pick_at prefers the nearer of stacked objects") {
    Scenario s = test::demo_scenario();
    InterfaceConfig cfg = interface_config(s);
    cfg.camera_position = {0.5, 5.0, 1.0};
    cfg.objects = {{"rack-far", "far", {{8, 4, 0}, {9, 6, 2}}, {}, {}, {}},
                   {"rack-near", "near", {{4, 4, 0}, {5, 6, 2}}, {}, {}, {}}};
    InterfaceServer server(cfg, std::make_shared<test::FakeIot>());
    auto sid = server.open_session(ViewPose{0.0, 0.0, 60.0, 640, 480});
    CHECK(server.pick_at(sid, 0.5, 0.5) == std::optional<std::string>("rack-near"));
}

TEST_CASE("object details and actions against the real IoT server") {
    Scenario s = test::demo_scenario();
    for (auto& m : s.sensors) m.sigma = 0.0;
    Twin twin(s);
    twin.step();
    InterfaceServer& iface = twin.interface();

    json details = iface.object_details("bed-1");
    double sensor_value = 0.0;
    for (const auto& r : twin.iot().latest_readings(FieldKind::temperature)) {
        if (r.sensor_id == "t-bed1") sensor_value = r.value;
    }
    // bed-1's centre coincides with sensor t-bed1.
    CHECK(details.at("values").at("temperature").at("value").get<double>() == sensor_value);
    CHECK(details.at("values").at("co2").at("available") == true);
    CHECK(details.at("partial") == false);
    CHECK(details.at("severity").at("level") == "none");

    json actions = iface.object_actions("bed-1");
    CHECK(actions.size() == 8);
    int current = 0;
    for (const auto& a : actions) {
        if (a.at("current") == true) {
            ++current;
            if (a.at("actuator_id") == "heater-1") CHECK(a.at("option") == "auto_condition");
            if (a.at("actuator_id") == "vent-1") CHECK(a.at("option") == "off");
        }
    }
    CHECK(current == 2);
    CHECK(iface.object_actions("bed-2").size() == 4);
    CHECK(code_of([&] { iface.object_actions("bed-9"); }) == ErrorCode::UnknownObject);
    CHECK(code_of([&] { iface.object_details("bed-9"); }) == ErrorCode::UnknownObject);
}

TEST_CASE("details flag kinds with no sensors and keep the rest") {
    Scenario s = test::demo_scenario();
    s.factory.fields.push_back({FieldKind::ph, 6.0, {}});
    Twin twin(s);
    twin.step();
    json details = twin.interface().object_details("bed-2");
    CHECK(details.at("partial") == true);
    CHECK(details.at("values").at("ph").at("available") == false);
    CHECK(details.at("values").at("temperature").at("available") == true);
}

TEST_CASE("details severity agrees with compute_severity") {
    Scenario s = test::demo_scenario();
    for (auto& m : s.sensors) m.sigma = 0.0;
    Twin twin(s);
    twin.force("heater-1", 5.0);
    twin.step();
    json details = twin.interface().object_details("bed-1");
    std::map<FieldKind, double> values{
        {FieldKind::temperature, details.at("values").at("temperature").at("value").get<double>()},
        {FieldKind::humidity, details.at("values").at("humidity").at("value").get<double>()}};
    Severity expected = compute_severity(*s.object("bed-1"), values, s.severity);
    CHECK(details.at("severity").at("level") == std::string(to_string(expected.level)));
    CHECK(expected.level != SeverityLevel::none);
}

TEST_CASE("snapshots broadcast identically and drop oldest with a gap marker") {
    FakeRig rig;
    auto a = rig.server.open_session();
    auto b = rig.server.open_session();
    for (int k = 1; k <= 20; ++k) rig.server.publish_snapshot(k);
    auto ma = rig.server.drain(a);
    auto mb = rig.server.drain(b);
    REQUIRE(ma.size() == 17);
    CHECK(ma[0].at("type") == "gap");
    CHECK(ma[0].at("body").at("dropped") == 4);
    CHECK(ma[1].at("body").at("timestamp") == 5.0);
    double prev = 0.0;
    for (std::size_t i = 1; i < ma.size(); ++i) {
        CHECK(ma[i].at("body") == mb[i].at("body"));
        CHECK(ma[i].at("body").at("timestamp").get<double>() > prev);
        prev = ma[i].at("body").at("timestamp").get<double>();
        CHECK(ma[i].at("seq").get<int>() == ma[i - 1].at("seq").get<int>() + 1);
    }

    rig.server.publish_snapshot(21);
    auto next = rig.server.drain(a);
    REQUIRE(next.size() == 1);
    CHECK(next[0].at("type") == "snapshot");
    CHECK(code_of([&] { rig.server.publish_snapshot(21); }) == ErrorCode::InvariantViolation);
}

TEST_CASE("snapshot reflects actuator changes and raises issues") {
    Scenario s = test::demo_scenario();
    Twin twin(s);
    auto sid = twin.interface().open_session();
    twin.interface().route_command({sid, 1, Stream::iot, {{"actuator_id", "vent-1"}, {"mode", "on"}}});
    twin.step();
    json snap;
    for (auto& m : twin.interface().drain(sid)) {
        if (m.at("type") == "snapshot") snap = m.at("body");
    }
    REQUIRE_FALSE(snap.is_null());
    for (const auto& a : snap.at("actuators")) {
        if (a.at("id") == "vent-1") CHECK(a.at("mode") == "on");
    }
    twin.force("heater-1", 8.0);
    twin.step();
    CHECK(twin.interface().highlight("bed-1") == HighlightState{HighlightMode::issue, SeverityLevel::critical});
}

TEST_CASE("malformed channel input always yields a typed error and keeps the session") {
    FakeRig rig;
    auto sid = rig.server.open_session();
    std::mt19937_64 rng(99);
    std::vector<json> atoms{nullptr, 1, -3.5, "x", "iot", "interface", "device", "select", "heater-1", "bed-1",
                            json::array(), json::object(), true, "on", "auto", "/v1", "a/b", 1e308};
    std::vector<std::string> keys{"type", "seq", "body", "stream", "payload", "op", "object_id", "actuator_id",
                                  "mode", "condition", "period", "request", "kind", "position", "delta", "pose",
                                  "u", "v", "panel"};
    std::function<json(int)> gen = [&](int depth) -> json {
        int pick = static_cast<int>(rng() % 10);
        if (depth > 3 || pick < 4) return atoms[rng() % atoms.size()];
        json obj = json::object();
        int n = static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i) obj[keys[rng() % keys.size()]] = gen(depth + 1);
        if (pick == 9) return json::array({obj, gen(depth + 1)});
        return obj;
    };
    for (int k = 0; k < 3000; ++k) {
        json msg = gen(0);
        if (k % 3 == 0) msg = command(k, "interface", gen(1));
        if (k % 3 == 1) msg = command(k, "iot", gen(1));
        json reply = rig.server.handle_message(sid, msg);
        REQUIRE(reply.is_object());
        CHECK((reply.at("type") == "ack" || reply.at("type") == "error"));
        if (reply.at("type") == "error") {
            CHECK(parse_error_code(reply.at("body").at("code").get<std::string>()).has_value());
        }
        check_popup_invariant(rig.server.session(sid));
    }
    CHECK_NOTHROW(rig.server.route_command({sid, 1, Stream::interface, {{"op", "popup_close"}}}));
}

TEST_CASE("HTTP surface") {
    Scenario s = test::demo_scenario();
    Twin twin(s);
    twin.capture();
    twin.step();
    Handler h = twin.interface().handler();
    auto get = [&](const std::string& path, std::map<std::string, std::string> q = {}, std::string accept = {}) {
        HttpRequest r;
        r.path = path;
        r.query = std::move(q);
        r.accept = std::move(accept);
        return guarded(h, r);
    };
    CHECK(json::parse(get("/v1/objects").body).at("objects").size() == 2);
    CHECK(get("/v1/objects/bed-1/details").status == 200);
    CHECK(get("/v1/objects/bed-7/details").status == 404);
    CHECK(json::parse(get("/v1/objects/bed-2/actions").body).at("actions").size() == 4);

    HttpResponse png = get("/v1/view", {{"yaw", "10"}, {"w", "64"}, {"h", "48"}});
    CHECK(png.content_type == "image/png");
    CHECK(decode_image(png.body).width() == 64);
    HttpResponse ppm = get("/v1/view", {{"yaw", "10"}, {"w", "64"}, {"h", "48"}}, "image/x-portable-pixmap");
    CHECK(decode_ppm(ppm.body).height() == 48);
    json meta = json::parse(get("/v1/view", {{"yaw", "-160"}, {"pitch", "-8"}, {"w", "64"}, {"h", "48"}},
                                "application/json").body);
    CHECK(meta.at("objects").size() == 2);
    CHECK(meta.at("objects")[0].at("corners").size() == 8);
    CHECK(get("/v1/view", {{"vfov", "200"}}).status == 400);
    CHECK(get("/v1/view", {{"yaw", "abc"}}).status == 400);

    HttpResponse info = get("/v1/panorama/info");
    CHECK(json::parse(info.body).at("fully_covered") == true);
    CHECK(decode_image(get("/v1/panorama").body).width() == 1024);

    HttpRequest open;
    open.method = "POST";
    open.path = "/v1/channel";
    json hello = json::parse(guarded(h, open).body);
    CHECK(hello.at("type") == "hello");
    std::string sid = hello.at("body").at("session_id");
    HttpRequest send;
    send.method = "POST";
    send.path = "/v1/channel/" + sid + "/messages";
    send.body = command(1, "interface", {{"op", "select"}, {"object_id", "bed-1"}}).dump();
    json ack = json::parse(guarded(h, send).body);
    CHECK(ack.at("type") == "ack");
    CHECK(ack.at("seq") == 1);

    twin.step();
    json drained = json::parse(get("/v1/channel/" + sid + "/messages", {{"wait_ms", "0"}}).body);
    CHECK(drained.at("messages").size() == 1);

    HttpRequest close;
    close.method = "DELETE";
    close.path = "/v1/channel/" + sid;
    CHECK(guarded(h, close).status == 200);
    CHECK(get("/v1/channel/" + sid + "/messages").status == 404);
}

TEST_CASE("frames upload over multipart") {
    Scenario s = test::demo_scenario();
    Twin twin(s);
    Handler h = twin.interface().handler();
    auto frames = capture_frames(s, 0.0);
    for (const auto& f : frames) {
        HttpRequest r;
        r.method = "POST";
        r.path = "/v1/frames";
        r.form["metadata"] = json{{"camera_id", "rig-0"}, {"yaw", f.yaw}, {"hfov", f.hfov}, {"captured_at", 0.0}}.dump();
        r.form["image"] = encode_png(f.image);
        CHECK(guarded(h, r).status == 200);
    }
    CHECK(twin.frames().frames().size() == 8);
    CHECK(twin.frames().panorama().first->fully_covered());

    HttpRequest bad;
    bad.method = "POST";
    bad.path = "/v1/frames";
    bad.form["metadata"] = json{{"camera_id", "rig-0"}, {"yaw", 0}, {"hfov", 60}}.dump();
    bad.form["image"] = "P6\n0 0\n255\n";
    HttpResponse r = guarded(h, bad);
    CHECK(r.status == 422);
    CHECK(json::parse(r.body).at("code") == "MalformedImage");
}

TEST_CASE("long-poll wakes when a snapshot arrives") {
    FakeRig rig;
    auto sid = rig.server.open_session();
    std::thread publisher([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        rig.server.publish_snapshot(1.0);
    });
    auto start = std::chrono::steady_clock::now();
    auto msgs = rig.server.wait_and_drain(sid, 5000);
    auto waited = std::chrono::steady_clock::now() - start;
    publisher.join();
    CHECK(msgs.size() == 1);
    CHECK(waited < std::chrono::seconds(2));
}

}
