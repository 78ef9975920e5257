#include <doctest.h>

#include "ptwin/error.h"
#include "ptwin/scenario.h"
#include "support.h"

using namespace ptwin;
using nlohmann::json;

namespace {

std::string pointer_of(const json& doc) {
    try {
        parse_scenario(doc);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidScenario);
        return e.where();
    }
    return "<accepted>";
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("bundled demo scenario parses") {
    Scenario s = test::demo_scenario();
    CHECK(s.sensors.size() == 6);
    CHECK(s.actuators.size() == 3);
    CHECK(s.objects.size() == 2);
    CHECK(s.camera.yaws.size() == 8);
    CHECK(s.object("bed-1") != nullptr);
    CHECK(s.object("bed-9") == nullptr);
    CHECK(s.objects[0].target_ranges.at(FieldKind::temperature).hi == 26.0);
}

TEST_CASE("errors carry a JSON pointer to the offending field") {
    json doc = test::demo_json();

    json dangling = doc;
    dangling["objects"][0]["linked_actuators"][1] = "vent-9";
    CHECK(pointer_of(dangling) == "/objects/0/linked_actuators/1");

    json unknown = doc;
    unknown["factory"]["colour"] = "green";
    CHECK(pointer_of(unknown) == "/factory/colour");

    json top = doc;
    top["extras"] = 1;
    CHECK(pointer_of(top) == "/extras");

    json outside = doc;
    outside["sensors"][2]["position"] = {25.0, 1.0, 1.0};
    CHECK(pointer_of(outside) == "/sensors/2/position");

    json dup_yaw = doc;
    dup_yaw["camera"]["yaws"] = {0, 45, 45};
    CHECK(pointer_of(dup_yaw).rfind("/camera/yaws", 0) == 0);

    json bad_range = doc;
    bad_range["objects"][1]["target_ranges"]["temperature"] = {26.0, 16.0};
    CHECK(pointer_of(bad_range) == "/objects/1/target_ranges/temperature");

    json bad_kind = doc;
    bad_kind["sensors"][0]["kind"] = "lux";
    CHECK(pointer_of(bad_kind) == "/sensors/0/kind");

    json bad_directive = doc;
    bad_directive["actuators"][0]["initial"] = {{"mode", "auto"}};
    CHECK(pointer_of(bad_directive).rfind("/actuators/0/initial", 0) == 0);

    json missing = doc;
    missing["factory"].erase("tick_interval");
    CHECK(pointer_of(missing) == "/factory/tick_interval");

    json dup_sensor = doc;
    dup_sensor["sensors"][1]["id"] = "t-bed1";
    CHECK(pointer_of(dup_sensor) == "/sensors/1/id");
}

TEST_CASE("unknown severity keys and bad colours are rejected") {
    json doc = test::demo_json();
    doc["severity"] = {{"colors", {{"critical", {300, 0, 0}}}}};
    CHECK(pointer_of(doc) == "/severity/colors/critical/0");
}

TEST_CASE("defaults fill optional sections") {
    json doc = test::demo_json();
    doc.erase("camera");
    doc.erase("run");
    Scenario s = parse_scenario(doc);
    CHECK(s.camera.yaws == std::vector<double>{0, 45, 90, 135, 180, 225, 270, 315});
    CHECK(s.camera.hfov == 60.0);
    CHECK(s.run.queue_depth == 16);
    CHECK(s.run.cadence == 1.0);
}

}
