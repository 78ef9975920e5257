#include <cmath>

#include <doctest.h>

#include "ptwin/error.h"
#include "ptwin/farm_sim.h"

using namespace ptwin;

namespace {

FactoryConfig flat_config(double base = 22.0, Vec3 gradient = {}) {
    FactoryConfig c;
    c.extent = {10.0, 10.0, 3.0};
    c.tick_interval = 1.0;
    c.seed = 7;
    c.fields = {{FieldKind::temperature, base, gradient}, {FieldKind::humidity, 60.0, {}}};
    return c;
}

SimActuator heater(std::string id, Vec3 at, Directive d = Directive::off()) {
    SimActuator a;
    a.id = std::move(id);
    a.position = at;
    a.kind = ActuatorKind::heater;
    a.effect = {FieldKind::temperature, 0.5, 2.0};
    a.directive = d;
    return a;
}

}  // namespace

TEST_SUITE("farm_sim") {

TEST_CASE("noise-free sample of a uniform field") {
    World w(flat_config(), {});
    SensorMeta s{"t1", {3.0, 4.0, 1.0}, FieldKind::temperature, 0.0};
    CHECK(w.sample(s).value == 22.0);
    CHECK(w.sample(s).timestamp == 0.0);
}

TEST_CASE("gradient along x is evaluated in closed form") {
    World w(flat_config(20.0, {1.0, 0.0, 0.0}), {});
    SensorMeta s{"t1", {2.0, 5.0, 1.0}, FieldKind::temperature, 0.0};
    CHECK(std::abs(w.sample(s).value - 22.0) < 1e-9);
}

TEST_CASE("sampling outside the extent or an unconfigured kind fails") {
    World w(flat_config(), {});
    SensorMeta outside{"t1", {11.0, 1.0, 1.0}, FieldKind::temperature, 0.0};
    SensorMeta co2{"c1", {1.0, 1.0, 1.0}, FieldKind::co2, 0.0};
    try {
        w.sample(outside);
        FAIL("expected OutOfExtent");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OutOfExtent);
    }
    try {
        w.sample(co2);
        FAIL("expected UnknownFieldKind");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownFieldKind);
    }
}

TEST_CASE("heater on for 2 s raises its own position by at most 1 degree") {
    Vec3 at{1.0, 1.0, 1.0};
    World w(flat_config(), {heater("heater-1", at, Directive::on())});
    Vec3 far{1.0, 4.0, 1.0};  // 3 m away, radius is 2 m
    double before_at = w.field_value(FieldKind::temperature, at);
    double before_far = w.field_value(FieldKind::temperature, far);
    w.tick(2.0);
    double rise_at = w.field_value(FieldKind::temperature, at) - before_at;
    double rise_far = w.field_value(FieldKind::temperature, far) - before_far;
    CHECK(rise_at <= 1.0 + 1e-12);
    CHECK(rise_at > rise_far);
    CHECK(rise_far == 0.0);
}

TEST_CASE("off then on reports active at the next tick") {
    World w(flat_config(), {heater("heater-1", {1, 1, 1})});
    w.tick(1.0);
    CHECK_FALSE(w.actuator("heater-1").active);
    w.set_actuator("heater-1", Directive::on());
    CHECK_FALSE(w.actuator("heater-1").active);
    w.tick(1.0);
    CHECK(w.actuator("heater-1").active);
}

TEST_CASE("period 10 s on / 10 s off is active about half the time") {
    World w(flat_config(), {heater("heater-1", {1, 1, 1}, Directive::automatic(Period{10.0, 10.0}))});
    int active = 0;
    for (int i = 0; i < 100; ++i) {
        w.tick(1.0);
        active += w.actuator("heater-1").active ? 1 : 0;
    }
    double fraction = active / 100.0;
    CHECK(fraction >= 0.45);
    CHECK(fraction <= 0.55);
}

TEST_CASE("condition below 18 with a 25 degree field stays inactive") {
    Condition cold{FieldKind::temperature, Comparator::less, 18.0};
    World w(flat_config(25.0), {heater("heater-1", {1, 1, 1}, Directive::automatic(cold))});
    for (int i = 0; i < 5; ++i) {
        w.tick(1.0);
        CHECK_FALSE(w.actuator("heater-1").active);
    }
}

TEST_CASE("unknown actuator and malformed directives are rejected") {
    World w(flat_config(), {heater("heater-1", {1, 1, 1})});
    try {
        w.set_actuator("ghost-9", Directive::on());
        FAIL("expected UnknownActuator");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownActuator);
    }
    Directive both{ActuatorMode::automatic, Condition{}, Period{1.0, 1.0}};
    Directive neither{ActuatorMode::automatic, {}, {}};
    Directive on_with_period{ActuatorMode::on, {}, Period{1.0, 1.0}};
    Directive bad_period = Directive::automatic(Period{0.0, 5.0});
    for (const auto& d : {both, neither, on_with_period, bad_period}) {
        try {
            w.set_actuator("heater-1", d);
            FAIL("expected InvalidDirective");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidDirective);
        }
    }
}

TEST_CASE("perturbation is exactly zero at and beyond the decay radius") {
    CHECK(radial_falloff(2.0, 2.0) == 0.0);
    CHECK(radial_falloff(5.0, 2.0) == 0.0);
    CHECK(radial_falloff(0.0, 2.0) == 1.0);
    CHECK(std::abs(radial_falloff(1.0, 2.0) - 0.5625) < 1e-15);

    World w(flat_config(), {heater("heater-1", {5, 5, 1}, Directive::on())});
    for (int i = 0; i < 10; ++i) w.tick(1.0);
    for (double d : {2.0, 2.5, 4.0}) {
        CHECK(w.field_value(FieldKind::temperature, {5.0 + d, 5.0, 1.0}) == 22.0);
    }
}

TEST_CASE("with everything off, perturbations shrink monotonically toward baseline") {
    World w(flat_config(), {heater("a", {2, 2, 1}), heater("b", {7, 7, 1})});
    w.set_perturbation("a", 6.0);
    w.set_perturbation("b", -3.0);
    double prev_a = 6.0;
    double prev_b = 3.0;
    for (int i = 0; i < 200; ++i) {
        w.tick(1.0);
        double pa = std::abs(w.actuator("a").perturbation);
        double pb = std::abs(w.actuator("b").perturbation);
        CHECK(pa < prev_a);
        CHECK(pb < prev_b);
        prev_a = pa;
        prev_b = pb;
    }
    // 30 s half-life.
    World h(flat_config(), {heater("a", {2, 2, 1})});
    h.set_perturbation("a", 8.0);
    for (int i = 0; i < 30; ++i) h.tick(1.0);
    CHECK(std::abs(h.actuator("a").perturbation - 4.0) < 1e-9);
}

TEST_CASE("saturation caps the accumulated perturbation") {
    SimActuator a = heater("a", {2, 2, 1}, Directive::on());
    a.effect.saturation = 3.0;
    World w(flat_config(), {a});
    for (int i = 0; i < 20; ++i) w.tick(1.0);
    CHECK(w.actuator("a").perturbation == 3.0);
}

TEST_CASE("identical configs and command traces give identical serialized states") {
    auto run = [] {
        World w(flat_config(), {heater("a", {2, 2, 1}), heater("b", {7, 7, 1}, Directive::on())});
        std::vector<std::string> states;
        for (int i = 0; i < 50; ++i) {
            if (i == 10) w.set_actuator("a", Directive::automatic(Period{3.0, 2.0}));
            if (i == 25) w.set_actuator("b", Directive::off());
            w.tick(0.5);
            states.push_back(w.serialize());
        }
        return states;
    };
    CHECK(run() == run());
}

TEST_CASE("sensor noise is seeded and repeatable") {
    CHECK(seeded_gaussian(1, "t1", 3) == seeded_gaussian(1, "t1", 3));
    CHECK(seeded_gaussian(1, "t1", 3) != seeded_gaussian(1, "t1", 4));
    CHECK(seeded_gaussian(1, "t1", 3) != seeded_gaussian(1, "t2", 3));
    CHECK(seeded_gaussian(1, "t1", 3) != seeded_gaussian(2, "t1", 3));

    double sum = 0.0;
    double sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double g = seeded_gaussian(11, "probe", static_cast<std::uint64_t>(i));
        sum += g;
        sq += g * g;
    }
    double mean = sum / n;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.05);
}

TEST_CASE("farm sim publishes immutable snapshots") {
    FarmSim sim(World(flat_config(), {heater("a", {2, 2, 1}, Directive::on())}));
    auto before = sim.snapshot();
    sim.tick();
    auto after = sim.snapshot();
    CHECK(before->now() == 0.0);
    CHECK(after->now() == 1.0);
    CHECK(before->actuator("a").perturbation == 0.0);
    CHECK(after->actuator("a").perturbation == 0.5);
}

TEST_CASE("tick requires positive dt") {
    World w(flat_config(), {});
    CHECK_THROWS_AS(w.tick(0.0), Error);
    CHECK_THROWS_AS(w.tick(-1.0), Error);
}

}
