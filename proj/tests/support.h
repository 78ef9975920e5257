#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <atomic>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <string>

#include <json.hpp>

#include "oracles.h"
#include "ptwin/http.h"
#include "ptwin/interaction.h"
#include "ptwin/scenario.h"

namespace ptwin::test {

inline std::string source_path(const std::string& relative) {
    return std::string(PTWIN_SOURCE_DIR) + "/" + relative;
}

inline Scenario demo_scenario() { return load_scenario(source_path("scenarios/demo.json")); }

inline nlohmann::json demo_json() {
    std::ifstream in(source_path("scenarios/demo.json"));
    return nlohmann::json::parse(in);
}

// Stand-in IoT server. Answers every call with a canned 200 unless a fault
// is queued, and counts calls per path.
class FakeIot : public Transport {
public:
    enum class Fault { drop, not_found, unprocessable };

    HttpResponse send(const HttpRequest& request) override {
        std::lock_guard lock(mutex_);
        ++calls_;
        ++by_path_[request.path];
        log_.push_back(request);
        if (!faults_.empty()) {
            Fault f = faults_.front();
            faults_.pop_front();
            if (f == Fault::drop) throw TransportError("injected drop");
            if (f == Fault::not_found) {
                return {404, R"({"code":"UnknownActuator","message":"no such actuator"})", "application/json"};
            }
            return {422, R"({"code":"InvalidDirective","message":"bad directive"})", "application/json"};
        }
        if (request.path == "/v1/devices") return {200, R"({"sensors":[],"actuators":[]})", "application/json"};
        if (request.path == "/v1/interpolate") {
            return {200, R"({"value":21.0,"contributing":[]})", "application/json"};
        }
        if (request.path == "/v1/readings") return {200, R"({"readings":[]})", "application/json"};
        std::string id = request.path.substr(std::string("/v1/actuators/").size());
        id = id.substr(0, id.find('/'));
        nlohmann::json body = nlohmann::json::parse(request.body);
        return {200,
                nlohmann::json{{"actuator_id", id}, {"applied_mode", body.value("mode", "off")}, {"at", 0.0}}.dump(),
                "application/json"};
    }

    void inject(Fault f) {
        std::lock_guard lock(mutex_);
        faults_.push_back(f);
    }
    int calls() const {
        std::lock_guard lock(mutex_);
        return calls_;
    }
    int calls_to(const std::string& path) const {
        std::lock_guard lock(mutex_);
        auto it = by_path_.find(path);
        return it == by_path_.end() ? 0 : it->second;
    }
    std::vector<HttpRequest> log() const {
        std::lock_guard lock(mutex_);
        return log_;
    }

private:
    mutable std::mutex mutex_;
    int calls_ = 0;
    std::map<std::string, int> by_path_;
    std::deque<Fault> faults_;
    std::vector<HttpRequest> log_;
};

// One randomized picking instance: a ray and 1..100 boxes, some of them
// containing the ray origin or sharing faces.
struct PickInstance {
    Ray ray;
    std::vector<InteractableObject> objects;
    std::vector<oracle::Box> boxes;
};

inline PickInstance random_pick_instance(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coord(-10.0, 10.0);
    std::uniform_real_distribution<double> size(0.1, 4.0);
    std::uniform_int_distribution<int> count(1, 100);
    std::uniform_int_distribution<int> shape(0, 9);
    PickInstance inst;
    Vec3 origin{coord(rng), coord(rng), coord(rng)};
    Vec3 dir;
    do {
        dir = {coord(rng), coord(rng), coord(rng)};
        // Axis-aligned and planar rays exercise the zero-component branch.
        int s = shape(rng);
        if (s == 0) dir.y = dir.z = 0.0;
        if (s == 1) dir.z = 0.0;
    } while (norm(dir) < 1e-3);
    inst.ray = {origin, normalized(dir)};
    int n = count(rng);
    for (int i = 0; i < n; ++i) {
        Vec3 lo{coord(rng), coord(rng), coord(rng)};
        if (shape(rng) == 0) lo = origin - Vec3{0.5, 0.5, 0.5};
        Vec3 hi = lo + Vec3{size(rng), size(rng), size(rng)};
        char id[16];
        std::snprintf(id, sizeof id, "obj-%03d", static_cast<int>(rng() % 1000));
        inst.objects.push_back({id, id, {lo, hi}, {}, {}, {}});
        inst.boxes.push_back({id, lo, hi});
    }
    return inst;
}

}  // namespace ptwin::test
