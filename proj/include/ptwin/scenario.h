#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ptwin/farm_sim.h"
#include "ptwin/interaction.h"
#include "ptwin/scene.h"

namespace ptwin {

struct CameraConfig {
    Vec3 position;
    std::vector<double> yaws{0, 45, 90, 135, 180, 225, 270, 315};
    double hfov = 60.0;
    int frame_width = 160;
    int frame_height = 120;
    int panorama_height = kDefaultPanoramaHeight;
    std::string backend = "panorama";
    CylinderScene cylinder;
};

struct RunParams {
    double cadence = 1.0;       // simulated seconds between snapshots
    int iot_port = 8081;
    int interface_port = 8082;
    std::size_t queue_depth = 16;
    double time_scale = 1.0;    // simulated seconds per wall second in `run`
};

struct Scenario {
    FactoryConfig factory;
    std::vector<SensorMeta> sensors;
    std::vector<SimActuator> actuators;
    std::vector<InteractableObject> objects;
    SeverityPolicy severity;
    CameraConfig camera;
    RunParams run;

    const InteractableObject* object(const std::string& id) const;
};

// Throws Error(InvalidScenario) with where() set to a JSON pointer naming the
// offending field. Unknown keys are rejected.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

}  // namespace ptwin
