#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptwin/geometry.h"

namespace ptwin {

struct SensorSample {
    std::string sensor_id;
    Vec3 position;
    double value = 0.0;
};

struct Interpolated {
    double value = 0.0;
    // (sensor id, normalized weight), sorted by sensor id; weights sum to 1.
    std::vector<std::pair<std::string, double>> contributing;
};

constexpr double kIdwPower = 2.0;
constexpr double kExactHitRadius = 1e-6;

// Shepard inverse-distance weighting over every sample. A sample within
// exact_hit metres of the query is returned directly (nearest wins, then
// smallest id). Samples are processed in id order so the result does not
// depend on input order. Precondition: samples non-empty.
Interpolated inverse_distance(std::span<const SensorSample> samples, Vec3 query,
                              double power = kIdwPower, double exact_hit = kExactHitRadius);

}  // namespace ptwin
