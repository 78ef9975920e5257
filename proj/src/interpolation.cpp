#include "ptwin/interpolation.h"

#include <algorithm>
#include <cmath>

#include "ptwin/error.h"

namespace ptwin {

Interpolated inverse_distance(std::span<const SensorSample> samples, Vec3 query, double power,
                              double exact_hit) {
    if (samples.empty()) throw Error(ErrorCode::NoSensorsOfKind, "no samples to interpolate");

    std::vector<const SensorSample*> ordered;
    ordered.reserve(samples.size());
    for (const auto& s : samples) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const SensorSample* a, const SensorSample* b) { return a->sensor_id < b->sensor_id; });

    const SensorSample* hit = nullptr;
    double hit_distance = exact_hit;
    for (const auto* s : ordered) {
        double d = distance(s->position, query);
        if (d <= exact_hit && (hit == nullptr || d < hit_distance)) {
            hit = s;
            hit_distance = d;
        }
    }
    if (hit != nullptr) return {hit->value, {{hit->sensor_id, 1.0}}};

    std::vector<double> raw(ordered.size());
    double total = 0.0;
    double lo = ordered.front()->value;
    double hi = lo;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        double d = distance(ordered[i]->position, query);
        raw[i] = 1.0 / std::pow(d, power);
        total += raw[i];
        lo = std::min(lo, ordered[i]->value);
        hi = std::max(hi, ordered[i]->value);
    }

    Interpolated out;
    out.contributing.reserve(ordered.size());
    double value = 0.0;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        double w = raw[i] / total;
        value += w * ordered[i]->value;
        out.contributing.emplace_back(ordered[i]->sensor_id, w);
    }
    // Rounding in the weighted sum can step an ulp outside the sample range.
    out.value = std::clamp(value, lo, hi);
    return out;
}

}  // namespace ptwin
