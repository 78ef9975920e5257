#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ptwin/farm_sim.h"
#include "ptwin/geometry.h"
#include "ptwin/image.h"
#include "ptwin/view.h"

namespace ptwin {

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
};

struct TargetRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct InteractableObject {
    std::string id;
    std::string label;
    Box bounds;
    std::vector<std::string> linked_sensors;
    std::vector<std::string> linked_actuators;
    std::map<FieldKind, TargetRange> target_ranges;
};

enum class SeverityLevel { none, warning, critical };

std::string_view to_string(SeverityLevel level);
std::optional<SeverityLevel> parse_severity_level(std::string_view name);

struct Severity {
    SeverityLevel level = SeverityLevel::none;
    Rgb color;
    double deviation = 0.0;  // max relative excursion; <= 0 when all values are in range
};

// Thresholds on relative excursion and the level -> colour map.
struct SeverityPolicy {
    double warning_above = 0.0;
    double critical_above = 0.25;
    Rgb none_color{0, 170, 0};
    Rgb warning_color{255, 170, 0};
    Rgb critical_color{220, 0, 0};

    Rgb color(SeverityLevel level) const;
    SeverityLevel classify(double deviation) const;
};

enum class HighlightMode { normal, active, issue };

struct HighlightState {
    HighlightMode mode = HighlightMode::normal;
    SeverityLevel severity = SeverityLevel::none;  // meaningful only for issue

    friend bool operator==(const HighlightState&, const HighlightState&) = default;
};

std::string_view to_string(HighlightMode mode);

enum class HighlightEventKind { hover_on, hover_off, issue_raised, issue_cleared };

struct HighlightEvent {
    HighlightEventKind kind = HighlightEventKind::hover_on;
    SeverityLevel severity = SeverityLevel::none;  // for issue_raised

    static HighlightEvent hover_on() { return {HighlightEventKind::hover_on}; }
    static HighlightEvent hover_off() { return {HighlightEventKind::hover_off}; }
    static HighlightEvent issue_raised(SeverityLevel s) { return {HighlightEventKind::issue_raised, s}; }
    static HighlightEvent issue_cleared() { return {HighlightEventKind::issue_cleared}; }
};

// Ray through the viewport point (u, v) in [0,1]^2, (0,0) top-left, for a
// pinhole at camera_pos oriented by the pose.
Ray ray_from_view(Vec3 camera_pos, const ViewPose& pose, double u, double v);

// Slab test. Smallest t >= 0 at which the ray is inside the box; 0 when the
// origin is already inside.
std::optional<double> intersect_box(const Ray& ray, const Box& bounds);

// Nearest hit; equal distances resolve to the lexicographically smallest id.
std::optional<std::string> pick(const Ray& ray, std::span<const InteractableObject> objects);

// Throws MissingTargetRange for a value whose kind has no range.
Severity compute_severity(const InteractableObject& object, const std::map<FieldKind, double>& values,
                          const SeverityPolicy& policy = {});

// Issue dominates active dominates normal. issue_raised(none) clears.
HighlightState highlight_transition(HighlightState state, HighlightEvent event);

}  // namespace ptwin
