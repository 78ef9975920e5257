#include "ptwin/interaction.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ptwin/error.h"

namespace ptwin {

std::string_view to_string(SeverityLevel level) {
    switch (level) {
    case SeverityLevel::none: return "none";
    case SeverityLevel::warning: return "warning";
    case SeverityLevel::critical: return "critical";
    }
    return "?";
}

std::optional<SeverityLevel> parse_severity_level(std::string_view name) {
    for (auto level : {SeverityLevel::none, SeverityLevel::warning, SeverityLevel::critical}) {
        if (to_string(level) == name) return level;
    }
    return std::nullopt;
}

std::string_view to_string(HighlightMode mode) {
    switch (mode) {
    case HighlightMode::normal: return "normal";
    case HighlightMode::active: return "active";
    case HighlightMode::issue: return "issue";
    }
    return "?";
}

Rgb SeverityPolicy::color(SeverityLevel level) const {
    switch (level) {
    case SeverityLevel::none: return none_color;
    case SeverityLevel::warning: return warning_color;
    case SeverityLevel::critical: return critical_color;
    }
    return none_color;
}

SeverityLevel SeverityPolicy::classify(double deviation) const {
    if (deviation > critical_above) return SeverityLevel::critical;
    if (deviation > warning_above) return SeverityLevel::warning;
    return SeverityLevel::none;
}

Ray ray_from_view(Vec3 camera_pos, const ViewPose& pose, double u, double v) {
    ViewBasis b = view_basis(pose.yaw, pose.pitch);
    double half_h = std::tan(deg_to_rad(pose.vfov) * 0.5);
    double aspect = static_cast<double>(pose.width) / pose.height;
    double x = (2.0 * u - 1.0) * half_h * aspect;
    double y = (1.0 - 2.0 * v) * half_h;
    if (x == 0.0 && y == 0.0) return {camera_pos, b.forward};
    return {camera_pos, normalized(b.forward + b.right * x + b.up * y)};
}

std::optional<double> intersect_box(const Ray& ray, const Box& bounds) {
    double t_enter = 0.0;
    double t_exit = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
        double o = ray.origin[axis];
        double d = ray.direction[axis];
        double lo = bounds.min[axis];
        double hi = bounds.max[axis];
        if (d == 0.0) {
            if (o < lo || o > hi) return std::nullopt;
            continue;
        }
        double inv = 1.0 / d;
        double t0 = (lo - o) * inv;
        double t1 = (hi - o) * inv;
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
        if (t_enter > t_exit) return std::nullopt;
    }
    return t_enter;
}

std::optional<std::string> pick(const Ray& ray, std::span<const InteractableObject> objects) {
    const InteractableObject* best = nullptr;
    double best_t = std::numeric_limits<double>::infinity();
    for (const auto& obj : objects) {
        auto t = intersect_box(ray, obj.bounds);
        if (!t) continue;
        if (*t < best_t || (*t == best_t && best != nullptr && obj.id < best->id)) {
            best = &obj;
            best_t = *t;
        }
    }
    if (best == nullptr) return std::nullopt;
    return best->id;
}

Severity compute_severity(const InteractableObject& object, const std::map<FieldKind, double>& values,
                          const SeverityPolicy& policy) {
    double deviation = -std::numeric_limits<double>::infinity();
    for (const auto& [kind, v] : values) {
        auto it = object.target_ranges.find(kind);
        if (it == object.target_ranges.end()) {
            throw Error(ErrorCode::MissingTargetRange,
                        "object '" + object.id + "' has no target range for " + std::string(to_string(kind)));
        }
        double lo = it->second.lo;
        double hi = it->second.hi;
        double width = hi - lo;
        deviation = std::max({deviation, (lo - v) / width, (v - hi) / width});
    }
    if (values.empty()) deviation = 0.0;
    SeverityLevel level = policy.classify(deviation);
    return {level, policy.color(level), deviation};
}

HighlightState highlight_transition(HighlightState state, HighlightEvent event) {
    switch (event.kind) {
    case HighlightEventKind::hover_on:
        if (state.mode == HighlightMode::issue) return state;
        return {HighlightMode::active, SeverityLevel::none};
    case HighlightEventKind::hover_off:
        if (state.mode == HighlightMode::issue) return state;
        return {HighlightMode::normal, SeverityLevel::none};
    case HighlightEventKind::issue_raised:
        if (event.severity == SeverityLevel::none) {
            return highlight_transition(state, HighlightEvent::issue_cleared());
        }
        return {HighlightMode::issue, event.severity};
    case HighlightEventKind::issue_cleared:
        if (state.mode == HighlightMode::issue) return {HighlightMode::normal, SeverityLevel::none};
        return state;
    }
    return state;
}

}  // namespace ptwin
