#include "ptwin/view.h"

#include <cmath>

#include "ptwin/error.h"

namespace ptwin {

void ViewPose::validate() const {
    if (!(vfov > 0.0 && vfov < 180.0)) {
        throw Error(ErrorCode::InvariantViolation, "vfov must lie in (0, 180)");
    }
    if (!(pitch >= -90.0 && pitch <= 90.0)) {
        throw Error(ErrorCode::InvariantViolation, "pitch must lie in [-90, 90]");
    }
    if (!std::isfinite(yaw)) throw Error(ErrorCode::InvariantViolation, "yaw must be finite");
    if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::InvariantViolation, "viewport must be non-empty");
    }
}

Vec3 direction_from_angles(double yaw_deg, double pitch_deg) {
    double yaw = deg_to_rad(yaw_deg);
    double pitch = deg_to_rad(pitch_deg);
    return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
}

Angles angles_from_direction(Vec3 d) {
    return {rad_to_deg(std::atan2(d.y, d.x)), rad_to_deg(std::atan2(d.z, std::hypot(d.x, d.y)))};
}

ViewBasis view_basis(double yaw_deg, double pitch_deg) {
    double yaw = deg_to_rad(yaw_deg);
    Vec3 forward = direction_from_angles(yaw_deg, pitch_deg);
    Vec3 right{std::sin(yaw), -std::cos(yaw), 0.0};
    return {forward, right, cross(right, forward)};
}

double focal_length_px(double vfov_deg, int height_px) {
    return 0.5 * height_px / std::tan(deg_to_rad(vfov_deg) * 0.5);
}

EquirectPoint equirect_from_angles(Angles a, int width, int height) {
    return {(a.yaw + 180.0) / 360.0 * width, (90.0 - a.pitch) / 180.0 * height};
}

Angles angles_from_equirect(EquirectPoint p, int width, int height) {
    return {p.u / width * 360.0 - 180.0, 90.0 - p.v / height * 180.0};
}

bool project_point(Vec3 eye, const ViewPose& pose, Vec3 point, double& px, double& py) {
    ViewBasis b = view_basis(pose.yaw, pose.pitch);
    Vec3 d = point - eye;
    double zc = dot(d, b.forward);
    if (zc <= 1e-9) return false;
    double f = focal_length_px(pose.vfov, pose.height);
    px = 0.5 * pose.width + f * dot(d, b.right) / zc;
    py = 0.5 * pose.height - f * dot(d, b.up) / zc;
    return true;
}

}  // namespace ptwin
