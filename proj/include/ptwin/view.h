#pragma once

#include "ptwin/geometry.h"

namespace ptwin {

// Yaw is counter-clockwise about +Z (up) from +X, pitch positive upward,
// both in degrees.
struct ViewPose {
    double yaw = 0.0;
    double pitch = 0.0;
    double vfov = 60.0;
    int width = 640;
    int height = 480;

    // Throws InvariantViolation unless 0 < vfov < 180, pitch in [-90, 90]
    // and the viewport is non-empty.
    void validate() const;
};

struct ViewBasis {
    Vec3 forward;
    Vec3 right;
    Vec3 up;
};

Vec3 direction_from_angles(double yaw_deg, double pitch_deg);

struct Angles {
    double yaw = 0.0;    // [-180, 180]
    double pitch = 0.0;  // [-90, 90]
};
Angles angles_from_direction(Vec3 direction);

ViewBasis view_basis(double yaw_deg, double pitch_deg);

// Pinhole focal length in pixels for a vertical field of view.
double focal_length_px(double vfov_deg, int height_px);

// Continuous equirectangular coordinates: u in [0, W), v in [0, H); pixel
// (c, r) has its centre at (c + 0.5, r + 0.5). Column 0 starts at yaw -180.
struct EquirectPoint {
    double u = 0.0;
    double v = 0.0;
};
EquirectPoint equirect_from_angles(Angles a, int width, int height);
Angles angles_from_equirect(EquirectPoint p, int width, int height);

// Screen-space projection of a world point through a pinhole at `eye`.
// Returns false when the point is behind the camera.
bool project_point(Vec3 eye, const ViewPose& pose, Vec3 point, double& px, double& py);

}  // namespace ptwin
