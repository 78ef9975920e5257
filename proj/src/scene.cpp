#include "ptwin/scene.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptwin/error.h"

namespace ptwin {
namespace {

constexpr double kYawTolerance = 1e-9;

double normalize_yaw(double yaw) {
    double y = std::fmod(yaw, 360.0);
    if (y < 0.0) y += 360.0;
    if (y >= 360.0) y -= 360.0;
    return y;
}

struct Accum {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    void add(Rgb c, double w) {
        r += w * c.r;
        g += w * c.g;
        b += w * c.b;
    }
};

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

Accum bilinear(const Image& img, double x, double y) {
    double sx = std::clamp(x - 0.5, 0.0, static_cast<double>(img.width() - 1));
    double sy = std::clamp(y - 0.5, 0.0, static_cast<double>(img.height() - 1));
    int x0 = static_cast<int>(sx);
    int y0 = static_cast<int>(sy);
    int x1 = std::min(x0 + 1, img.width() - 1);
    int y1 = std::min(y0 + 1, img.height() - 1);
    double fx = sx - x0;
    double fy = sy - y0;
    Accum a;
    a.add(img.at(x0, y0), (1 - fx) * (1 - fy));
    a.add(img.at(x1, y0), fx * (1 - fy));
    a.add(img.at(x0, y1), (1 - fx) * fy);
    a.add(img.at(x1, y1), fx * fy);
    return a;
}

struct FrameProjector {
    ViewBasis basis;
    double focal;
    double half_w;
    double half_h;

    explicit FrameProjector(const SceneFrame& f)
        : basis(view_basis(f.yaw, f.pitch)),
          focal(0.5 * f.image.width() / std::tan(deg_to_rad(f.hfov) * 0.5)),
          half_w(0.5 * f.image.width()),
          half_h(0.5 * f.image.height()) {}

    // Frame pixel coordinates of a direction; false when outside the frame.
    bool project(Vec3 d, double& x, double& y) const {
        double zc = dot(d, basis.forward);
        if (zc <= 0.0) return false;
        x = half_w + focal * dot(d, basis.right) / zc;
        y = half_h - focal * dot(d, basis.up) / zc;
        return x >= 0.0 && x <= 2.0 * half_w && y >= 0.0 && y <= 2.0 * half_h;
    }
};

std::vector<SceneFrame> canonical_order(std::span<const SceneFrame> frames) {
    if (frames.empty()) throw Error(ErrorCode::EmptyFrameSet, "no frames to compose");
    std::vector<SceneFrame> sorted(frames.begin(), frames.end());
    for (auto& f : sorted) {
        f.validate();
        f.yaw = normalize_yaw(f.yaw);
    }
    std::sort(sorted.begin(), sorted.end(), [](const SceneFrame& a, const SceneFrame& b) {
        return a.yaw != b.yaw ? a.yaw < b.yaw : a.camera_id < b.camera_id;
    });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (std::abs(sorted[i].yaw - sorted[i - 1].yaw) <= kYawTolerance) {
            throw Error(ErrorCode::DuplicateYaw,
                        "two frames share yaw " + std::to_string(sorted[i].yaw));
        }
    }
    if (sorted.size() > 1 && std::abs(sorted.back().yaw - 360.0 - sorted.front().yaw) <= kYawTolerance) {
        throw Error(ErrorCode::DuplicateYaw, "two frames share yaw 0");
    }
    return sorted;
}

}  // namespace

void SceneFrame::validate() const {
    if (image.empty()) throw Error(ErrorCode::MalformedImage, "frame image has zero dimension");
    if (image.bytes().size() != static_cast<std::size_t>(image.width()) * image.height() * 3) {
        throw Error(ErrorCode::MalformedImage, "frame raster size does not match dimensions");
    }
    if (!(hfov > 0.0 && hfov < 180.0)) {
        throw Error(ErrorCode::InvariantViolation, "frame hfov must lie in (0, 180)");
    }
    if (!std::isfinite(yaw) || !(pitch > -90.0 && pitch < 90.0)) {
        throw Error(ErrorCode::InvariantViolation, "frame yaw/pitch out of range");
    }
}

bool Panorama::fully_covered() const {
    return std::all_of(coverage.begin(), coverage.end(), [](std::uint8_t c) { return c != 0; });
}

void Panorama::validate() const {
    if (image.empty() || image.width() != 2 * image.height()) {
        throw Error(ErrorCode::InvariantViolation, "panorama must satisfy W = 2H");
    }
    if (coverage.size() != static_cast<std::size_t>(image.width()) ||
        pixel_mask.size() != static_cast<std::size_t>(image.width()) * image.height()) {
        throw Error(ErrorCode::InvariantViolation, "panorama coverage masks do not match raster");
    }
}

std::vector<std::pair<std::size_t, double>> column_weights(std::span<const SceneFrame> frames,
                                                           double column_yaw) {
    std::vector<std::pair<std::size_t, double>> out;
    double total = 0.0;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        double half = 0.5 * frames[k].hfov;
        double offset = std::abs(wrap_degrees(column_yaw - frames[k].yaw));
        if (offset < half) {
            out.emplace_back(k, half - offset);
            total += half - offset;
        }
    }
    for (auto& [k, w] : out) w /= total;
    return out;
}

Panorama compose_panorama(std::span<const SceneFrame> input, int height) {
    if (height <= 0) throw Error(ErrorCode::InvariantViolation, "panorama height must be positive");
    std::vector<SceneFrame> frames = canonical_order(input);
    std::vector<FrameProjector> projectors;
    projectors.reserve(frames.size());
    for (const auto& f : frames) projectors.emplace_back(f);

    const int width = 2 * height;
    Panorama pano;
    pano.image = Image(width, height, kUncoveredColor);
    pano.coverage.assign(width, 0);
    pano.pixel_mask.assign(static_cast<std::size_t>(width) * height, 0);
    pano.composed_at = 0.0;
    for (const auto& f : frames) pano.composed_at = std::max(pano.composed_at, f.captured_at);

    for (int c = 0; c < width; ++c) {
        Angles col = angles_from_equirect({c + 0.5, 0.0}, width, height);
        auto weights = column_weights(frames, col.yaw);
        if (weights.empty()) continue;
        pano.coverage[c] = 1;
        for (int r = 0; r < height; ++r) {
            Angles a = angles_from_equirect({c + 0.5, r + 0.5}, width, height);
            Vec3 d = direction_from_angles(col.yaw, a.pitch);
            Accum acc;
            double total = 0.0;
            for (const auto& [k, w] : weights) {
                double x = 0.0;
                double y = 0.0;
                if (!projectors[k].project(d, x, y)) continue;
                Accum s = bilinear(frames[k].image, x, y);
                acc.r += w * s.r;
                acc.g += w * s.g;
                acc.b += w * s.b;
                total += w;
            }
            if (total <= 0.0) continue;
            pano.image.set(c, r, {to_byte(acc.r / total), to_byte(acc.g / total), to_byte(acc.b / total)});
            pano.pixel_mask[static_cast<std::size_t>(r) * width + c] = 1;
        }
    }
    return pano;
}

Image extract_view(const Panorama& pano, const ViewPose& pose) {
    pose.validate();
    pano.validate();
    const int pw = pano.image.width();
    const int ph = pano.image.height();
    // Wrapping first makes yaw and yaw + 360 produce the same basis bit for bit.
    ViewBasis basis = view_basis(wrap_degrees(pose.yaw), pose.pitch);
    double focal = focal_length_px(pose.vfov, pose.height);

    Image out(pose.width, pose.height);
    for (int j = 0; j < pose.height; ++j) {
        for (int i = 0; i < pose.width; ++i) {
            Vec3 d = basis.forward * focal + basis.right * (i + 0.5 - 0.5 * pose.width) +
                     basis.up * (0.5 * pose.height - (j + 0.5));
            EquirectPoint p = equirect_from_angles(angles_from_direction(d), pw, ph);
            double sx = p.u - 0.5;
            double sy = std::clamp(p.v - 0.5, 0.0, static_cast<double>(ph - 1));
            double fx0 = std::floor(sx);
            int x0 = static_cast<int>(fx0);
            int y0 = static_cast<int>(sy);
            double fx = sx - fx0;
            double fy = sy - y0;
            int xs[2] = {((x0 % pw) + pw) % pw, (((x0 + 1) % pw) + pw) % pw};
            int ys[2] = {y0, std::min(y0 + 1, ph - 1)};
            double wx[2] = {1.0 - fx, fx};
            double wy[2] = {1.0 - fy, fy};
            Accum acc;
            double total = 0.0;
            for (int a = 0; a < 2; ++a) {
                for (int b = 0; b < 2; ++b) {
                    double w = wx[a] * wy[b];
                    if (w <= 0.0 || !pano.pixel_covered(xs[a], ys[b])) continue;
                    acc.add(pano.image.at(xs[a], ys[b]), w);
                    total += w;
                }
            }
            if (total <= 0.0) {
                // Rows above or below the captured band inside covered columns show the sentinel.
                bool column_hit = (wx[0] > 0.0 && pano.column_covered(xs[0])) ||
                                  (wx[1] > 0.0 && pano.column_covered(xs[1]));
                if (!column_hit) {
                    throw Error(ErrorCode::UncoveredRegion, "view window reaches uncovered panorama columns");
                }
                out.set(i, j, kUncoveredColor);
                continue;
            }
            out.set(i, j, {to_byte(acc.r / total), to_byte(acc.g / total), to_byte(acc.b / total)});
        }
    }
    return out;
}

std::unique_ptr<SynthesisBackend> make_backend(std::string_view name) {
    if (name == "panorama") return std::make_unique<PanoramaBackend>();
    throw Error(ErrorCode::BackendUnavailable, "synthesis backend '" + std::string(name) + "' is not available");
}

Panorama compose_with(const SynthesisBackend& backend, std::span<const SceneFrame> frames, int height) {
    Panorama p = backend.compose(frames, height);
    p.validate();
    return p;
}

FrameStore::FrameStore(std::unique_ptr<SynthesisBackend> backend, int panorama_height)
    : backend_(std::move(backend)), height_(panorama_height) {
    if (!backend_) throw Error(ErrorCode::BackendUnavailable, "no synthesis backend");
}

FrameStore::Ack FrameStore::ingest(SceneFrame frame) {
    frame.validate();
    frame.yaw = normalize_yaw(frame.yaw);
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(frame.camera_id, frame.yaw);
    bool replaced = frames_.count(key) > 0;
    Ack ack{frame.camera_id, frame.yaw, 0, replaced};
    frames_[key] = std::move(frame);
    ack.frames = frames_.size();
    dirty_ = true;
    return ack;
}

std::vector<SceneFrame> FrameStore::frames() const {
    std::lock_guard lock(mutex_);
    std::vector<SceneFrame> out;
    for (const auto& [key, f] : frames_) out.push_back(f);
    return out;
}

std::pair<std::shared_ptr<const Panorama>, std::uint64_t> FrameStore::panorama() {
    std::lock_guard lock(mutex_);
    if (dirty_) {
        std::vector<SceneFrame> list;
        list.reserve(frames_.size());
        for (const auto& [key, f] : frames_) list.push_back(f);
        current_ = std::make_shared<const Panorama>(compose_with(*backend_, list, height_));
        ++version_;
        dirty_ = false;
    }
    return {current_, version_};
}

std::uint64_t FrameStore::version() { return panorama().second; }

Rgb cylinder_texture(const CylinderScene& scene, double azimuth_deg, double height) {
    double a = deg_to_rad(azimuth_deg);
    double z = height / scene.half_height;
    double r = 95.0 + 55.0 * std::sin(3.0 * a + 1.0) + 15.0 * z;
    double g = 120.0 + 70.0 * std::sin(6.0 * a) * std::cos(1.5 * z);
    double b = 110.0 + 50.0 * std::cos(5.0 * a + 2.0 * z);
    return {to_byte(r), to_byte(g), to_byte(b)};
}

Image render_cylinder_frame(const CylinderScene& scene, double yaw, double pitch, double hfov,
                            int width, int height) {
    Image img(width, height);
    ViewBasis basis = view_basis(yaw, pitch);
    double focal = 0.5 * width / std::tan(deg_to_rad(hfov) * 0.5);
    for (int j = 0; j < height; ++j) {
        for (int i = 0; i < width; ++i) {
            Vec3 d = basis.forward * focal + basis.right * (i + 0.5 - 0.5 * width) +
                     basis.up * (0.5 * height - (j + 0.5));
            double horiz = std::hypot(d.x, d.y);
            double azimuth = rad_to_deg(std::atan2(d.y, d.x));
            double z = d.z * scene.radius / std::max(horiz, 1e-12);
            if (std::abs(z) <= scene.half_height) {
                img.set(i, j, cylinder_texture(scene, azimuth, z));
                continue;
            }
            // Floor or ceiling disc.
            double rho = scene.half_height * horiz / std::abs(d.z) / scene.radius;
            double shade = d.z < 0.0 ? 70.0 : 170.0;
            img.set(i, j, {to_byte(shade + 40.0 * rho), to_byte(shade - 10.0 + 30.0 * rho),
                           to_byte(shade - 20.0 + 20.0 * rho)});
        }
    }
    return img;
}

}  // namespace ptwin
