#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptwin/image.h"
#include "ptwin/view.h"

namespace ptwin {

struct SceneFrame {
    std::string camera_id;
    double yaw = 0.0;    // degrees, [0, 360)
    double pitch = 0.0;  // 0 on the rotating rig
    double hfov = 60.0;  // degrees, (0, 180)
    Image image;
    double captured_at = 0.0;

    // Throws MalformedImage for an empty raster and InvariantViolation for
    // out-of-range angles.
    void validate() const;
};

// Colour written to panorama pixels no frame reaches.
constexpr Rgb kUncoveredColor{255, 0, 255};
constexpr int kDefaultPanoramaHeight = 512;

struct Panorama {
    Image image;                        // width == 2 * height
    std::vector<std::uint8_t> coverage; // per column, 1 when any frame contributes
    std::vector<std::uint8_t> pixel_mask;  // per pixel, 1 when sampled from a frame
    double composed_at = 0.0;

    bool column_covered(int column) const { return coverage[column] != 0; }
    bool pixel_covered(int x, int y) const {
        return pixel_mask[static_cast<std::size_t>(y) * image.width() + x] != 0;
    }
    bool fully_covered() const;

    // Throws InvariantViolation when W != 2H or the masks do not match.
    void validate() const;
};

// Per-column blend weights: (frame index, weight) for every frame whose
// horizontal field of view contains the column's yaw. Weights are linear in
// angular distance to the frame centre and sum to 1.
std::vector<std::pair<std::size_t, double>> column_weights(std::span<const SceneFrame> frames,
                                                           double column_yaw);

// Pinhole-to-equirectangular composition. Pure: the result depends only on
// the set of frames, not their order.
Panorama compose_panorama(std::span<const SceneFrame> frames, int height = kDefaultPanoramaHeight);

// Perspective view by spherical lookup with bilinear sampling over covered
// texels. Throws UncoveredRegion when a view ray lands in uncovered columns;
// rays inside covered columns but outside the captured band get the sentinel.
Image extract_view(const Panorama& panorama, const ViewPose& pose);

// Seam for alternative scene synthesis (radiance-field models and the like).
class SynthesisBackend {
public:
    virtual ~SynthesisBackend() = default;
    virtual std::string name() const = 0;
    virtual Panorama compose(std::span<const SceneFrame> frames, int height) const = 0;
};

class PanoramaBackend : public SynthesisBackend {
public:
    std::string name() const override { return "panorama"; }
    Panorama compose(std::span<const SceneFrame> frames, int height) const override {
        return compose_panorama(frames, height);
    }
};

// "panorama" is the only built-in; anything else throws BackendUnavailable.
std::unique_ptr<SynthesisBackend> make_backend(std::string_view name);

// Runs a backend and enforces the panorama contract on its output.
Panorama compose_with(const SynthesisBackend& backend, std::span<const SceneFrame> frames, int height);

// Latest frame per (camera id, yaw), recomposed lazily on the next read.
class FrameStore {
public:
    explicit FrameStore(std::unique_ptr<SynthesisBackend> backend,
                        int panorama_height = kDefaultPanoramaHeight);

    struct Ack {
        std::string camera_id;
        double yaw = 0.0;
        std::size_t frames = 0;  // distinct (camera, yaw) slots held
        bool replaced = false;
    };
    Ack ingest(SceneFrame frame);

    std::vector<SceneFrame> frames() const;

    // Current panorama and its version, recomposing if frames changed.
    // Returns {nullptr, 0} before any frame arrives.
    std::pair<std::shared_ptr<const Panorama>, std::uint64_t> panorama();
    std::uint64_t version();

private:
    std::unique_ptr<SynthesisBackend> backend_;
    int height_;
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, double>, SceneFrame> frames_;
    bool dirty_ = false;
    std::shared_ptr<const Panorama> current_;
    std::uint64_t version_ = 0;
};

// Procedural plant-factory cylinder seen from its axis.
struct CylinderScene {
    double radius = 4.0;
    double half_height = 2.0;
};

Rgb cylinder_texture(const CylinderScene& scene, double azimuth_deg, double height);
Image render_cylinder_frame(const CylinderScene& scene, double yaw, double pitch, double hfov,
                            int width, int height);

}  // namespace ptwin
