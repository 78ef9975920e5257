#include <cmath>
#include <random>

#include <doctest.h>

#include "ptwin/error.h"
#include "ptwin/scene.h"
#include "support.h"

using namespace ptwin;

namespace {

constexpr int kFrameW = 160;
constexpr int kFrameH = 120;

SceneFrame cylinder_frame(double yaw, double hfov = 60.0, const std::string& camera = "rig-0") {
    SceneFrame f;
    f.camera_id = camera;
    f.yaw = yaw;
    f.hfov = hfov;
    f.image = render_cylinder_frame(CylinderScene{}, yaw, 0.0, hfov, kFrameW, kFrameH);
    return f;
}

SceneFrame solid_frame(double yaw, Rgb c) {
    SceneFrame f;
    f.camera_id = "rig-0";
    f.yaw = yaw;
    f.hfov = 60.0;
    f.image = Image(kFrameW, kFrameH, c);
    return f;
}

std::vector<SceneFrame> sweep() {
    std::vector<SceneFrame> out;
    for (int k = 0; k < 8; ++k) out.push_back(cylinder_frame(45.0 * k));
    return out;
}

// Vertical field of view of a frame with the given hfov and aspect.
double frame_vfov(double hfov, int w, int h) {
    return 2.0 * rad_to_deg(std::atan(std::tan(deg_to_rad(hfov) / 2.0) * h / w));
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::InvariantViolation;
}

}  // namespace

TEST_SUITE("scene") {

TEST_CASE("equirectangular mapping round trips") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> yaw(-179.9, 179.9);
    std::uniform_real_distribution<double> pitch(-85.0, 85.0);
    for (int k = 0; k < 2000; ++k) {
        Angles a{yaw(rng), pitch(rng)};
        Vec3 d = direction_from_angles(a.yaw, a.pitch);
        EquirectPoint p = equirect_from_angles(angles_from_direction(d), 1024, 512);
        Vec3 back = direction_from_angles(angles_from_equirect(p, 1024, 512).yaw,
                                          angles_from_equirect(p, 1024, 512).pitch);
        CHECK(std::acos(std::clamp(dot(d, back), -1.0, 1.0)) < 1e-6);
    }
    CHECK(equirect_from_angles({-180.0, 0.0}, 1024, 512).u == 0.0);
    CHECK(equirect_from_angles({0.0, 0.0}, 1024, 512).u == 512.0);
    CHECK(equirect_from_angles({0.0, 90.0}, 1024, 512).v == 0.0);
}

TEST_CASE("8 frames at 45 degree spacing cover every column") {
    Panorama p = compose_panorama(sweep(), 256);
    CHECK(p.image.width() == 512);
    CHECK(p.fully_covered());
}

TEST_CASE("blend weights sum to 1 over contributing frames") {
    auto frames = sweep();
    for (double yaw = -180.0; yaw < 180.0; yaw += 0.37) {
        auto w = column_weights(frames, yaw);
        REQUIRE_FALSE(w.empty());
        double total = 0.0;
        for (const auto& [k, x] : w) total += x;
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("uniform colour frames compose to exactly that colour") {
    Rgb c{37, 201, 90};
    std::vector<SceneFrame> frames;
    for (int k = 0; k < 8; ++k) frames.push_back(solid_frame(45.0 * k, c));
    Panorama p = compose_panorama(frames, 128);
    int covered = 0;
    for (int y = 0; y < p.image.height(); ++y) {
        for (int x = 0; x < p.image.width(); ++x) {
            if (!p.pixel_covered(x, y)) continue;
            ++covered;
            CHECK(p.image.at(x, y) == c);
        }
    }
    CHECK(covered > 0);
}

TEST_CASE("single frame covers yaw -30..30 within one column") {
    std::vector<SceneFrame> one{cylinder_frame(0.0)};
    const int h = 512;
    const int w = 2 * h;
    Panorama p = compose_panorama(one, h);
    double col_deg = 360.0 / w;
    for (int c = 0; c < w; ++c) {
        double yaw = (c + 0.5) * col_deg - 180.0;
        if (std::abs(yaw) < 30.0 - col_deg) CHECK(p.column_covered(c));
        if (std::abs(yaw) > 30.0 + col_deg) CHECK_FALSE(p.column_covered(c));
        if (!p.column_covered(c)) CHECK(p.image.at(c, h / 2) == kUncoveredColor);
    }
}

TEST_CASE("compose is independent of input order") {
    auto frames = sweep();
    Panorama a = compose_panorama(frames, 128);
    std::mt19937_64 rng(4);
    std::shuffle(frames.begin(), frames.end(), rng);
    Panorama b = compose_panorama(frames, 128);
    CHECK(a.image == b.image);
    CHECK(a.coverage == b.coverage);
}

TEST_CASE("frame set errors") {
    std::vector<SceneFrame> none;
    CHECK(code_of([&] { compose_panorama(none, 64); }) == ErrorCode::EmptyFrameSet);
    std::vector<SceneFrame> dup{cylinder_frame(45.0), cylinder_frame(45.0, 60.0, "rig-1")};
    CHECK(code_of([&] { compose_panorama(dup, 64); }) == ErrorCode::DuplicateYaw);
    std::vector<SceneFrame> wrap{cylinder_frame(0.0), cylinder_frame(360.0, 60.0, "rig-1")};
    CHECK(code_of([&] { compose_panorama(wrap, 64); }) == ErrorCode::DuplicateYaw);
    SceneFrame empty = cylinder_frame(0.0);
    empty.image = Image();
    CHECK(code_of([&] { empty.validate(); }) == ErrorCode::MalformedImage);
}

TEST_CASE("centre pixel of a view equals the panorama at the pose direction") {
    const int h = 256;
    Image img(2 * h, h, Rgb{10, 10, 10});
    Panorama p;
    p.image = img;
    p.coverage.assign(2 * h, 1);
    p.pixel_mask.assign(static_cast<std::size_t>(2 * h) * h, 1);
    // Paint the texels around yaw 0, pitch 0 red.
    for (int y = h / 2 - 3; y < h / 2 + 3; ++y) {
        for (int x = h - 3; x < h + 3; ++x) p.image.set(x, y, {255, 0, 0});
    }
    ViewPose pose{0.0, 0.0, 60.0, 33, 33};
    Image v = extract_view(p, pose);
    CHECK(v.at(16, 16) == Rgb{255, 0, 0});
}

TEST_CASE("yaw and yaw + 360 extract identical rasters") {
    Panorama p = compose_panorama(sweep(), 256);
    for (double yaw : {0.0, 17.5, -123.0, 179.0}) {
        ViewPose a{yaw, 5.0, 40.0, 64, 48};
        ViewPose b = a;
        b.yaw += 360.0;
        ViewPose c = a;
        c.yaw -= 720.0;
        CHECK(extract_view(p, a) == extract_view(p, b));
        CHECK(extract_view(p, a) == extract_view(p, c));
    }
}

TEST_CASE("views reaching uncovered columns fail") {
    std::vector<SceneFrame> one{cylinder_frame(0.0)};
    Panorama p = compose_panorama(one, 256);
    CHECK(code_of([&] { extract_view(p, {180.0, 0.0, 30.0, 32, 24}); }) == ErrorCode::UncoveredRegion);
    CHECK(code_of([&] { extract_view(p, {25.0, 0.0, 30.0, 32, 24}); }) == ErrorCode::UncoveredRegion);
    CHECK_NOTHROW(extract_view(p, {0.0, 0.0, 30.0, 32, 24}));
}

TEST_CASE("rows above the captured band inside covered columns show the sentinel") {
    Panorama p = compose_panorama(sweep(), 256);
    Image v = extract_view(p, {0.0, 60.0, 20.0, 16, 16});
    CHECK(v.at(8, 8) == kUncoveredColor);
}

TEST_CASE("extract_view only reads texels inside the view footprint") {
    Panorama p = compose_panorama(sweep(), 256);
    ViewPose pose{30.0, 0.0, 30.0, 64, 48};
    Image reference = extract_view(p, pose);

    // Texels reached by any bilinear lookup of the view, found by probing.
    std::vector<std::uint8_t> used(static_cast<std::size_t>(p.image.width()) * p.image.height(), 0);
    ViewBasis basis = view_basis(pose.yaw, pose.pitch);
    double f = focal_length_px(pose.vfov, pose.height);
    for (int j = 0; j < pose.height; ++j) {
        for (int i = 0; i < pose.width; ++i) {
            Vec3 d = basis.forward * f + basis.right * (i + 0.5 - 0.5 * pose.width) +
                     basis.up * (0.5 * pose.height - (j + 0.5));
            EquirectPoint e = equirect_from_angles(angles_from_direction(d), p.image.width(), p.image.height());
            int x0 = static_cast<int>(std::floor(e.u - 0.5));
            int y0 = static_cast<int>(std::floor(e.v - 0.5));
            for (int dy = 0; dy <= 1; ++dy) {
                for (int dx = 0; dx <= 1; ++dx) {
                    int x = ((x0 + dx) % p.image.width() + p.image.width()) % p.image.width();
                    int y = std::clamp(y0 + dy, 0, p.image.height() - 1);
                    used[static_cast<std::size_t>(y) * p.image.width() + x] = 1;
                }
            }
        }
    }
    std::mt19937 rng(8);
    std::uniform_int_distribution<int> byte(0, 255);
    Panorama noisy = p;
    for (int y = 0; y < p.image.height(); ++y) {
        for (int x = 0; x < p.image.width(); ++x) {
            if (used[static_cast<std::size_t>(y) * p.image.width() + x]) continue;
            noisy.image.set(x, y, {static_cast<std::uint8_t>(byte(rng)), static_cast<std::uint8_t>(byte(rng)),
                                   static_cast<std::uint8_t>(byte(rng))});
        }
    }
    CHECK(extract_view(noisy, pose) == reference);
}

TEST_CASE("single-frame round trip stays within 3/255") {
    SceneFrame frame = cylinder_frame(0.0);
    std::vector<SceneFrame> one{frame};
    Panorama p = compose_panorama(one, 512);
    ViewPose pose{0.0, 0.0, frame_vfov(60.0, kFrameW, kFrameH), kFrameW, kFrameH};
    Image back = extract_view(p, pose);
    CHECK(mean_abs_error(back, frame.image) < 3.0);
}

TEST_CASE("golden fixtures") {
    Image golden_frame = read_image_file(test::source_path("tests/golden/frame_yaw000.ppm"));
    Image golden_pano = read_image_file(test::source_path("tests/golden/panorama.ppm"));
    SceneFrame frame = cylinder_frame(0.0);
    CHECK(mean_abs_error(frame.image, golden_frame) < 0.5);

    SceneFrame from_golden;
    from_golden.camera_id = "rig-0";
    from_golden.image = golden_frame;
    std::vector<SceneFrame> one{from_golden};
    Panorama p = compose_panorama(one, golden_pano.height());
    CHECK(mean_abs_error(p.image, golden_pano) < 0.5);

    ViewPose pose{0.0, 0.0, frame_vfov(60.0, golden_frame.width(), golden_frame.height()), golden_frame.width(),
                  golden_frame.height()};
    CHECK(mean_abs_error(extract_view(p, pose), golden_frame) < 3.0);
}

TEST_CASE("backend seam") {
    auto frames = sweep();
    auto backend = make_backend("panorama");
    CHECK(backend->name() == "panorama");
    CHECK(compose_with(*backend, frames, 128).image == compose_panorama(frames, 128).image);
    CHECK(code_of([] { make_backend("nerfies"); }) == ErrorCode::BackendUnavailable);

    struct Squashed : SynthesisBackend {
        std::string name() const override { return "squashed"; }
        Panorama compose(std::span<const SceneFrame> f, int h) const override {
            Panorama p = compose_panorama(f, h);
            p.image = Image(h, h);
            return p;
        }
    };
    CHECK(code_of([&] { compose_with(Squashed{}, frames, 64); }) == ErrorCode::InvariantViolation);
}

TEST_CASE("frame store keeps the latest frame per yaw") {
    FrameStore store(make_backend("panorama"), 128);
    CHECK(store.panorama().first == nullptr);
    CHECK(store.version() == 0);
    SceneFrame a = solid_frame(45.0, {1, 2, 3});
    SceneFrame b = solid_frame(45.0, {4, 5, 6});
    CHECK_FALSE(store.ingest(a).replaced);
    CHECK(store.version() == 1);
    FrameStore::Ack ack = store.ingest(b);
    CHECK(ack.replaced);
    CHECK(ack.frames == 1);
    auto [pano, version] = store.panorama();
    CHECK(version == 2);
    CHECK(pano->image.at(160, 64) == Rgb{4, 5, 6});

    for (const auto& f : sweep()) store.ingest(f);
    CHECK(store.frames().size() == 8);
    CHECK(store.panorama().first->fully_covered());
    CHECK(store.version() == 3);
}

}
