// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "ceir/isoseg.hpp"
#include "ceir/scene.hpp"
#include "ceir/synthetic.hpp"
#include "test_support.hpp"

namespace ceir {
namespace {

using testing::phantom;

const std::filesystem::path kDemos = CEIR_DEMO_DIR;

TEST(Bake, WritesIdsAndLaterBakesWin) {
    LabelVolume l({2, 2, 2});
    l = bake_structure(l, {0, 1, 2}, 3);
    l = bake_structure(l, {2, 7}, 200);
    EXPECT_EQ(l.data(), (std::vector<std::uint8_t>{3, 3, 200, 0, 0, 0, 0, 200}));
    const auto h = l.histogram();
    EXPECT_EQ(h[0], 4);
    EXPECT_EQ(h[3], 2);
    EXPECT_EQ(h[200], 2);
    EXPECT_THROW(bake_structure(l, {0}, 0), ConfigError);
    EXPECT_THROW(bake_structure(l, {0}, 256), ConfigError);
    EXPECT_THROW(bake_structure(l, {8}, 1), std::out_of_range);
    EXPECT_THROW(LabelVolume({2, 2, 2}, std::vector<std::uint8_t>(7)), FormatError);
}

Camera front(int n) {
    Camera c;
    c.eye = {0.5, 0.5, -1.4};
    c.look_at = {0.5, 0.5, 0.5};
    c.vfov_deg = 40;
    c.image = {n, n};
    return c;
}

Scene empty_scene(const ScalarVolume& vol) {
    Scene s;
    s.volume = std::make_shared<const ScalarVolume>(vol);
    s.labels = std::make_shared<const LabelVolume>(vol.cell_dims());
    s.camera = front(48);
    return s;
}

TEST(RenderScene, UnlabeledVolumeIsEmpty) {
    const auto vol = phantom(PhantomKind::sphere, 32);
    const Scene s = empty_scene(vol);
    RenderOptions opt;
    opt.background = {0.2, 0.1, 0.0};
    const auto out = render_scene(s, opt);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) {
            ASSERT_EQ(out.ids.at(x, y), kMissId);
            ASSERT_EQ(out.image.at(x, y), opt.background);
        }
}

TEST(RenderScene, ValidatesLabelsAndDims) {
    const auto vol = phantom(PhantomKind::sphere, 16);
    Scene s = empty_scene(vol);
    s.labels = std::make_shared<const LabelVolume>(bake_structure(LabelVolume(vol.cell_dims()), {5}, 4));
    EXPECT_THROW(render_scene(s), ConfigError);
    s.labels = std::make_shared<const LabelVolume>(Vec3i{3, 3, 3});
    EXPECT_THROW(render_scene(s), ConfigError);
}

std::vector<std::int64_t> iso_cells(const ScalarVolume& vol, double iso, double x_lo, double x_hi) {
    std::vector<std::int64_t> out;
    const Vec3i cd = vol.cell_dims();
    const double s = vol.spacing().x;
    for (int z = 0; z < cd.z; ++z)
        for (int y = 0; y < cd.y; ++y)
            for (int x = 0; x < cd.x; ++x)
                if (x * s >= x_lo && (x + 1) * s <= x_hi && cell_contains_iso(vol, {x, y, z}, iso))
                    out.push_back(linear_cell_id({x, y, z}, cd));
    return out;
}

TEST(RenderScene, SingleStructureMatchesSingleIsosurface) {
    const auto vol = phantom(PhantomKind::sphere, 48);
    const auto tf = load_tf(kDemos / "tf_warm.json");
    Scene s = empty_scene(vol);
    s.camera = camera_from_json(read_json_file(kDemos / "camera_oblique.json"));
    s.camera.image = {80, 80};
    s.labels = std::make_shared<const LabelVolume>(
        bake_structure(LabelVolume(vol.cell_dims()), iso_cells(vol, tf.params.isovalue, 0, 2), 1));
    s.structures.emplace(1, SurfaceStructure::make(1, tf.params.isovalue, tf));
    const auto scene = render_scene(s);
    const auto single = render_isosurface(vol, s.camera, SurfaceStyle::enhanced(tf));
    EXPECT_EQ(scene.image.pixels(), single.image.pixels());
    EXPECT_EQ(scene.ids, single.ids);
}

// Radius where the phantom profile of a sphere with radius r and width w reaches `iso`.
double analytic_radius(double r, double w, double iso) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double x = 0.5 * (lo + hi);
        (x * x * (3 - 2 * x) < iso ? lo : hi) = x;
    }
    return r - (lo - 0.5) * w;
}

TEST(RenderScene, TwoStructuresSitOnTheirOwnSurfaces) {
    const auto vol = phantom(PhantomKind::two_spheres, 64);
    const auto red = load_tf(kDemos / "tf_red.json");
    const auto blue = load_tf(kDemos / "tf_blue.json");
    Scene s = empty_scene(vol);
    s.camera = front(96);
    LabelVolume l(vol.cell_dims());
    l = bake_structure(l, iso_cells(vol, 0.5, 0, 0.5), 1);
    l = bake_structure(l, iso_cells(vol, 0.35, 0.5, 1), 2);
    s.labels = std::make_shared<const LabelVolume>(l);
    s.structures.emplace(1, SurfaceStructure::make(1, 0.5, red));
    s.structures.emplace(2, SurfaceStructure::make(2, 0.35, blue));
    RenderOptions opt;
    opt.shade = false;
    const auto out = render_scene(s, opt);
    const CameraRig rig(s.camera);
    const Vec3d ca{0.3, 0.5, 0.5}, cb{0.7, 0.5, 0.5};
    const double ra = analytic_radius(0.15, 0.08, 0.5), rb = analytic_radius(0.15, 0.08, 0.35);
    int na = 0, nb = 0;
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) {
            if (!out.hit_at(x, y)) continue;
            const Vec3d p = rig.ray(x, y).at(out.depth.at(x, y));
            const Rgb c = out.image.at(x, y);
            if (out.structures.at(x, y) == 1) {
                ++na;
                ASSERT_NEAR(length(p - ca), ra, 1e-3);
                ASSERT_GT(c.r, c.b);
            } else {
                ASSERT_EQ(out.structures.at(x, y), 2);
                ++nb;
                ASSERT_NEAR(length(p - cb), rb, 1e-3);
                ASSERT_GT(c.b, c.r);
            }
        }
    EXPECT_GT(na, 300);
    EXPECT_GT(nb, na);  // the lower isovalue gives the larger sphere
}

TEST(SurfaceStructure, TableRowMatchesStandaloneBuild) {
    const auto tf = load_tf(kDemos / "tf_warm.json");
    for (int m : {16, 256}) {
        const auto s = SurfaceStructure::make(7, 0.42, tf, m);
        EXPECT_EQ(s.style.map, build_speed_color_map(tf.local, m));
        EXPECT_EQ(s.isovalue(), 0.42);
    }
    EXPECT_THROW(SurfaceStructure::make(0, 0.5, tf), ConfigError);
}

TEST(SceneFile, RoundTripRendersIdentically) {
    const auto vol = phantom(PhantomKind::two_spheres, 32);
    Scene s = empty_scene(vol);
    LabelVolume l(vol.cell_dims());
    l = bake_structure(l, iso_cells(vol, 0.5, 0, 0.5), 1);
    l = bake_structure(l, iso_cells(vol, 0.5, 0.5, 1), 2);
    s.labels = std::make_shared<const LabelVolume>(l);
    s.structures.emplace(1, SurfaceStructure::make(1, 0.5, load_tf(kDemos / "tf_red.json")));
    s.structures.emplace(2, SurfaceStructure::make(2, 0.45, load_tf(kDemos / "tf_blue.json")));
    s.crop = CropBounds{{0, 0, 0}, {31, 31, 20}};
    const auto dir = testing::temp_dir("scene_roundtrip");
    save_scene(s, dir, "pair");
    const Scene back = load_scene(dir / "pair.scene.json");
    EXPECT_EQ(*back.labels, *s.labels);
    ASSERT_EQ(back.structures.size(), 2u);
    EXPECT_EQ(back.structures.at(2).isovalue(), 0.45);
    ASSERT_TRUE(back.crop.has_value());
    EXPECT_EQ(back.crop->hi, s.crop->hi);
    EXPECT_TRUE(std::ranges::equal(back.volume->data(), s.volume->data()));
    EXPECT_EQ(render_scene(back).image.pixels(), render_scene(s).image.pixels());
}

TEST(SceneFile, MissingReferenceIsReported) {
    const auto dir = testing::temp_dir("scene_missing");
    std::ofstream(dir / "x.scene.json") << R"({"volume_ref":"nope.json","label_ref":"l.raw","structures":[]})";
    EXPECT_THROW(load_scene(dir / "x.scene.json"), Error);
    std::ofstream(dir / "y.scene.json") << R"({"label_ref":"l.raw"})";
    EXPECT_THROW(load_scene(dir / "y.scene.json"), ConfigError);
}

}  // namespace
}  // namespace ceir
