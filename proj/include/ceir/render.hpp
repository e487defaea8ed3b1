// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ceir/color_enhance.hpp"
#include "ceir/exploration.hpp"
#include "ceir/image.hpp"
#include "ceir/intersect.hpp"
#include "ceir/parallel.hpp"

namespace ceir {

enum class ColorMode { mono, enhanced };

/// How hits on one surface are colored.
struct SurfaceStyle {
    ColorMode color = ColorMode::enhanced;
    Rgb mono_color{0.85, 0.85, 0.85};
    EnhanceParams params;
    SpeedColorMap map;

    static SurfaceStyle enhanced(const TransferFunctionDoc& tf, int m = 256) {
        SurfaceStyle s;
        s.params = tf.params;
        s.map = build_speed_color_map(tf.local, m, tf.params.alpha_form);
        return s;
    }
    static SurfaceStyle monotone(double iso, Rgb color = {0.85, 0.85, 0.85}) {
        SurfaceStyle s;
        s.color = ColorMode::mono;
        s.mono_color = color;
        s.params.isovalue = iso;
        return s;
    }
};

struct RenderOptions {
    std::optional<CropBounds> crop;
    const PeelBuffer* peel = nullptr;
    const SeedSets* seeds = nullptr;
    std::vector<Light> lights = default_lights();
    ShadeParams shading;
    bool shade = true;
    Rgb background{0.0, 0.0, 0.0};
    unsigned workers = 0;
};

struct RenderOutput {
    Image image;
    VoxelIdBuffer ids;
    PixelPlane<std::uint8_t> structures;
    PixelPlane<double> depth;  // ray parameter of the hit, NaN on a miss

    explicit RenderOutput(ImageDims dims)
        : image(dims),
          ids(dims, kMissId),
          structures(dims, 0),
          depth(dims, std::numeric_limits<double>::quiet_NaN()) {}

    bool hit_at(int x, int y) const { return ids.at(x, y) != kMissId; }
};

/// Material color of a hit before shading.
inline Rgb surface_material(const ScalarVolume& vol, const Hit& hit, const Ray& ray, const SurfaceStyle& style,
                            const Vec3d& gradient) {
    if (style.color == ColorMode::mono) return style.mono_color;
    const double rate = style.params.mode == RateMode::deep ? rate_deep(vol, hit, ray, style.params)
                                                            : rate_shallow(gradient, ray.dir);
    return lookup_color(style.map, rate / style.params.density_factor());
}

/// Shared per-pixel loop. `surface_of(cell, id)` picks the isovalue per cell, `style_of(structure_id)`
/// returns the SurfaceStyle used to color hits of that structure.
template <class SurfaceOf, class StyleOf>
RenderOutput render_surfaces(const ScalarVolume& vol, const Camera& cam, const RenderOptions& opt,
                             SurfaceOf&& surface_of, StyleOf&& style_of, std::optional<IsoSpan> span = std::nullopt) {
    const CameraRig rig(cam);
    const CropBounds crop = opt.crop.value_or(CropBounds::full(vol));
    crop.validate(vol);
    if (opt.peel && !(opt.peel->dims() == cam.image)) throw ConfigError("peel buffer size differs from image");
    RenderOutput out(cam.image);
    parallel_tiles(
        cam.image,
        [&](int x0, int y0, int x1, int y1) {
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    const Ray ray = rig.ray(x, y);
                    const int skip = opt.peel ? opt.peel->at(x, y) : 0;
                    const auto hit = find_crossing(ray, vol, crop, skip, surface_of, span);
                    if (!hit) {
                        out.image.at(x, y) = opt.background;
                        continue;
                    }
                    const SurfaceStyle& style = style_of(hit->structure_id);
                    const Vec3d grad = gradient_central(vol, hit->position);
                    Rgb c = surface_material(vol, *hit, ray, style, grad);
                    if (opt.seeds && !opt.seeds->empty()) c = selection_color(hit->cell_id, *opt.seeds, c);
                    if (opt.shade) c = shade(c, grad, opt.lights, ray, opt.shading);
                    out.image.at(x, y) = clamp01(c);
                    out.ids.at(x, y) = hit->cell_id;
                    out.structures.at(x, y) = static_cast<std::uint8_t>(hit->structure_id);
                    out.depth.at(x, y) = hit->t;
                }
        },
        opt.workers);
    return out;
}

/// Single-isosurface rendering (monotone or color enhanced).
inline RenderOutput render_isosurface(const ScalarVolume& vol, const Camera& cam, const SurfaceStyle& style,
                                      const RenderOptions& opt = {}) {
    const double iso = style.params.isovalue;
    return render_surfaces(
        vol, cam, opt, [iso](const Vec3i&, std::int64_t) { return std::optional<CellSurface>({iso, 0}); },
        [&style](int) -> const SurfaceStyle& { return style; }, IsoSpan{iso, iso});
}

}  // namespace ceir
