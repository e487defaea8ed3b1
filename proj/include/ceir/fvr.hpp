// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "ceir/color_enhance.hpp"
#include "ceir/image.hpp"
#include "ceir/parallel.hpp"
#include "ceir/traversal.hpp"

namespace ceir {

struct Rgba {
    Rgb color;
    double alpha = 0.0;
};

/// One transitional section: transparent below the isovalue, opaque above isovalue + delta_v, and
/// in between a piecewise-linear blend of the local entries. Entry i sits at the center of the
/// i-th of n equal sub-ranges; the half sub-ranges at both ends hold the end entries.
struct TransitionalTF1D {
    double isovalue = 0.5;
    double delta_v = 0.1;
    LocalTransferFunction local;
    double std_sample_distance = 0.01;

    static TransitionalTF1D from(const TransferFunctionDoc& doc) {
        return {doc.params.isovalue, doc.params.delta_v, doc.local, doc.params.std_sample_distance};
    }
};

inline Rgba eval_tf(const TransitionalTF1D& tf, double v) {
    const auto& e = tf.local.entries;
    const int n = static_cast<int>(e.size());
    if (v < tf.isovalue) return {e.front().color, 0.0};
    if (v >= tf.isovalue + tf.delta_v) return {e.back().color, 1.0};
    const double pos = (v - tf.isovalue) / tf.delta_v * n - 0.5;
    if (pos <= 0.0) return {e.front().color, e.front().alpha};
    if (pos >= n - 1) return {e.back().color, e.back().alpha};
    const int i = static_cast<int>(pos);
    const double f = pos - i;
    return {e[i].color * (1.0 - f) + e[i + 1].color * f, e[i].alpha * (1.0 - f) + e[i + 1].alpha * f};
}

struct FvrOptions {
    std::optional<CropBounds> crop;
    Rgb background{0.0, 0.0, 0.0};
    bool shade = false;
    std::vector<Light> lights = default_lights();
    ShadeParams shading;
    double termination_alpha = 0.999;
    unsigned workers = 0;
};

/// Front-to-back emission-absorption compositing at uniform spacing `sample_dist`, with each
/// transfer alpha corrected from std_sample_distance to sample_dist in transparency form.
inline Rgb composite_ray(const ScalarVolume& vol, const Ray& ray, const TransitionalTF1D& tf, double sample_dist,
                         const CropBounds& crop, const FvrOptions& opt) {
    const Vec3d& s = vol.spacing();
    const auto clip = clip_ray_box(ray, {crop.lo.x * s.x, crop.lo.y * s.y, crop.lo.z * s.z},
                                   {crop.hi.x * s.x, crop.hi.y * s.y, crop.hi.z * s.z});
    if (!clip) return opt.background;
    const double exponent = sample_dist / tf.std_sample_distance;
    Rgb acc;
    double transmittance = 1.0;
    const auto samples = static_cast<long>(std::floor((clip->second - clip->first) / sample_dist));
    for (long k = 0; k <= samples; ++k) {
        const Vec3d p = ray.at(clip->first + k * sample_dist);
        const Rgba c = eval_tf(tf, sample_trilinear(vol, p));
        if (c.alpha <= 0.0) continue;
        const double a = c.alpha >= 1.0 ? 1.0 : 1.0 - std::pow(1.0 - c.alpha, exponent);
        Rgb color = c.color;
        if (opt.shade) color = shade(color, gradient_central(vol, p), opt.lights, ray, opt.shading);
        acc += color * (a * transmittance);
        transmittance *= 1.0 - a;
        if (1.0 - transmittance >= opt.termination_alpha) break;
    }
    return clamp01(acc + opt.background * transmittance);
}

inline Image render_fvr(const ScalarVolume& vol, const Camera& cam, const TransitionalTF1D& tf, double sample_dist,
                        const FvrOptions& opt = {}) {
    if (!(sample_dist > 0.0)) throw ConfigError("sample distance must be > 0");
    tf.local.validate();
    const CameraRig rig(cam);
    const CropBounds crop = opt.crop.value_or(CropBounds::full(vol));
    crop.validate(vol);
    Image img(cam.image);
    parallel_tiles(
        cam.image,
        [&](int x0, int y0, int x1, int y1) {
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) img.at(x, y) = composite_ray(vol, rig.ray(x, y), tf, sample_dist, crop, opt);
        },
        opt.workers);
    return img;
}

}  // namespace ceir
