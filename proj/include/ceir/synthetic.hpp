// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "ceir/volume.hpp"

namespace ceir {

enum class PhantomKind { sphere, two_spheres, dumbbell, ramp, nested_spheres, shell_with_inclusions };

inline PhantomKind parse_phantom_kind(const std::string& s) {
    if (s == "sphere") return PhantomKind::sphere;
    if (s == "two-spheres") return PhantomKind::two_spheres;
    if (s == "dumbbell") return PhantomKind::dumbbell;
    if (s == "ramp") return PhantomKind::ramp;
    if (s == "nested-spheres") return PhantomKind::nested_spheres;
    if (s == "shell-with-inclusions") return PhantomKind::shell_with_inclusions;
    throw ConfigError("unknown phantom kind '" + s + "'");
}

inline const char* phantom_kind_name(PhantomKind k) {
    switch (k) {
        case PhantomKind::sphere: return "sphere";
        case PhantomKind::two_spheres: return "two-spheres";
        case PhantomKind::dumbbell: return "dumbbell";
        case PhantomKind::ramp: return "ramp";
        case PhantomKind::nested_spheres: return "nested-spheres";
        case PhantomKind::shell_with_inclusions: return "shell-with-inclusions";
    }
    return "?";
}

/// Phantom description. All phantoms use isotropic spacing 1/(max(dims)-1), so the
/// longest axis spans one world unit. `params` overrides the defaults positionally:
///
///   sphere                  cx cy cz r w                         (0.5 0.5 0.5 0.3 0.08)
///   two-spheres             ax ay az ar bx by bz br w            (0.3 .5 .5 .15  .7 .5 .5 .15  .08)
///   dumbbell                ax ay az bx by bz R neck_r w         (.25 .5 .5  .75 .5 .5  .18 .07 .08)
///   ramp                    axis                                 (2)
///   nested-spheres          cx cy cz r_outer r_inner w           (.5 .5 .5 .35 .2 .08)
///   shell-with-inclusions   cx cy cz R thickness peak w then (x y z r density)*
///                           (.5 .5 .5 .38 .04 .6 .02  .5 .5 .5 .12 1  .62 .5 .5 .06 .75)
///
/// Positions and lengths are fractions of the longest extent. `w` is the width of the
/// smooth 0..1 transition around each surface; every surface sits at scalar 0.5.
struct SyntheticSpec {
    PhantomKind kind = PhantomKind::sphere;
    Vec3i dims{64, 64, 64};
    std::vector<double> params;
};

namespace detail {

inline double smoothstep01(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

// Maps signed distance inside (>0) to a field crossing 0.5 exactly at the surface.
inline double profile(double inside_distance, double width) {
    return smoothstep01(0.5 + inside_distance / width);
}

inline std::vector<double> with_defaults(std::vector<double> defaults, const std::vector<double>& given) {
    if (given.size() > defaults.size()) defaults.resize(given.size());
    for (std::size_t i = 0; i < given.size(); ++i) defaults[i] = given[i];
    return defaults;
}

inline double segment_distance(const Vec3d& p, const Vec3d& a, const Vec3d& b, bool& inside_span) {
    const Vec3d ab = b - a;
    const double t = dot(p - a, ab) / dot(ab, ab);
    inside_span = t >= 0.0 && t <= 1.0;
    return length(p - (a + ab * std::clamp(t, 0.0, 1.0)));
}

}  // namespace detail

inline std::vector<double> phantom_params(const SyntheticSpec& spec) {
    using detail::with_defaults;
    switch (spec.kind) {
        case PhantomKind::sphere: return with_defaults({0.5, 0.5, 0.5, 0.3, 0.08}, spec.params);
        case PhantomKind::two_spheres:
            return with_defaults({0.3, 0.5, 0.5, 0.15, 0.7, 0.5, 0.5, 0.15, 0.08}, spec.params);
        case PhantomKind::dumbbell:
            return with_defaults({0.25, 0.5, 0.5, 0.75, 0.5, 0.5, 0.18, 0.07, 0.08}, spec.params);
        case PhantomKind::ramp: return with_defaults({2.0}, spec.params);
        case PhantomKind::nested_spheres: return with_defaults({0.5, 0.5, 0.5, 0.35, 0.2, 0.08}, spec.params);
        case PhantomKind::shell_with_inclusions:
            if (spec.params.size() > 7) return spec.params;
            return with_defaults({0.5, 0.5, 0.5, 0.38, 0.04, 0.6, 0.02, 0.5, 0.5, 0.5, 0.12, 1.0, 0.62, 0.5,
                                  0.5, 0.06, 0.75},
                                 spec.params);
    }
    throw ConfigError("unknown phantom kind");
}

/// Analytic field of the phantom at world position `p` for a volume whose longest extent is `L`.
inline double phantom_value(const SyntheticSpec& spec, const std::vector<double>& prm, const Vec3d& p,
                            const Vec3d& extent, double L) {
    using detail::profile;
    auto at = [&](std::size_t i) { return Vec3d{prm[i] * L, prm[i + 1] * L, prm[i + 2] * L}; };
    switch (spec.kind) {
        case PhantomKind::sphere: return profile(prm[3] * L - length(p - at(0)), prm[4] * L);
        case PhantomKind::two_spheres: {
            const double w = prm[8] * L;
            return std::max(profile(prm[3] * L - length(p - at(0)), w), profile(prm[7] * L - length(p - at(4)), w));
        }
        case PhantomKind::dumbbell: {
            const Vec3d a = at(0), b = at(3);
            const double w = prm[8] * L;
            double v = std::max(profile(prm[6] * L - length(p - a), w), profile(prm[6] * L - length(p - b), w));
            bool in_span = false;
            const double d = detail::segment_distance(p, a, b, in_span);
            if (in_span) v = std::max(v, profile(prm[7] * L - d, w));
            return v;
        }
        case PhantomKind::ramp: {
            const int axis = std::clamp(static_cast<int>(prm[0]), 0, 2);
            return p[axis] / extent[axis];
        }
        case PhantomKind::nested_spheres: {
            const double d = length(p - at(0)), w = prm[5] * L;
            return std::min(profile(prm[3] * L - d, w), profile(d - prm[4] * L, w));
        }
        case PhantomKind::shell_with_inclusions: {
            const double d = length(p - at(0));
            const double half = 0.5 * prm[4] * L, w = prm[6] * L;
            double v = prm[5] * profile(half - std::abs(d - prm[3] * L), w);
            for (std::size_t i = 7; i + 4 < prm.size(); i += 5)
                v = std::max(v, prm[i + 4] * profile(prm[i + 3] * L - length(p - at(i)), w));
            return std::clamp(v, 0.0, 1.0);
        }
    }
    return 0.0;
}

inline VolumeMeta phantom_meta(const Vec3i& dims) {
    VolumeMeta meta;
    meta.dims = dims;
    const double s = 1.0 / (std::max({dims.x, dims.y, dims.z}) - 1);
    meta.spacing = {s, s, s};
    meta.source_dtype = DType::f32le;
    meta.range_min = 0.0;
    meta.range_max = 1.0;
    return meta;
}

inline ScalarVolume generate_synthetic(const SyntheticSpec& spec) {
    const VolumeMeta meta = phantom_meta(spec.dims);
    meta.validate();
    const auto prm = phantom_params(spec);
    const Vec3d extent{(spec.dims.x - 1) * meta.spacing.x, (spec.dims.y - 1) * meta.spacing.y,
                       (spec.dims.z - 1) * meta.spacing.z};
    const double L = std::max({extent.x, extent.y, extent.z});
    std::vector<float> data(meta.point_count());
    std::size_t n = 0;
    for (int k = 0; k < spec.dims.z; ++k)
        for (int j = 0; j < spec.dims.y; ++j)
            for (int i = 0; i < spec.dims.x; ++i) {
                const Vec3d p{i * meta.spacing.x, j * meta.spacing.y, k * meta.spacing.z};
                data[n++] = static_cast<float>(phantom_value(spec, prm, p, extent, L));
            }
    return ScalarVolume(meta, std::move(data));
}

}  // namespace ceir
