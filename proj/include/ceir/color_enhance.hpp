// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "ceir/intersect.hpp"
#include "ceir/transfer_function.hpp"

namespace ceir {

constexpr double kRateFloor = 1e-6;
constexpr double kSpeedAtInfinity = 1e6;

/// Alpha of one of the n samples spanning the transition, for a ray crossing it at `speed`.
/// Each sample covers (delta_l / n) / std_sample_distance = 1 / (n * speed) reference lengths.
inline double per_sample_alpha(double alpha_t, double speed, int n, AlphaForm form = AlphaForm::opacity) {
    if (!(speed > 0.0)) throw ContractViolation("speed must be > 0");
    if (n < 1) throw ContractViolation("n must be >= 1");
    const double exponent = 1.0 / (n * speed);
    if (form == AlphaForm::literal) return std::pow(alpha_t, exponent);
    if (alpha_t >= 1.0) return 1.0;
    return 1.0 - std::pow(1.0 - alpha_t, exponent);
}

/// Front-to-back blend of the corrected entries, nearest first.
inline Rgb accumulate_color(const LocalTransferFunction& tf, double speed, AlphaForm form = AlphaForm::opacity) {
    const int n = static_cast<int>(tf.size());
    Rgb acc;
    double transmittance = 1.0;
    for (const auto& e : tf.entries) {
        const double a = per_sample_alpha(e.alpha, speed, n, form);
        acc += e.color * (a * transmittance);
        transmittance *= 1.0 - a;
        if (transmittance <= 0.0) break;
    }
    return acc;
}

/// Log-sampled speed -> accumulated color table. Entry j (1-based) holds the color at
/// speed -ln(1 - j/m); entry m stands in for infinite speed.
class SpeedColorMap {
public:
    SpeedColorMap() = default;
    explicit SpeedColorMap(std::vector<Rgb> colors) : colors_(std::move(colors)) {}

    int size() const { return static_cast<int>(colors_.size()); }
    const Rgb& entry(int j) const { return colors_.at(static_cast<std::size_t>(j - 1)); }
    const std::vector<Rgb>& colors() const { return colors_; }

    static double speed_of(int j, int m) {
        return j >= m ? kSpeedAtInfinity : -std::log(1.0 - static_cast<double>(j) / m);
    }

    int index_of(double speed) const {
        const int m = size();
        const double j = std::round(m * (1.0 - std::exp(-speed)));
        return std::clamp(static_cast<int>(j), 1, m);
    }

    bool operator==(const SpeedColorMap&) const = default;

private:
    std::vector<Rgb> colors_;
};

inline SpeedColorMap build_speed_color_map(const LocalTransferFunction& tf, int m,
                                           AlphaForm form = AlphaForm::opacity) {
    if (m < 2) throw ConfigError("speed-color map size must be >= 2");
    std::vector<Rgb> colors(static_cast<std::size_t>(m));
    for (int j = 1; j <= m; ++j) colors[j - 1] = clamp01(accumulate_color(tf, SpeedColorMap::speed_of(j, m), form));
    return SpeedColorMap(std::move(colors));
}

inline Rgb lookup_color(const SpeedColorMap& map, double speed) {
    if (!(speed > 0.0)) throw ContractViolation("speed must be > 0");
    return map.entry(map.index_of(speed));
}

inline double rate_shallow(const Vec3d& gradient, const Vec3d& ray_dir) {
    return std::max(std::abs(dot(gradient, ray_dir)), kRateFloor);
}

/// Marches from the hit until the field reaches iso + delta_v and returns delta_v / delta_l.
/// Never reaching it (or leaving the volume) clamps delta_l to deep_max_steps * deep_step.
inline double rate_deep(const ScalarVolume& vol, const Hit& hit, const Ray& ray, const EnhanceParams& params) {
    const double step = params.resolved_deep_step(vol);
    const double target = params.isovalue + params.delta_v;
    double delta_l = params.deep_max_steps * step;
    double prev = sample_trilinear(vol, hit.position);
    for (int k = 1; k <= params.deep_max_steps; ++k) {
        const Vec3d p = hit.position + ray.dir * (k * step);
        if (!vol.contains(p)) break;
        const double v = sample_trilinear(vol, p);
        if (v >= target) {
            const double frac = v > prev ? std::clamp((target - prev) / (v - prev), 0.0, 1.0) : 1.0;
            delta_l = (k - 1 + frac) * step;
            break;
        }
        prev = v;
    }
    return std::max(params.delta_v / std::max(delta_l, 1e-300), kRateFloor);
}

struct Light {
    Vec3d direction{0.0, 0.0, -1.0};  // from the surface toward the light
    Rgb color{1.0, 1.0, 1.0};
    bool headlight = false;           // follows the viewing ray when set
};

struct ShadeParams {
    double ambient = 0.15;
    double diffuse = 0.7;
    double specular = 0.15;
    double shininess = 32.0;
};

inline std::vector<Light> default_lights() { return {Light{{0.0, 0.0, -1.0}, {1.0, 1.0, 1.0}, true}}; }

/// Blinn-Phong with the outward normal -grad(v) flipped toward the viewer.
inline Rgb shade(const Rgb& material, const Vec3d& gradient, const std::vector<Light>& lights, const Ray& ray,
                 const ShadeParams& sp = {}) {
    Rgb out = material * sp.ambient;
    const double glen = length(gradient);
    if (glen == 0.0) return clamp01(out);
    Vec3d n = -gradient / glen;
    const Vec3d view = -ray.dir;
    if (dot(n, view) < 0.0) n = -n;
    for (const auto& light : lights) {
        const Vec3d l = light.headlight ? view : normalize(light.direction);
        const double ndotl = dot(n, l);
        if (ndotl <= 0.0) continue;
        const Vec3d h = normalize(l + view);
        const double spec = std::pow(std::max(dot(n, h), 0.0), sp.shininess);
        out += material * light.color * (sp.diffuse * ndotl) + light.color * (sp.specular * spec);
    }
    return clamp01(out);
}

}  // namespace ceir
