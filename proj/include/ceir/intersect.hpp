// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>

#include "ceir/cubic.hpp"
#include "ceir/traversal.hpp"

namespace ceir {

struct Hit {
    double t = 0.0;
    Vec3d position;
    std::int64_t cell_id = 0;
    Vec3i cell;
    int crossings_skipped = 0;
    int structure_id = 0;
};

/// Isovalue a cell should be tested against, or nothing to skip the cell.
struct CellSurface {
    double iso = 0.5;
    int structure_id = 0;
};

/// Bounds on every isovalue `surface_of` can return; lets traversal skip blocks outside it.
struct IsoSpan {
    double lo = 0.0, hi = 1.0;
};

/// Four trilinear samples at the entry point, the two trisection points, and the exit point of
/// the ray segment inside the cell, fitted with an interpolating cubic.
inline CubicPoly fit_cell_cubic(const Ray& ray, const ScalarVolume& vol, const CellStep& st,
                                const std::array<double, 8>& corners) {
    const Vec3d& s = vol.spacing();
    double v[4];
    for (int k = 0; k < 4; ++k) {
        const double t = st.t_enter + (st.t_exit - st.t_enter) * (k / 3.0);
        const Vec3d p = ray.at(t);
        const double fx = std::clamp(p.x / s.x - st.cell.x, 0.0, 1.0);
        const double fy = std::clamp(p.y / s.y - st.cell.y, 0.0, 1.0);
        const double fz = std::clamp(p.z / s.z - st.cell.z, 0.0, 1.0);
        v[k] = trilinear_in_cell(corners, fx, fy, fz);
    }
    return cubic_from_samples(v[0], v[1], v[2], v[3]);
}

/// Walks the ray cell by cell and returns the (skip+1)-th isosurface crossing. `surface_of`
/// maps (cell index, linear id) to the isovalue to test, or nothing to skip that cell. Every
/// root counts as one crossing, including several roots inside one cell.
template <class SurfaceOf>
std::optional<Hit> find_crossing(const Ray& ray, const ScalarVolume& vol, const CropBounds& crop, int skip,
                                 SurfaceOf&& surface_of, std::optional<IsoSpan> span = std::nullopt) {
    const Vec3i cdims = vol.cell_dims();
    const double dedupe = 1e-9 * vol.cell_diagonal();
    double last_t = -std::numeric_limits<double>::infinity();
    int crossings = 0;
    std::optional<Hit> hit;
    auto visit = [&](const CellStep& st) {
        const std::int64_t id = st.cell.x + static_cast<std::int64_t>(cdims.x) *
                                                (st.cell.y + static_cast<std::int64_t>(cdims.y) * st.cell.z);
        const std::optional<CellSurface> surf = surface_of(st.cell, id);
        if (!surf) return true;
        const auto corners = vol.cell_corners(st.cell.x, st.cell.y, st.cell.z);
        double lo = corners[0], hi = corners[0];
        for (double c : corners) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        if (surf->iso < lo || surf->iso > hi) return true;
        const CubicPoly poly = fit_cell_cubic(ray, vol, st, corners);
        const RootList roots = all_roots(poly, surf->iso, 0.0, 1.0);
        for (double u : roots) {
            const double t = st.t_enter + u * (st.t_exit - st.t_enter);
            if (t <= last_t + dedupe) continue;
            last_t = t;
            if (crossings++ < skip) continue;
            hit = Hit{t, ray.at(t), id, st.cell, skip, surf->structure_id};
            return false;
        }
        return true;
    };
    if (span)
        for_each_cell(ray, vol, crop, visit,
                      [sp = *span](const ValueRange& r) { return !(sp.hi < r.lo || sp.lo > r.hi); });
    else
        for_each_cell(ray, vol, crop, visit);
    return hit;
}

inline std::optional<Hit> intersect_isosurface(const Ray& ray, const ScalarVolume& vol, double iso,
                                               const CropBounds& crop, int skip = 0) {
    if (skip < 0) throw ContractViolation("skip must be >= 0");
    return find_crossing(ray, vol, crop, skip,
                         [iso](const Vec3i&, std::int64_t) { return std::optional<CellSurface>({iso, 0}); },
                         IsoSpan{iso, iso});
}

}  // namespace ceir
