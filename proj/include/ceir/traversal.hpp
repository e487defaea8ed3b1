// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "ceir/camera.hpp"
#include "ceir/volume.hpp"

namespace ceir {

/// Cell-index box, inclusive `lo`, exclusive `hi`.
struct CropBounds {
    Vec3i lo{0, 0, 0};
    Vec3i hi{0, 0, 0};

    static CropBounds full(const ScalarVolume& vol) { return {{0, 0, 0}, vol.cell_dims()}; }

    bool contains(const Vec3i& c) const {
        return c.x >= lo.x && c.y >= lo.y && c.z >= lo.z && c.x < hi.x && c.y < hi.y && c.z < hi.z;
    }
    std::int64_t cell_count() const {
        return static_cast<std::int64_t>(hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);
    }

    void validate(const ScalarVolume& vol) const {
        const Vec3i c = vol.cell_dims();
        for (int a = 0; a < 3; ++a)
            if (lo[a] < 0 || hi[a] > c[a] || lo[a] >= hi[a])
                throw ConfigError("crop bounds must satisfy 0 <= lo < hi <= cell dims");
    }

    bool operator==(const CropBounds&) const = default;
};

/// Parses "a,b,c:d,e,f".
inline CropBounds parse_crop(const std::string& s) {
    CropBounds c;
    int n = std::sscanf(s.c_str(), "%d,%d,%d:%d,%d,%d", &c.lo.x, &c.lo.y, &c.lo.z, &c.hi.x, &c.hi.y, &c.hi.z);
    if (n != 6) throw ConfigError("crop must look like a,b,c:d,e,f");
    return c;
}

struct CellStep {
    Vec3i cell;
    double t_enter = 0.0;
    double t_exit = 0.0;
};

inline std::int64_t linear_cell_id(const Vec3i& c, const Vec3i& cell_dims) {
    if (c.x < 0 || c.y < 0 || c.z < 0 || c.x >= cell_dims.x || c.y >= cell_dims.y || c.z >= cell_dims.z)
        throw ContractViolation("cell index out of range");
    return c.x + static_cast<std::int64_t>(cell_dims.x) * (c.y + static_cast<std::int64_t>(cell_dims.y) * c.z);
}

inline Vec3i cell_index_from_id(std::int64_t id, const Vec3i& cell_dims) {
    const std::int64_t plane = static_cast<std::int64_t>(cell_dims.x) * cell_dims.y;
    if (id < 0 || id >= plane * cell_dims.z) throw ContractViolation("cell id out of range");
    return {static_cast<int>(id % cell_dims.x), static_cast<int>((id / cell_dims.x) % cell_dims.y),
            static_cast<int>(id / plane)};
}

/// Slab test of the ray against an axis-aligned box; returns the [t0,t1] overlap clipped to t >= 0.
inline std::optional<std::pair<double, double>> clip_ray_box(const Ray& ray, const Vec3d& lo, const Vec3d& hi) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a], d = ray.dir[a];
        if (d == 0.0) {
            if (o < lo[a] || o > hi[a]) return std::nullopt;
            continue;
        }
        double ta = (lo[a] - o) / d, tb = (hi[a] - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (!(t0 < t1)) return std::nullopt;
    return std::make_pair(t0, t1);
}

struct AllBlocks {
    bool operator()(const ValueRange&) const { return true; }
};

/// Amanatides-Woo traversal of the cells inside `crop`. Calls `visit(const CellStep&)` for every
/// cell whose interior the ray crosses, in increasing t; stops early when `visit` returns false.
/// Consecutive steps tile the clipped segment exactly.
///
/// Blocks whose value range fails `block_pass` are jumped over without visiting their cells. The
/// jump replays the face crossings in the same (t, axis) order as the cell-by-cell walk, so the
/// steps reported after it are bit-identical to an unaccelerated traversal.
template <class Visitor, class BlockPass = AllBlocks>
void for_each_cell(const Ray& ray, const ScalarVolume& vol, const CropBounds& crop, Visitor&& visit,
                   BlockPass&& block_pass = {}) {
    constexpr bool kSkipping = !std::is_same_v<std::decay_t<BlockPass>, AllBlocks>;
    const Vec3d& s = vol.spacing();
    const Vec3d box_lo{crop.lo.x * s.x, crop.lo.y * s.y, crop.lo.z * s.z};
    const Vec3d box_hi{crop.hi.x * s.x, crop.hi.y * s.y, crop.hi.z * s.z};
    const auto clip = clip_ray_box(ray, box_lo, box_hi);
    if (!clip) return;
    const auto [t_start, t_end] = *clip;

    // Nudged entry point avoids landing on the face shared with the previous cell.
    const double nudge = 1e-9 * vol.cell_diagonal();
    const Vec3d p = ray.at(std::min(t_start + nudge, 0.5 * (t_start + t_end)));
    Vec3i cell, step;
    Vec3d inv_dir;
    for (int a = 0; a < 3; ++a) {
        int c = static_cast<int>(std::floor(p[a] / s[a]));
        cell[a] = std::clamp(c, crop.lo[a], crop.hi[a] - 1);
        const double d = ray.dir[a];
        step[a] = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        inv_dir[a] = d != 0.0 ? 1.0 / d : 0.0;
    }
    auto boundary_t = [&](int a) {
        if (step[a] == 0) return std::numeric_limits<double>::infinity();
        const int face = step[a] > 0 ? cell[a] + 1 : cell[a];
        return (face * s[a] - ray.origin[a]) * inv_dir[a];
    };

    double t_enter = t_start;
    Vec3d t_max{boundary_t(0), boundary_t(1), boundary_t(2)};
    Vec3i block{-1, -1, -1};
    while (true) {
        if constexpr (kSkipping) {
            const Vec3i b{cell.x / kBlockCells, cell.y / kBlockCells, cell.z / kBlockCells};
            if (!(b == block)) {
                block = b;
                if (!block_pass(vol.block_range(b))) {
                    // Block-level walk until a block passes; faces are crossed in (t, axis) order with
                    // ties to the lower axis, exactly as the cell-level walk orders them.
                    auto block_face = [&](int a, int bi) {
                        return step[a] > 0 ? std::min((bi + 1) * kBlockCells, crop.hi[a])
                                           : std::max(bi * kBlockCells, crop.lo[a]);
                    };
                    auto face_t = [&](int a, int face) { return (face * s[a] - ray.origin[a]) * inv_dir[a]; };
                    Vec3d tb;
                    for (int a = 0; a < 3; ++a)
                        tb[a] = step[a] == 0 ? std::numeric_limits<double>::infinity() : face_t(a, block_face(a, b[a]));
                    double t_out = 0.0;
                    int out_axis = 0, out_face = 0;
                    while (true) {
                        out_axis = 0;
                        if (tb.y < tb[out_axis]) out_axis = 1;
                        if (tb.z < tb[out_axis]) out_axis = 2;
                        t_out = tb[out_axis];
                        if (t_out >= t_end) return;
                        out_face = block_face(out_axis, block[out_axis]);
                        if (out_face == (step[out_axis] > 0 ? crop.hi[out_axis] : crop.lo[out_axis])) return;
                        block[out_axis] += step[out_axis];
                        tb[out_axis] = face_t(out_axis, block_face(out_axis, block[out_axis]));
                        if (block_pass(vol.block_range(block))) break;
                    }
                    // Resynchronize the cell walk at (t_out, out_axis).
                    auto crossed = [&](double t, int a) { return t < t_out || (t == t_out && a < out_axis); };
                    for (int a = 0; a < 3; ++a) {
                        if (a == out_axis || step[a] == 0) continue;
                        const int first = step[a] > 0 ? std::max(block[a] * kBlockCells, crop.lo[a])
                                                      : std::min((block[a] + 1) * kBlockCells, crop.hi[a]) - 1;
                        const int last = step[a] > 0 ? std::min((block[a] + 1) * kBlockCells, crop.hi[a]) - 1
                                                     : std::max(block[a] * kBlockCells, crop.lo[a]);
                        int c = static_cast<int>(std::floor((ray.origin[a] + t_out * ray.dir[a]) / s[a]));
                        cell[a] = step[a] > 0 ? std::clamp(c, first, last) : std::clamp(c, last, first);
                        while (cell[a] != last && crossed(boundary_t(a), a)) cell[a] += step[a];
                        while (cell[a] != first && !crossed(face_t(a, step[a] > 0 ? cell[a] : cell[a] + 1), a))
                            cell[a] -= step[a];
                    }
                    cell[out_axis] = step[out_axis] > 0 ? out_face : out_face - 1;
                    t_enter = std::max(t_enter, t_out);
                    t_max = {boundary_t(0), boundary_t(1), boundary_t(2)};
                }
            }
        }
        int axis = 0;
        if (t_max.y < t_max[axis]) axis = 1;
        if (t_max.z < t_max[axis]) axis = 2;
        const double t_next = t_max[axis];
        const double t_exit = std::min(t_next, t_end);
        if (t_exit > t_enter) {
            if (!visit(CellStep{cell, t_enter, t_exit})) return;
            t_enter = t_exit;
        }
        if (t_next >= t_end) return;
        cell[axis] += step[axis];
        if (cell[axis] < crop.lo[axis] || cell[axis] >= crop.hi[axis]) return;
        t_max[axis] = boundary_t(axis);
    }
}

inline std::vector<CellStep> traverse_cells(const Ray& ray, const ScalarVolume& vol, const CropBounds& crop) {
    std::vector<CellStep> steps;
    for_each_cell(ray, vol, crop, [&](const CellStep& st) {
        steps.push_back(st);
        return true;
    });
    return steps;
}

}  // namespace ceir
