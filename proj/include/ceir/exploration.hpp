// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "ceir/camera.hpp"
#include "ceir/math.hpp"

namespace ceir {

struct PeelWindow {
    int x = 0, y = 0, w = 0, h = 0;
};

/// Per-pixel plane of T in row-major order.
template <class T>
class PixelPlane {
public:
    PixelPlane() = default;
    PixelPlane(ImageDims dims, T fill) : dims_(dims), values_(dims.pixel_count(), fill) {}

    const ImageDims& dims() const { return dims_; }
    T& at(int x, int y) { return values_[static_cast<std::size_t>(y) * dims_.width + x]; }
    const T& at(int x, int y) const { return values_[static_cast<std::size_t>(y) * dims_.width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < dims_.width && y < dims_.height; }
    const std::vector<T>& values() const { return values_; }
    bool empty() const { return values_.empty(); }

    bool operator==(const PixelPlane&) const = default;

private:
    ImageDims dims_;
    std::vector<T> values_;
};

/// Skip counts: value at a pixel is the number of peel windows covering it.
using PeelBuffer = PixelPlane<int>;

constexpr std::int64_t kMissId = -1;

/// Cell id of the returned hit at every pixel, kMissId where the ray missed.
using VoxelIdBuffer = PixelPlane<std::int64_t>;

inline PeelBuffer build_peel_buffer(const std::vector<PeelWindow>& windows, ImageDims dims) {
    PeelBuffer buf(dims, 0);
    for (const auto& w : windows) {
        const int x0 = std::max(w.x, 0), y0 = std::max(w.y, 0);
        const int x1 = std::min(w.x + w.w, dims.width), y1 = std::min(w.y + w.h, dims.height);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) ++buf.at(x, y);
    }
    return buf;
}

/// Deduplicated, ascending cell ids under the given pixels; misses and out-of-image pixels are ignored.
inline std::vector<std::int64_t> pick_voxels(const VoxelIdBuffer& ids, const std::vector<Pixel>& pixels) {
    std::vector<std::int64_t> out;
    for (const Pixel& p : pixels) {
        if (!ids.in_bounds(p.x, p.y)) continue;
        const std::int64_t id = ids.at(p.x, p.y);
        if (id != kMissId) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// Foreground/background seed cells kept sorted and disjoint; adding to one side removes from the other.
class SeedSets {
public:
    const std::vector<std::int64_t>& foreground() const { return fg_; }
    const std::vector<std::int64_t>& background() const { return bg_; }
    bool empty() const { return fg_.empty() && bg_.empty(); }

    bool in_foreground(std::int64_t id) const { return std::binary_search(fg_.begin(), fg_.end(), id); }
    bool in_background(std::int64_t id) const { return std::binary_search(bg_.begin(), bg_.end(), id); }

    /// Returns true when the id was not already on that side.
    bool add_foreground(std::int64_t id) { return add(fg_, bg_, id); }
    bool add_background(std::int64_t id) { return add(bg_, fg_, id); }
    bool remove(std::int64_t id) { return erase(fg_, id) | erase(bg_, id); }
    void clear() {
        fg_.clear();
        bg_.clear();
    }

private:
    static bool add(std::vector<std::int64_t>& into, std::vector<std::int64_t>& other, std::int64_t id) {
        erase(other, id);
        auto it = std::lower_bound(into.begin(), into.end(), id);
        if (it != into.end() && *it == id) return false;
        into.insert(it, id);
        return true;
    }
    static bool erase(std::vector<std::int64_t>& v, std::int64_t id) {
        auto it = std::lower_bound(v.begin(), v.end(), id);
        if (it == v.end() || *it != id) return false;
        v.erase(it);
        return true;
    }

    std::vector<std::int64_t> fg_, bg_;
};

constexpr Rgb kForegroundHighlight{1.0, 0.85, 0.1};
constexpr Rgb kBackgroundHighlight{0.1, 0.75, 1.0};

inline Rgb selection_color(std::int64_t cell_id, const SeedSets& seeds, const Rgb& base) {
    if (seeds.in_foreground(cell_id)) return kForegroundHighlight;
    if (seeds.in_background(cell_id)) return kBackgroundHighlight;
    return base;
}

// JSON wire shapes: {"rects":[[x,y,w,h],...]}, {"pixels":[[x,y],...]}, {"cells":[...]}.

inline std::vector<PeelWindow> peel_windows_from_json(const nlohmann::json& j) {
    std::vector<PeelWindow> out;
    for (const auto& r : j.at("rects")) {
        PeelWindow w{r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(), r.at(3).get<int>()};
        if (w.w < 0 || w.h < 0) throw ConfigError("peel rectangle needs non-negative size");
        out.push_back(w);
    }
    return out;
}

inline nlohmann::json peel_windows_to_json(const std::vector<PeelWindow>& windows) {
    nlohmann::json rects = nlohmann::json::array();
    for (const auto& w : windows) rects.push_back({w.x, w.y, w.w, w.h});
    return {{"rects", rects}};
}

inline std::vector<Pixel> pixels_from_json(const nlohmann::json& arr) {
    std::vector<Pixel> out;
    for (const auto& p : arr) out.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    return out;
}

}  // namespace ceir
