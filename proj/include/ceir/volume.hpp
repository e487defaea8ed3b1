// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ceir/math.hpp"

namespace ceir {

enum class DType { u8, u16le, f32le };

inline std::size_t dtype_width(DType t) {
    switch (t) {
        case DType::u8: return 1;
        case DType::u16le: return 2;
        case DType::f32le: return 4;
    }
    return 0;
}

inline const char* dtype_name(DType t) {
    switch (t) {
        case DType::u8: return "u8";
        case DType::u16le: return "u16le";
        case DType::f32le: return "f32le";
    }
    return "?";
}

inline DType parse_dtype(const std::string& s) {
    if (s == "u8") return DType::u8;
    if (s == "u16le") return DType::u16le;
    if (s == "f32le") return DType::f32le;
    throw FormatError("unknown dtype '" + s + "'");
}

struct VolumeMeta {
    Vec3i dims{2, 2, 2};
    Vec3d spacing{1.0, 1.0, 1.0};
    DType source_dtype = DType::f32le;
    double range_min = 0.0;
    double range_max = 1.0;

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (dims[a] < 2) throw FormatError("volume dims must be >= 2 on every axis");
            if (!(spacing[a] > 0.0)) throw FormatError("volume spacing must be > 0 on every axis");
        }
        if (!(range_min < range_max)) throw FormatError("value_range requires min < max");
    }

    std::size_t point_count() const {
        return static_cast<std::size_t>(dims.x) * dims.y * dims.z;
    }
};

/// Cells per block edge for the min/max acceleration grid.
constexpr int kBlockCells = 8;

struct ValueRange {
    float lo = 0.0f, hi = 0.0f;
};

/// Immutable normalized scalar grid. Values live on grid points in x-fastest order and
/// are always in [0,1]. World position of grid point (i,j,k) is (i*sx, j*sy, k*sz).
class ScalarVolume {
public:
    ScalarVolume(VolumeMeta meta, std::vector<float> data) : meta_(meta), data_(std::move(data)) {
        meta_.validate();
        if (data_.size() != meta_.point_count())
            throw FormatError("volume data length does not match dims");
        for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
        build_blocks();
    }

    const VolumeMeta& meta() const { return meta_; }
    const Vec3i& dims() const { return meta_.dims; }
    const Vec3d& spacing() const { return meta_.spacing; }
    Vec3i cell_dims() const { return {meta_.dims.x - 1, meta_.dims.y - 1, meta_.dims.z - 1}; }
    std::int64_t cell_count() const {
        const Vec3i c = cell_dims();
        return static_cast<std::int64_t>(c.x) * c.y * c.z;
    }
    Vec3d extent() const {
        return {(meta_.dims.x - 1) * meta_.spacing.x, (meta_.dims.y - 1) * meta_.spacing.y,
                (meta_.dims.z - 1) * meta_.spacing.z};
    }
    double min_spacing() const { return std::min({meta_.spacing.x, meta_.spacing.y, meta_.spacing.z}); }
    double cell_diagonal() const { return length(meta_.spacing); }

    std::span<const float> data() const { return data_; }

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(meta_.dims.x) * (static_cast<std::size_t>(j) +
                                                         static_cast<std::size_t>(meta_.dims.y) * k);
    }
    double at(int i, int j, int k) const { return data_[index(i, j, k)]; }

    /// Corner values of cell (i,j,k), ordered bit-wise: bit0 = +x, bit1 = +y, bit2 = +z.
    std::array<double, 8> cell_corners(int i, int j, int k) const {
        const std::size_t base = index(i, j, k);
        const std::size_t sx = 1, sy = meta_.dims.x,
                          sz = static_cast<std::size_t>(meta_.dims.x) * meta_.dims.y;
        return {data_[base],           data_[base + sx],           data_[base + sy],
                data_[base + sx + sy], data_[base + sz],           data_[base + sx + sz],
                data_[base + sy + sz], data_[base + sx + sy + sz]};
    }

    bool contains(const Vec3d& p) const {
        const Vec3d e = extent();
        return p.x >= 0.0 && p.y >= 0.0 && p.z >= 0.0 && p.x <= e.x && p.y <= e.y && p.z <= e.z;
    }

    /// Value range over all grid points of the kBlockCells^3 block of cells `b`.
    const Vec3i& block_dims() const { return block_dims_; }
    const ValueRange& block_range(const Vec3i& b) const {
        return blocks_[b.x + static_cast<std::size_t>(block_dims_.x) * (b.y + static_cast<std::size_t>(block_dims_.y) * b.z)];
    }

private:
    void build_blocks() {
        const Vec3i cd = cell_dims();
        for (int a = 0; a < 3; ++a) block_dims_[a] = (cd[a] + kBlockCells - 1) / kBlockCells;
        blocks_.assign(static_cast<std::size_t>(block_dims_.x) * block_dims_.y * block_dims_.z, {});
        std::size_t n = 0;
        for (int bz = 0; bz < block_dims_.z; ++bz)
            for (int by = 0; by < block_dims_.y; ++by)
                for (int bx = 0; bx < block_dims_.x; ++bx) {
                    ValueRange r{2.0f, -1.0f};
                    const int k1 = std::min((bz + 1) * kBlockCells, cd.z), j1 = std::min((by + 1) * kBlockCells, cd.y),
                              i1 = std::min((bx + 1) * kBlockCells, cd.x);
                    for (int k = bz * kBlockCells; k <= k1; ++k)
                        for (int j = by * kBlockCells; j <= j1; ++j) {
                            const float* row = &data_[index(0, j, k)];
                            for (int i = bx * kBlockCells; i <= i1; ++i) {
                                r.lo = std::min(r.lo, row[i]);
                                r.hi = std::max(r.hi, row[i]);
                            }
                        }
                    blocks_[n++] = r;
                }
    }

    VolumeMeta meta_;
    std::vector<float> data_;
    Vec3i block_dims_;
    std::vector<ValueRange> blocks_;
};

using VolumePtr = std::shared_ptr<const ScalarVolume>;

/// Trilinear blend of cell corners (ordering as in ScalarVolume::cell_corners), local coords in [0,1].
inline double trilinear_in_cell(const std::array<double, 8>& v, double fx, double fy, double fz) {
    const double x00 = v[0] + (v[1] - v[0]) * fx;
    const double x10 = v[2] + (v[3] - v[2]) * fx;
    const double x01 = v[4] + (v[5] - v[4]) * fx;
    const double x11 = v[6] + (v[7] - v[6]) * fx;
    const double y0 = x00 + (x10 - x00) * fy;
    const double y1 = x01 + (x11 - x01) * fy;
    return y0 + (y1 - y0) * fz;
}

/// Trilinear interpolation; positions outside the grid clamp to the boundary.
inline double sample_trilinear(const ScalarVolume& vol, const Vec3d& pos) {
    const Vec3i& d = vol.dims();
    const Vec3d& s = vol.spacing();
    double g[3] = {pos.x / s.x, pos.y / s.y, pos.z / s.z};
    int c[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        const double hi = d[a] - 1;
        double u = std::clamp(g[a], 0.0, hi);
        int i = static_cast<int>(u);
        if (i > d[a] - 2) i = d[a] - 2;
        c[a] = i;
        f[a] = u - i;
    }
    return trilinear_in_cell(vol.cell_corners(c[0], c[1], c[2]), f[0], f[1], f[2]);
}

/// Central differences with one grid step per axis, in scalar units per world unit.
inline Vec3d gradient_central(const ScalarVolume& vol, const Vec3d& pos) {
    const Vec3d& s = vol.spacing();
    Vec3d g;
    for (int a = 0; a < 3; ++a) {
        Vec3d step{};
        step[a] = s[a];
        g[a] = (sample_trilinear(vol, pos + step) - sample_trilinear(vol, pos - step)) / (2.0 * s[a]);
    }
    return g;
}

// ---------------------------------------------------------------------------
// File I/O: <name>.raw (tightly packed, x-fastest, little-endian) + <name>.json sidecar.

inline nlohmann::json meta_to_json(const VolumeMeta& m) {
    return {{"dims", {m.dims.x, m.dims.y, m.dims.z}},
            {"spacing", {m.spacing.x, m.spacing.y, m.spacing.z}},
            {"dtype", dtype_name(m.source_dtype)},
            {"value_range", {m.range_min, m.range_max}}};
}

inline VolumeMeta meta_from_json(const nlohmann::json& j) {
    try {
        VolumeMeta m;
        const auto& d = j.at("dims");
        m.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
        if (j.contains("spacing")) {
            const auto& s = j.at("spacing");
            m.spacing = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
        }
        m.source_dtype = parse_dtype(j.at("dtype").get<std::string>());
        const auto& r = j.at("value_range");
        m.range_min = r.at(0).get<double>();
        m.range_max = r.at(1).get<double>();
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid volume sidecar: ") + e.what());
    }
}

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
    return bytes;
}

namespace detail {

template <class T>
T read_le(const char* p) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

template <class T>
void write_le(std::ostream& out, T v) {
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b.begin(), b.end());
    out.write(reinterpret_cast<const char*>(b.data()), sizeof(T));
}

}  // namespace detail

/// Decodes raw bytes and min-max normalizes them into [0,1] with `meta.value_range`.
inline ScalarVolume decode_volume(std::span<const char> bytes, const VolumeMeta& meta) {
    meta.validate();
    const std::size_t n = meta.point_count();
    const std::size_t w = dtype_width(meta.source_dtype);
    if (bytes.size() != n * w)
        throw FormatError("raw size " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(n * w));
    std::vector<float> data(n);
    const double lo = meta.range_min, scale = 1.0 / (meta.range_max - meta.range_min);
    for (std::size_t i = 0; i < n; ++i) {
        double raw = 0.0;
        const char* p = bytes.data() + i * w;
        switch (meta.source_dtype) {
            case DType::u8: raw = static_cast<unsigned char>(*p); break;
            case DType::u16le: raw = detail::read_le<std::uint16_t>(p); break;
            case DType::f32le: raw = detail::read_le<float>(p); break;
        }
        data[i] = static_cast<float>(std::clamp((raw - lo) * scale, 0.0, 1.0));
    }
    return ScalarVolume(meta, std::move(data));
}

inline ScalarVolume load_volume(const std::filesystem::path& raw_path, const VolumeMeta& meta) {
    const auto bytes = read_file_bytes(raw_path);
    return decode_volume(bytes, meta);
}

/// Resolves "<stem>", "<stem>.raw" or "<stem>.json" to the (raw, sidecar) pair.
inline std::pair<std::filesystem::path, std::filesystem::path> volume_paths(std::filesystem::path p) {
    if (p.extension() == ".raw" || p.extension() == ".json") p.replace_extension();
    auto raw = p, side = p;
    raw += ".raw";
    side += ".json";
    return {raw, side};
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

inline ScalarVolume load_volume_pair(const std::filesystem::path& path) {
    const auto [raw, side] = volume_paths(path);
    return load_volume(raw, meta_from_json(read_json_file(side)));
}

/// Writes the normalized data as f32le with value_range [0,1] so a reload is lossless.
inline void save_volume_pair(const ScalarVolume& vol, const std::filesystem::path& path) {
    const auto [raw, side] = volume_paths(path);
    {
        std::ofstream out(raw, std::ios::binary);
        if (!out) throw IoError("cannot write '" + raw.string() + "'");
        for (float v : vol.data()) detail::write_le<float>(out, v);
        if (!out) throw IoError("write failed for '" + raw.string() + "'");
    }
    VolumeMeta m = vol.meta();
    m.source_dtype = DType::f32le;
    m.range_min = 0.0;
    m.range_max = 1.0;
    std::ofstream js(side);
    if (!js) throw IoError("cannot write '" + side.string() + "'");
    js << meta_to_json(m).dump(2) << '\n';
}

}  // namespace ceir
