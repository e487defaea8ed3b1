// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "ceir/camera.hpp"
#include "ceir/math.hpp"

namespace ceir {

class Image {
public:
    Image() = default;
    Image(ImageDims dims, Rgb fill = {}) : dims_(dims), pixels_(dims.pixel_count(), fill) {}

    const ImageDims& dims() const { return dims_; }
    int width() const { return dims_.width; }
    int height() const { return dims_.height; }

    Rgb& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * dims_.width + x]; }
    const Rgb& at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * dims_.width + x]; }
    const std::vector<Rgb>& pixels() const { return pixels_; }

    /// 8-bit quantization used by every encoder.
    std::vector<std::uint8_t> to_rgb8() const {
        std::vector<std::uint8_t> out;
        out.reserve(pixels_.size() * 3);
        for (const Rgb& c : pixels_)
            for (int k = 0; k < 3; ++k) out.push_back(quantize(c[k]));
        return out;
    }

    std::vector<std::uint8_t> to_rgba8() const {
        std::vector<std::uint8_t> out;
        out.reserve(pixels_.size() * 4);
        for (const Rgb& c : pixels_) {
            for (int k = 0; k < 3; ++k) out.push_back(quantize(c[k]));
            out.push_back(255);
        }
        return out;
    }

    static std::uint8_t quantize(double v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }

private:
    ImageDims dims_;
    std::vector<Rgb> pixels_;
};

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32_be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

/// 8-bit RGB PNG, filter 0 on every row, zlib level 6. Output is deterministic.
inline std::vector<std::uint8_t> encode_png(const Image& img) {
    const auto rgb = img.to_rgb8();
    const std::size_t row = static_cast<std::size_t>(img.width()) * 3;
    std::vector<std::uint8_t> raw;
    raw.reserve((row + 1) * img.height());
    for (int y = 0; y < img.height(); ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), rgb.begin() + y * row, rgb.begin() + (y + 1) * row);
    }
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> z(zlen);
    if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error("PNG compression failed");
    z.resize(zlen);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.width()));
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(img.height()));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    detail::put_chunk(out, "IHDR", ihdr);
    detail::put_chunk(out, "IDAT", z);
    detail::put_chunk(out, "IEND", {});
    return out;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void write_png(const std::filesystem::path& path, const Image& img) { write_bytes(path, encode_png(img)); }

}  // namespace ceir
