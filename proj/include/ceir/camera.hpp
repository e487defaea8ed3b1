// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <numbers>

#include <json.hpp>

#include "ceir/math.hpp"

namespace ceir {

struct Ray {
    Vec3d origin;
    Vec3d dir;  // unit length

    Vec3d at(double t) const { return origin + dir * t; }
};

struct ImageDims {
    int width = 1;
    int height = 1;

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    bool operator==(const ImageDims&) const = default;
};

struct Pixel {
    int x = 0;
    int y = 0;
};

/// Pinhole camera. Pixel (0,0) is the top-left corner of the image.
struct Camera {
    Vec3d eye{0.5, 0.5, -1.5};
    Vec3d look_at{0.5, 0.5, 0.5};
    Vec3d up{0.0, 1.0, 0.0};
    double vfov_deg = 40.0;
    ImageDims image{256, 256};

    void validate() const {
        if (!(vfov_deg > 0.0 && vfov_deg < 180.0)) throw ConfigError("vfov_deg must be in (0,180)");
        if (image.width < 1 || image.height < 1) throw ConfigError("image_dims must be >= 1");
        const Vec3d fwd = look_at - eye;
        if (length(fwd) == 0.0) throw ConfigError("eye and look_at coincide");
        if (length(cross(normalize(fwd), normalize(up))) < 1e-9)
            throw ConfigError("camera up is parallel to the view direction");
    }
};

/// Precomputed camera basis; cheap to copy into render workers.
class CameraRig {
public:
    explicit CameraRig(const Camera& cam) : cam_(cam) {
        cam.validate();
        forward_ = normalize(cam.look_at - cam.eye);
        right_ = normalize(cross(forward_, cam.up));
        up_ = cross(right_, forward_);
        tan_half_ = std::tan(cam.vfov_deg * std::numbers::pi / 360.0);
        aspect_ = static_cast<double>(cam.image.width) / cam.image.height;
    }

    Ray ray(double px, double py) const {
        const double sx = (2.0 * (px + 0.5) / cam_.image.width - 1.0) * tan_half_ * aspect_;
        const double sy = (1.0 - 2.0 * (py + 0.5) / cam_.image.height) * tan_half_;
        return {cam_.eye, normalize(forward_ + right_ * sx + up_ * sy)};
    }

    const Camera& camera() const { return cam_; }
    const Vec3d& forward() const { return forward_; }

private:
    Camera cam_;
    Vec3d forward_, right_, up_;
    double tan_half_ = 1.0;
    double aspect_ = 1.0;
};

inline Ray pixel_ray(const Camera& cam, Pixel px) { return CameraRig(cam).ray(px.x, px.y); }

inline Vec3d vec3_from_json(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json camera_to_json(const Camera& c) {
    return {{"eye", {c.eye.x, c.eye.y, c.eye.z}},
            {"look_at", {c.look_at.x, c.look_at.y, c.look_at.z}},
            {"up", {c.up.x, c.up.y, c.up.z}},
            {"vfov_deg", c.vfov_deg},
            {"image_dims", {c.image.width, c.image.height}}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
    try {
        Camera c;
        c.eye = vec3_from_json(j.at("eye"));
        c.look_at = vec3_from_json(j.at("look_at"));
        if (j.contains("up")) c.up = vec3_from_json(j.at("up"));
        if (j.contains("vfov_deg")) c.vfov_deg = j.at("vfov_deg").get<double>();
        else if (j.contains("vfov")) c.vfov_deg = j.at("vfov").get<double>();
        const auto& d = j.at("image_dims");
        c.image = {d.at(0).get<int>(), d.at(1).get<int>()};
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid camera: ") + e.what());
    }
}

}  // namespace ceir
