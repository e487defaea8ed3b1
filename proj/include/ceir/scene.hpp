// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include <json.hpp>

#include "ceir/render.hpp"

namespace ceir {

constexpr int kMaxStructures = 255;

/// One 8-bit label per cell; 0 marks empty cells.
class LabelVolume {
public:
    LabelVolume() = default;
    explicit LabelVolume(Vec3i cell_dims)
        : cell_dims_(cell_dims), labels_(static_cast<std::size_t>(cell_dims.x) * cell_dims.y * cell_dims.z, 0) {}
    LabelVolume(Vec3i cell_dims, std::vector<std::uint8_t> labels) : cell_dims_(cell_dims), labels_(std::move(labels)) {
        if (labels_.size() != static_cast<std::size_t>(cell_dims.x) * cell_dims.y * cell_dims.z)
            throw FormatError("label volume length does not match cell dims");
    }

    const Vec3i& cell_dims() const { return cell_dims_; }
    std::uint8_t at(std::int64_t id) const { return labels_[static_cast<std::size_t>(id)]; }
    void set(std::int64_t id, std::uint8_t v) { labels_.at(static_cast<std::size_t>(id)) = v; }
    const std::vector<std::uint8_t>& data() const { return labels_; }

    std::array<std::int64_t, 256> histogram() const {
        std::array<std::int64_t, 256> h{};
        for (auto v : labels_) ++h[v];
        return h;
    }

    bool operator==(const LabelVolume&) const = default;

private:
    Vec3i cell_dims_;
    std::vector<std::uint8_t> labels_;
};

/// Writes `id` into every listed cell; later bakes overwrite earlier ones.
inline LabelVolume bake_structure(LabelVolume labels, const std::vector<std::int64_t>& cells, int id) {
    if (id < 1 || id > kMaxStructures) throw ConfigError("structure id must be in 1..255");
    for (std::int64_t c : cells) labels.set(c, static_cast<std::uint8_t>(id));
    return labels;
}

struct SurfaceStructure {
    int id = 1;
    TransferFunctionDoc tf;  // tf.params.isovalue is the structure's isovalue
    SurfaceStyle style;      // carries this structure's row of the speed-color table

    double isovalue() const { return tf.params.isovalue; }

    static SurfaceStructure make(int id, double isovalue, TransferFunctionDoc tf, int m = 256) {
        if (id < 1 || id > kMaxStructures) throw ConfigError("structure id must be in 1..255");
        tf.params.isovalue = isovalue;
        tf.params.validate();
        SurfaceStructure s{id, tf, SurfaceStyle::enhanced(tf, m)};
        return s;
    }
};

struct Scene {
    VolumePtr volume;
    std::shared_ptr<const LabelVolume> labels;
    std::map<int, SurfaceStructure> structures;
    Camera camera;
    std::optional<CropBounds> crop;
    std::vector<Light> lights = default_lights();

    void validate() const {
        if (!volume || !labels) throw ConfigError("scene needs a volume and a label volume");
        if (!(labels->cell_dims() == volume->cell_dims())) throw ConfigError("label dims differ from volume cell dims");
        if (structures.size() > static_cast<std::size_t>(kMaxStructures)) throw ConfigError("at most 255 structures");
        const auto h = labels->histogram();
        for (int v = 1; v < 256; ++v)
            if (h[v] > 0 && !structures.count(v))
                throw ConfigError("label " + std::to_string(v) + " has no structure");
    }
};

/// First-hit rendering over labeled cells: each labeled cell is intersected against its own
/// structure's isovalue and colored with that structure's table row.
inline RenderOutput render_scene(const Scene& scene, RenderOptions opt = {}) {
    scene.validate();
    if (!opt.crop) opt.crop = scene.crop;
    opt.lights = scene.lights;
    std::array<const SurfaceStructure*, 256> table{};
    for (const auto& [id, s] : scene.structures) table[static_cast<std::size_t>(id)] = &s;
    const LabelVolume& labels = *scene.labels;
    IsoSpan span{1.0, 0.0};
    for (const auto& [id, s] : scene.structures) {
        span.lo = std::min(span.lo, s.isovalue());
        span.hi = std::max(span.hi, s.isovalue());
    }
    return render_surfaces(
        *scene.volume, scene.camera, opt,
        [&](const Vec3i&, std::int64_t id) -> std::optional<CellSurface> {
            const std::uint8_t l = labels.at(id);
            if (l == 0) return std::nullopt;
            return CellSurface{table[l]->isovalue(), l};
        },
        [&](int sid) -> const SurfaceStyle& { return table[static_cast<std::size_t>(sid)]->style; }, span);
}

// ---------------------------------------------------------------------------
// Scene file: {volume_ref, crop, camera, structures:[{id, isovalue, tf_ref}], label_ref}.
// Relative references resolve against the scene file's directory.

inline nlohmann::json crop_to_json(const CropBounds& c) {
    return {{"lo", {c.lo.x, c.lo.y, c.lo.z}}, {"hi", {c.hi.x, c.hi.y, c.hi.z}}};
}

inline CropBounds crop_from_json(const nlohmann::json& j) {
    if (j.is_string()) return parse_crop(j.get<std::string>());
    CropBounds c;
    for (int a = 0; a < 3; ++a) {
        c.lo[a] = j.at("lo").at(a).get<int>();
        c.hi[a] = j.at("hi").at(a).get<int>();
    }
    return c;
}

inline LabelVolume load_labels(const std::filesystem::path& path, Vec3i cell_dims) {
    const auto bytes = read_file_bytes(path);
    return LabelVolume(cell_dims, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
}

inline void save_labels(const std::filesystem::path& path, const LabelVolume& labels) {
    write_bytes(path, labels.data());
}

inline Scene load_scene(const std::filesystem::path& path, int map_size = 256) {
    const auto j = read_json_file(path);
    const auto dir = path.parent_path();
    auto resolve = [&](const std::string& ref) {
        const std::filesystem::path p(ref);
        return p.is_absolute() ? p : dir / p;
    };
    try {
        Scene s;
        s.volume = std::make_shared<const ScalarVolume>(load_volume_pair(resolve(j.at("volume_ref").get<std::string>())));
        s.labels = std::make_shared<const LabelVolume>(
            load_labels(resolve(j.at("label_ref").get<std::string>()), s.volume->cell_dims()));
        if (j.contains("camera")) s.camera = camera_from_json(j.at("camera"));
        if (j.contains("crop") && !j.at("crop").is_null()) s.crop = crop_from_json(j.at("crop"));
        for (const auto& st : j.at("structures")) {
            auto tf = load_tf(resolve(st.at("tf_ref").get<std::string>()));
            const double iso = st.value("isovalue", tf.params.isovalue);
            const int id = st.at("id").get<int>();
            s.structures.emplace(id, SurfaceStructure::make(id, iso, std::move(tf), map_size));
        }
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid scene file: ") + e.what());
    }
}

/// Writes `<stem>.scene.json` plus the label grid, one TF file per structure, and the volume
/// pair when `volume_ref` is empty.
inline void save_scene(const Scene& scene, const std::filesystem::path& dir, const std::string& stem,
                       std::string volume_ref = {}) {
    std::filesystem::create_directories(dir);
    if (volume_ref.empty()) {
        save_volume_pair(*scene.volume, dir / (stem + ".volume"));
        volume_ref = stem + ".volume.json";
    }
    save_labels(dir / (stem + ".labels.raw"), *scene.labels);
    nlohmann::json structures = nlohmann::json::array();
    for (const auto& [id, s] : scene.structures) {
        const std::string tf_name = stem + ".tf" + std::to_string(id) + ".json";
        std::ofstream(dir / tf_name) << tf_to_json(s.tf).dump(2) << '\n';
        structures.push_back({{"id", id}, {"isovalue", s.isovalue()}, {"tf_ref", tf_name}});
    }
    nlohmann::json j = {{"volume_ref", volume_ref},
                        {"label_ref", stem + ".labels.raw"},
                        {"camera", camera_to_json(scene.camera)},
                        {"structures", structures}};
    j["crop"] = scene.crop ? crop_to_json(*scene.crop) : nlohmann::json(nullptr);
    std::ofstream out(dir / (stem + ".scene.json"));
    if (!out) throw IoError("cannot write scene file in '" + dir.string() + "'");
    out << j.dump(2) << '\n';
}

}  // namespace ceir
