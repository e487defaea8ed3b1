// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

// Headless driver: phantom generation, rendering, segmentation, composition and benchmarks.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>

#include "ceir/fvr.hpp"
#include "ceir/isoseg.hpp"
#include "ceir/scene.hpp"
#include "ceir/synthetic.hpp"

namespace {

using namespace ceir;
using nlohmann::json;

Vec3i parse_dims(const std::string& s) {
    Vec3i d;
    const int n = std::sscanf(s.c_str(), "%d,%d,%d", &d.x, &d.y, &d.z);
    if (n == 1) d.y = d.z = d.x;
    else if (n != 3) throw ConfigError("dims must be N or X,Y,Z");
    return d;
}

RenderOptions base_options(const std::string& crop, unsigned workers) {
    RenderOptions opt;
    if (!crop.empty()) opt.crop = parse_crop(crop);
    opt.workers = workers;
    return opt;
}

SurfaceStyle style_for(const std::string& mode, double iso, const std::string& tf_path, int map_size,
                       bool iso_given) {
    if (mode == "mono") return SurfaceStyle::monotone(iso_given || tf_path.empty() ? iso : load_tf(tf_path).params.isovalue);
    if (tf_path.empty()) throw ConfigError("--tf is required for mode " + mode);
    auto tf = load_tf(tf_path);
    if (iso_given) tf.params.isovalue = iso;
    tf.params.mode = mode == "deep" ? RateMode::deep : RateMode::shallow;
    return SurfaceStyle::enhanced(tf, map_size);
}

void write_ids(const std::string& path, const VoxelIdBuffer& ids) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(ids.values().size() * 4);
    for (std::int64_t id : ids.values()) {
        if (id > std::numeric_limits<std::int32_t>::max()) throw ConfigError("cell id does not fit in 32 bits");
        const auto v = static_cast<std::uint32_t>(static_cast<std::int32_t>(id));
        for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    write_bytes(path, bytes);
}

/// Seeds from {cells:[...]} or {pixels:[[x,y]...]} picked on a monotone reference render.
std::vector<std::int64_t> load_seed_cells(const std::string& path, const ScalarVolume& vol, double iso,
                                          const std::optional<Camera>& cam_flag, const std::string& peel_path,
                                          const RenderOptions& base) {
    const json j = read_json_file(path);
    if (j.contains("cells")) return j.at("cells").get<std::vector<std::int64_t>>();
    if (!j.contains("pixels")) throw ConfigError("seed file '" + path + "' needs 'cells' or 'pixels'");
    std::optional<Camera> cam = cam_flag;
    if (j.contains("camera")) cam = camera_from_json(j.at("camera"));
    if (!cam) throw ConfigError("pixel seeds need a camera (--camera or \"camera\" in the seed file)");
    RenderOptions opt = base;
    std::optional<PeelBuffer> peel;
    if (j.contains("peel")) peel = build_peel_buffer(peel_windows_from_json(j.at("peel")), cam->image);
    else if (!peel_path.empty()) peel = build_peel_buffer(peel_windows_from_json(read_json_file(peel_path)), cam->image);
    if (peel) opt.peel = &*peel;
    const auto ref = render_isosurface(vol, *cam, SurfaceStyle::monotone(iso), opt);
    return pick_voxels(ref.ids, pixels_from_json(j.at("pixels")));
}

double median_ms(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Times every renderer round-robin, one frame each per round, so slow drift in machine load
/// lands on all of them alike.
json time_frames(int warmup, int frames, const std::vector<std::pair<std::string, std::function<void()>>>& renderers) {
    for (int i = 0; i < warmup; ++i)
        for (const auto& r : renderers) r.second();
    std::vector<std::vector<double>> ms(renderers.size());
    for (int i = 0; i < frames; ++i)
        for (std::size_t k = 0; k < renderers.size(); ++k) {
            const auto t0 = std::chrono::steady_clock::now();
            renderers[k].second();
            ms[k].push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
    json out;
    for (std::size_t k = 0; k < renderers.size(); ++k)
        out[renderers[k].first] = {{"median_ms", median_ms(ms[k])},
                                   {"min_ms", *std::min_element(ms[k].begin(), ms[k].end())},
                                   {"max_ms", *std::max_element(ms[k].begin(), ms[k].end())},
                                   {"frames", frames}};
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ceir: color-enhanced isosurface rendering and scene exploration"};
    app.require_subcommand(1);
    unsigned workers = 0;
    app.add_option("--workers", workers, "Render threads (0 = hardware concurrency)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic phantom volume pair");
    std::string kind = "sphere", dims_s = "128", synth_out;
    std::vector<double> params;
    synth->add_option("--kind", kind, "Phantom kind")
        ->check(CLI::IsMember({"sphere", "two-spheres", "dumbbell", "ramp", "nested-spheres", "shell-with-inclusions"}));
    synth->add_option("--dims", dims_s, "N or X,Y,Z grid points")->check([](const std::string& v) {
        try {
            parse_dims(v);
            return std::string();
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
    });
    synth->add_option("--params", params, "Phantom parameters overriding the defaults");
    synth->add_option("--out", synth_out, "Output .raw path (sidecar .json written next to it)")->required();

    // render
    auto* render = app.add_subcommand("render", "Render an isosurface (monotone or color enhanced)");
    std::string volume, tf_path, mode = "shallow", camera_path, peel_path, out, ids_path, crop;
    double iso = 0.5;
    int map_size = 256;
    render->add_option("--volume", volume, "Volume .raw/.json path or stem")->required();
    auto* iso_opt = render->add_option("--iso", iso, "Isovalue (defaults to the transfer function's)");
    render->add_option("--tf", tf_path, "Transfer function JSON");
    render->add_option("--mode", mode, "shallow|deep|mono")->check(CLI::IsMember({"shallow", "deep", "mono"}));
    render->add_option("--camera", camera_path, "Camera JSON")->required();
    render->add_option("--peel", peel_path, "Peel windows JSON");
    render->add_option("--crop", crop, "Cell crop a,b,c:d,e,f");
    render->add_option("--map-size", map_size, "Speed-color map entries")->check(CLI::Range(2, 1 << 20));
    render->add_option("--out", out, "Output PNG")->required();
    render->add_option("--ids", ids_path, "Optional voxel id buffer dump (int32 LE per pixel)");

    // fvr
    auto* fvr = app.add_subcommand("fvr", "Full volume rendering reference");
    double sample_dist = 0.0;
    bool fvr_shade = false;
    fvr->add_option("--volume", volume, "Volume path")->required();
    fvr->add_option("--tf", tf_path, "Transfer function JSON")->required();
    fvr->add_option("--sample-dist", sample_dist, "Sample distance (world units)")->required()->check(CLI::PositiveNumber);
    fvr->add_option("--camera", camera_path, "Camera JSON")->required();
    fvr->add_option("--crop", crop, "Cell crop a,b,c:d,e,f");
    fvr->add_flag("--shade", fvr_shade, "Shade every sample with its gradient");
    fvr->add_option("--out", out, "Output PNG")->required();

    // segment
    auto* segment = app.add_subcommand("segment", "Min-cut isosurface segmentation between seed sets");
    std::string fg_path, bg_path;
    double seg_iso = 0.5;
    segment->add_option("--volume", volume, "Volume path")->required();
    segment->add_option("--iso", seg_iso, "Isovalue")->required();
    segment->add_option("--fg-seeds", fg_path, "Foreground seeds JSON")->required();
    segment->add_option("--bg-seeds", bg_path, "Background seeds JSON")->required();
    segment->add_option("--camera", camera_path, "Camera for pixel seeds");
    segment->add_option("--peel", peel_path, "Peel windows for pixel seeds");
    segment->add_option("--crop", crop, "Cell crop a,b,c:d,e,f");
    segment->add_option("--out", out, "Output .seg.json")->required();

    // bake
    auto* bake = app.add_subcommand("bake", "Bake one side of a cut into a scene as a surface structure");
    std::string cut_path, side = "fg", scene_in, out_dir, stem = "scene";
    int structure_id = 1;
    bake->add_option("--volume", volume, "Volume path (new scenes only)");
    bake->add_option("--scene", scene_in, "Existing scene to extend");
    bake->add_option("--cut", cut_path, "Segmentation .seg.json")->required();
    bake->add_option("--side", side, "fg|bg")->check(CLI::IsMember({"fg", "bg"}));
    bake->add_option("--id", structure_id, "Structure id 1..255")->check(CLI::Range(1, 255));
    auto* bake_iso = bake->add_option("--iso", iso, "Structure isovalue (defaults to the cut's)");
    bake->add_option("--tf", tf_path, "Structure transfer function")->required();
    bake->add_option("--camera", camera_path, "Camera stored in the scene");
    bake->add_option("--out-dir", out_dir, "Directory for the scene files")->required();
    bake->add_option("--stem", stem, "Scene file stem");

    // compose
    auto* compose = app.add_subcommand("compose", "Render a multi-structure scene");
    std::string scene_path;
    compose->add_option("--scene", scene_path, "Scene JSON")->required();
    compose->add_option("--camera", camera_path, "Camera JSON (defaults to the scene's)");
    compose->add_option("--peel", peel_path, "Peel windows JSON");
    compose->add_option("--map-size", map_size, "Speed-color map entries")->check(CLI::Range(2, 1 << 20));
    compose->add_option("--out", out, "Output PNG")->required();
    compose->add_option("--ids", ids_path, "Optional voxel id buffer dump");

    // bench
    auto* bench = app.add_subcommand("bench", "Median per-frame render time for mono, CEIR and FVR");
    int frames = 30, warmup = 5;
    bench->add_option("--volume", volume, "Volume path")->required();
    auto* bench_iso = bench->add_option("--iso", iso, "Isovalue (defaults to the transfer function's)");
    bench->add_option("--tf", tf_path, "Transfer function JSON")->required();
    bench->add_option("--camera", camera_path, "Camera JSON")->required();
    bench->add_option("--frames", frames, "Timed frames per renderer (>= 30)")->check(CLI::Range(30, 100000));
    bench->add_option("--warmup", warmup, "Untimed frames per renderer (>= 5)")->check(CLI::Range(5, 1000));
    bench->add_option("--sample-dist", sample_dist, "FVR sample distance (defaults to the standard one)");
    bench->add_option("--out", out, "Also write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*synth) {
            SyntheticSpec spec{parse_phantom_kind(kind), parse_dims(dims_s), params};
            save_volume_pair(generate_synthetic(spec), synth_out);
            const auto [raw, side_path] = volume_paths(synth_out);
            std::cout << "wrote " << raw.string() << " and " << side_path.string() << "\n";
        } else if (*render) {
            const auto vol = load_volume_pair(volume);
            const Camera cam = camera_from_json(read_json_file(camera_path));
            const SurfaceStyle style = style_for(mode, iso, tf_path, map_size, iso_opt->count() > 0);
            RenderOptions opt = base_options(crop, workers);
            std::optional<PeelBuffer> peel;
            if (!peel_path.empty()) {
                peel = build_peel_buffer(peel_windows_from_json(read_json_file(peel_path)), cam.image);
                opt.peel = &*peel;
            }
            const auto res = render_isosurface(vol, cam, style, opt);
            write_png(out, res.image);
            if (!ids_path.empty()) write_ids(ids_path, res.ids);
        } else if (*fvr) {
            const auto vol = load_volume_pair(volume);
            const Camera cam = camera_from_json(read_json_file(camera_path));
            FvrOptions opt;
            if (!crop.empty()) opt.crop = parse_crop(crop);
            opt.shade = fvr_shade;
            opt.workers = workers;
            write_png(out, render_fvr(vol, cam, TransitionalTF1D::from(load_tf(tf_path)), sample_dist, opt));
        } else if (*segment) {
            const auto vol = load_volume_pair(volume);
            std::optional<Camera> cam;
            if (!camera_path.empty()) cam = camera_from_json(read_json_file(camera_path));
            const RenderOptions base = base_options("", workers);
            SeedSets seeds;
            for (auto id : load_seed_cells(fg_path, vol, seg_iso, cam, peel_path, base)) seeds.add_foreground(id);
            for (auto id : load_seed_cells(bg_path, vol, seg_iso, cam, peel_path, base)) seeds.add_background(id);
            if (seeds.foreground().empty() || seeds.background().empty())
                throw ConfigError("both seed sets must select at least one cell");
            const CropBounds c = crop.empty() ? CropBounds::full(vol) : parse_crop(crop);
            const auto t0 = std::chrono::steady_clock::now();
            const IsoGraph g = build_graph(vol, seg_iso, seeds, c);
            CutResult r = min_cut(g, seeds);
            r.iso = seg_iso;
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            std::ofstream(out) << cut_to_json(r).dump() << '\n';
            std::cout << json{{"node_count", r.node_count}, {"cut_weight", r.cut_weight}, {"solve_ms", ms}}.dump() << "\n";
        } else if (*bake) {
            const CutResult cut = cut_from_json(read_json_file(cut_path));
            Scene scene;
            std::string volume_ref;
            if (!scene_in.empty()) {
                scene = load_scene(scene_in, map_size);
                volume_ref = std::filesystem::absolute(
                                 std::filesystem::path(scene_in).parent_path() /
                                 read_json_file(scene_in).at("volume_ref").get<std::string>())
                                 .string();
            } else {
                if (volume.empty()) throw ConfigError("bake needs --volume or --scene");
                scene.volume = std::make_shared<const ScalarVolume>(load_volume_pair(volume));
                scene.labels = std::make_shared<const LabelVolume>(scene.volume->cell_dims());
                volume_ref = std::filesystem::absolute(volume_paths(volume).second).string();
            }
            if (!camera_path.empty()) scene.camera = camera_from_json(read_json_file(camera_path));
            const double s_iso = bake_iso->count() ? iso : cut.iso;
            scene.labels = std::make_shared<const LabelVolume>(
                bake_structure(*scene.labels, side == "fg" ? cut.foreground_cells : cut.background_cells, structure_id));
            scene.structures.insert_or_assign(structure_id,
                                              SurfaceStructure::make(structure_id, s_iso, load_tf(tf_path), map_size));
            const auto h = scene.labels->histogram();
            for (auto it = scene.structures.begin(); it != scene.structures.end();)
                it = h[static_cast<std::size_t>(it->first)] == 0 ? scene.structures.erase(it) : std::next(it);
            save_scene(scene, out_dir, stem, volume_ref);
            std::cout << (std::filesystem::path(out_dir) / (stem + ".scene.json")).string() << "\n";
        } else if (*compose) {
            Scene scene = load_scene(scene_path, map_size);
            if (!camera_path.empty()) scene.camera = camera_from_json(read_json_file(camera_path));
            RenderOptions opt = base_options("", workers);
            std::optional<PeelBuffer> peel;
            if (!peel_path.empty()) {
                peel = build_peel_buffer(peel_windows_from_json(read_json_file(peel_path)), scene.camera.image);
                opt.peel = &*peel;
            }
            const auto res = render_scene(scene, opt);
            write_png(out, res.image);
            if (!ids_path.empty()) write_ids(ids_path, res.ids);
        } else if (*bench) {
            const auto vol = load_volume_pair(volume);
            const Camera cam = camera_from_json(read_json_file(camera_path));
            auto tf = load_tf(tf_path);
            if (bench_iso->count()) tf.params.isovalue = iso;
            RenderOptions opt;
            opt.workers = workers;
            const double d = sample_dist > 0.0 ? sample_dist : tf.params.std_sample_distance;
            const auto mono = SurfaceStyle::monotone(tf.params.isovalue);
            tf.params.mode = RateMode::shallow;
            const auto shallow = SurfaceStyle::enhanced(tf);
            tf.params.mode = RateMode::deep;
            const auto deep = SurfaceStyle::enhanced(tf);
            const auto ttf = TransitionalTF1D::from(tf);
            FvrOptions fo;
            fo.workers = workers;
            FvrOptions fo_shaded = fo;
            fo_shaded.shade = true;
            json report = {{"image", {cam.image.width, cam.image.height}},
                           {"dims", {vol.dims().x, vol.dims().y, vol.dims().z}},
                           {"isovalue", tf.params.isovalue},
                           {"sample_dist", d},
                           {"warmup", warmup}};
            report.update(time_frames(
                warmup, frames,
                {{"mono", [&] { render_isosurface(vol, cam, mono, opt); }},
                 {"ceir_shallow", [&] { render_isosurface(vol, cam, shallow, opt); }},
                 {"ceir_deep", [&] { render_isosurface(vol, cam, deep, opt); }},
                 {"fvr", [&] { render_fvr(vol, cam, ttf, d, fo); }},
                 {"fvr_shaded", [&] { render_fvr(vol, cam, ttf, d, fo_shaded); }}}));
            const std::string text = report.dump(2);
            std::cout << text << "\n";
            if (!out.empty()) std::ofstream(out) << text << '\n';
        }
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << msg << "\n";
        return 1;
    }
    return 0;
}
