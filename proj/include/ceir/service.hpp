// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ceir/isoseg.hpp"
#include "ceir/scene.hpp"
#include "ceir/synthetic.hpp"

namespace ceir {

struct ServiceConfig {
    int max_sessions = 16;
    int map_size = 256;
    unsigned render_workers = 0;
};

/// Transport-neutral reply. `mutated` tells the transport to push a new frame afterwards.
struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
    std::map<std::string, std::string> headers;
    bool mutated = false;
    std::string session_id;

    static ApiResponse json(int status, const nlohmann::json& j) {
        ApiResponse r;
        r.status = status;
        r.body = j.dump();
        return r;
    }
};

/// A 400 that names the offending field.
struct BadRequest : Error {
    BadRequest(std::string f, const std::string& what) : Error(what), field(std::move(f)) {}
    std::string field;
};

struct HttpError : Error {
    HttpError(int s, const std::string& what) : Error(what), status(s) {}
    int status;
};

struct FramePush {
    std::uint64_t revision = 0;
    int width = 0, height = 0;
    std::shared_ptr<const std::vector<std::uint8_t>> png;
};

enum class SessionView { iso, scene };

namespace detail {

struct RenderedFrame {
    std::uint64_t revision = 0;
    std::shared_ptr<const RenderOutput> output;
    std::shared_ptr<const std::vector<std::uint8_t>> png;
};

struct Session {
    std::mutex mutex;
    std::string id;
    VolumePtr volume;
    Camera camera;
    SurfaceStyle style = SurfaceStyle::monotone(0.5);
    std::optional<TransferFunctionDoc> tf;
    std::vector<PeelWindow> peel_windows;
    SeedSets seeds;
    std::optional<CutResult> cut;
    std::shared_ptr<const LabelVolume> labels;
    std::map<int, SurfaceStructure> structures;
    SessionView view = SessionView::iso;
    std::uint64_t revision = 1;
    RenderedFrame frame;

    std::mutex push_mutex;
    std::uint64_t pushed_revision = 0;
    std::map<std::uint64_t, std::function<void(const FramePush&)>> subscribers;
    std::uint64_t next_subscriber = 1;
};

template <class T>
T field(const nlohmann::json& body, const char* name) {
    if (!body.contains(name)) throw BadRequest(name, std::string("missing field '") + name + "'");
    try {
        return body.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw BadRequest(name, std::string("field '") + name + "' has the wrong type");
    }
}

/// Runs `f`, rethrowing library configuration errors as a 400 on `name`.
template <class F>
auto parse_field(const char* name, F&& f) {
    try {
        return f();
    } catch (const BadRequest&) {
        throw;
    } catch (const Error& e) {
        throw BadRequest(name, e.what());
    } catch (const nlohmann::json::exception& e) {
        throw BadRequest(name, e.what());
    }
}

inline std::string random_token() {
    static std::atomic<std::uint64_t> counter{0};
    std::random_device rd;
    std::mt19937_64 rng((static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ counter.fetch_add(1));
    static constexpr char hex[] = "0123456789abcdef";
    std::string s(16, '0');
    for (char& c : s) c = hex[rng() & 15];
    return s;
}

inline std::vector<std::string_view> split_path(std::string_view target) {
    if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
    std::vector<std::string_view> parts;
    while (!target.empty()) {
        if (target.front() == '/') {
            target.remove_prefix(1);
            continue;
        }
        const auto slash = target.find('/');
        parts.push_back(target.substr(0, slash));
        if (slash == std::string_view::npos) break;
        target.remove_prefix(slash);
    }
    return parts;
}

}  // namespace detail

/// Session store and endpoint logic behind the HTTP and WebSocket transports.
class Service {
public:
    explicit Service(ServiceConfig cfg = {}) : cfg_(cfg) {}

    const ServiceConfig& config() const { return cfg_; }

    /// HTTP entry point. `accept` selects PNG (default) or raw RGBA frames.
    ApiResponse handle(std::string_view method, std::string_view target, const std::string& body,
                       std::string_view accept = {}) {
        try {
            return route(method, target, body, accept);
        } catch (const BadRequest& e) {
            return ApiResponse::json(400, {{"error", e.what()}, {"field", e.field}});
        } catch (const HttpError& e) {
            return ApiResponse::json(e.status, {{"error", e.what()}});
        } catch (const SeedError& e) {
            return ApiResponse::json(400, {{"error", e.what()}, {"field", "seeds"}, {"cell", e.cell_id}});
        } catch (const ConfigError& e) {
            return ApiResponse::json(400, {{"error", e.what()}});
        } catch (const std::exception& e) {
            return ApiResponse::json(500, {{"error", e.what()}});
        }
    }

    /// WebSocket command: the same JSON bodies as HTTP, addressed by operation name.
    ApiResponse command(const std::string& session_id, const nlohmann::json& msg) {
        std::string op;
        nlohmann::json body;
        try {
            op = detail::field<std::string>(msg, "op");
            body = msg.value("body", nlohmann::json::object());
        } catch (const BadRequest& e) {
            return ApiResponse::json(400, {{"error", e.what()}, {"field", e.field}});
        }
        static const std::map<std::string, std::pair<std::string, std::string>> ops = {
            {"camera", {"PUT", "camera"}},          {"iso", {"PUT", "iso"}},
            {"peel-windows", {"POST", "peel-windows"}}, {"clear-peel-windows", {"DELETE", "peel-windows"}},
            {"pick", {"POST", "pick"}},              {"clear-seeds", {"DELETE", "seeds"}},
            {"segment", {"POST", "segment"}},        {"structures", {"POST", "structures"}},
            {"list-structures", {"GET", "structures"}}, {"state", {"GET", "state"}},
            {"export", {"POST", "export"}},          {"view", {"PUT", "view"}}};
        if (op == "edit-structure" || op == "delete-structure") {
            if (!body.contains("id") || !body.at("id").is_number_integer())
                return ApiResponse::json(400, {{"error", "missing integer field 'id'"}, {"field", "id"}});
            const auto path = "/sessions/" + session_id + "/structures/" + std::to_string(body.at("id").get<int>());
            return handle(op == "edit-structure" ? "PUT" : "DELETE", path, body.dump());
        }
        const auto it = ops.find(op);
        if (it == ops.end()) return ApiResponse::json(400, {{"error", "unknown op '" + op + "'"}, {"field", "op"}});
        return handle(it->second.first, "/sessions/" + session_id + "/" + it->second.second, body.dump());
    }

    bool has_session(const std::string& id) const {
        std::lock_guard lock(map_mutex_);
        return sessions_.count(id) > 0;
    }

    std::size_t session_count() const {
        std::lock_guard lock(map_mutex_);
        return sessions_.size();
    }

    /// Current frame, rendering it if the session changed since the last render.
    FramePush frame(const std::string& id) {
        auto s = get(id);
        const auto f = current_frame(*s);
        return {f.revision, f.output->image.dims().width, f.output->image.dims().height, f.png};
    }

    /// Renders the current frame and delivers it to every subscriber of the session, unless a
    /// frame of this revision or a newer one was already pushed.
    void publish(const std::string& id) {
        std::shared_ptr<detail::Session> s;
        try {
            s = get(id);
        } catch (const HttpError&) {
            return;
        }
        {
            std::lock_guard lock(s->push_mutex);
            if (s->subscribers.empty()) return;
        }
        const FramePush push = frame(id);
        std::lock_guard lock(s->push_mutex);
        if (push.revision <= s->pushed_revision) return;
        s->pushed_revision = push.revision;
        for (auto& [token, cb] : s->subscribers) cb(push);
    }

    std::uint64_t subscribe(const std::string& id, std::function<void(const FramePush&)> cb) {
        auto s = get(id);
        std::lock_guard lock(s->push_mutex);
        const auto token = s->next_subscriber++;
        s->subscribers.emplace(token, std::move(cb));
        return token;
    }

    void unsubscribe(const std::string& id, std::uint64_t token) {
        std::shared_ptr<detail::Session> s;
        try {
            s = get(id);
        } catch (const HttpError&) {
            return;
        }
        std::lock_guard lock(s->push_mutex);
        s->subscribers.erase(token);
    }

private:
    using Json = nlohmann::json;

    ApiResponse route(std::string_view method, std::string_view target, const std::string& body_text,
                      std::string_view accept) {
        const auto parts = detail::split_path(target);
        if (parts.empty() || parts[0] != "sessions") throw HttpError(404, "no such endpoint");
        auto body = [&]() -> Json {
            if (body_text.empty()) return Json::object();
            try {
                Json j = Json::parse(body_text);
                if (!j.is_object()) throw BadRequest("body", "request body must be a JSON object");
                return j;
            } catch (const Json::parse_error& e) {
                throw BadRequest("body", std::string("malformed JSON: ") + e.what());
            }
        };
        if (parts.size() == 1) {
            if (method == "POST") return create_session(body());
            throw HttpError(405, "method not allowed");
        }
        const std::string id(parts[1]);
        auto s = get(id);
        if (parts.size() == 2) {
            if (method == "DELETE") {
                std::lock_guard lock(map_mutex_);
                sessions_.erase(id);
                return ApiResponse::json(200, {{"deleted", id}});
            }
            if (method == "GET") return state(*s);
            throw HttpError(405, "method not allowed");
        }
        if (parts.size() == 4 && parts[2] == "structures") {
            int sid = 0;
            const auto sv = parts[3];
            if (std::from_chars(sv.data(), sv.data() + sv.size(), sid).ptr != sv.data() + sv.size() || sv.empty())
                throw BadRequest("id", "structure id must be an integer");
            ApiResponse r;
            if (method == "PUT") r = put_structure(*s, sid, body());
            else if (method == "DELETE") r = delete_structure(*s, sid);
            else throw HttpError(405, "method not allowed");
            r.session_id = id;
            return r;
        }
        if (parts.size() != 3) throw HttpError(404, "no such endpoint");
        const std::string_view res = parts[2];
        ApiResponse r;
        if (res == "camera" && method == "PUT") r = put_camera(*s, body());
        else if (res == "camera" && method == "GET") r = ApiResponse::json(200, camera_to_json(locked(*s)->camera));
        else if (res == "iso" && method == "PUT") r = put_iso(*s, body());
        else if (res == "peel-windows" && method == "POST") r = post_peel(*s, body());
        else if (res == "peel-windows" && method == "DELETE") r = delete_peel(*s);
        else if (res == "peel-windows" && method == "GET")
            r = ApiResponse::json(200, peel_windows_to_json(locked(*s)->peel_windows));
        else if (res == "frame" && method == "GET") r = get_frame(*s, accept);
        else if (res == "pick" && method == "POST") r = post_pick(*s, body());
        else if (res == "seeds" && method == "DELETE") r = delete_seeds(*s);
        else if (res == "seeds" && method == "GET") r = get_seeds(*s);
        else if (res == "segment" && method == "POST") r = post_segment(*s, body());
        else if (res == "structures" && method == "POST") r = post_structure(*s, body());
        else if (res == "structures" && method == "GET") r = get_structures(*s);
        else if (res == "export" && method == "POST") r = post_export(*s, body());
        else if (res == "state" && method == "GET") r = state(*s);
        else if (res == "view" && method == "PUT") r = put_view(*s, body());
        else if (res == "frame" || res == "camera" || res == "iso" || res == "peel-windows" || res == "pick" ||
                 res == "seeds" || res == "segment" || res == "structures" || res == "export" || res == "state" || res == "view")
            throw HttpError(405, "method not allowed");
        else
            throw HttpError(404, "no such endpoint");
        r.session_id = id;
        return r;
    }

    struct Locked {
        std::unique_lock<std::mutex> lock;
        detail::Session* s;
        detail::Session* operator->() const { return s; }
    };
    static Locked locked(detail::Session& s) { return {std::unique_lock(s.mutex), &s}; }

    std::shared_ptr<detail::Session> get(const std::string& id) const {
        std::lock_guard lock(map_mutex_);
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) throw HttpError(404, "unknown session '" + id + "'");
        return it->second;
    }

    static ApiResponse mutation(detail::Session& s, Json extra = Json::object()) {
        extra["revision"] = ++s.revision;
        ApiResponse r = ApiResponse::json(200, extra);
        r.mutated = true;
        return r;
    }

    ApiResponse create_session(const Json& body) {
        auto s = std::make_shared<detail::Session>();
        if (body.contains("volume")) {
            const auto path = detail::field<std::string>(body, "volume");
            s->volume = detail::parse_field("volume", [&] { return std::make_shared<const ScalarVolume>(load_volume_pair(path)); });
        } else if (body.contains("synthetic")) {
            const Json& syn = body.at("synthetic");
            s->volume = detail::parse_field("synthetic", [&] {
                SyntheticSpec spec;
                spec.kind = parse_phantom_kind(syn.at("kind").get<std::string>());
                const Json& d = syn.at("dims");
                spec.dims = d.is_array() ? Vec3i{d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()}
                                         : Vec3i{d.get<int>(), d.get<int>(), d.get<int>()};
                if (spec.dims.x < 2 || spec.dims.y < 2 || spec.dims.z < 2 || spec.dims.x > 1024 || spec.dims.y > 1024 ||
                    spec.dims.z > 1024)
                    throw ConfigError("dims must be in 2..1024");
                spec.params = syn.value("params", std::vector<double>{});
                return std::make_shared<const ScalarVolume>(generate_synthetic(spec));
            });
        } else {
            throw BadRequest("volume", "body needs 'volume' (sidecar path) or 'synthetic' {kind, dims}");
        }
        s->labels = std::make_shared<const LabelVolume>(s->volume->cell_dims());
        if (body.contains("camera")) s->camera = detail::parse_field("camera", [&] { return camera_from_json(body.at("camera")); });
        if (body.contains("iso")) apply_iso(*s, body.at("iso"));
        std::lock_guard lock(map_mutex_);
        if (static_cast<int>(sessions_.size()) >= cfg_.max_sessions) throw HttpError(503, "session limit reached");
        do s->id = detail::random_token();
        while (sessions_.count(s->id));
        sessions_.emplace(s->id, s);
        ApiResponse r = ApiResponse::json(201, {{"session", s->id}, {"revision", s->revision}});
        r.session_id = s->id;
        return r;
    }

    ApiResponse state(detail::Session& s) {
        auto l = locked(s);
        const Vec3i d = s.volume->dims();
        return ApiResponse::json(200, {{"session", s.id},
                                       {"revision", s.revision},
                                       {"dims", {d.x, d.y, d.z}},
                                       {"camera", camera_to_json(s.camera)},
                                       {"isovalue", s.style.params.isovalue},
                                       {"mode", s.style.color == ColorMode::mono ? "mono" : "enhanced"},
                                       {"view", s.view == SessionView::iso ? "iso" : "scene"},
                                       {"peel_windows", peel_windows_to_json(s.peel_windows)["rects"]},
                                       {"seeds", {{"fg", s.seeds.foreground().size()}, {"bg", s.seeds.background().size()}}},
                                       {"has_cut", s.cut.has_value()},
                                       {"structures", s.structures.size()}});
    }

    ApiResponse put_camera(detail::Session& s, const Json& body) {
        const Camera cam = detail::parse_field("camera", [&] { return camera_from_json(body); });
        auto l = locked(s);
        s.camera = cam;
        return mutation(s);
    }

    void apply_iso(detail::Session& s, const Json& body) {
        const double iso = detail::field<double>(body, "isovalue");
        if (!(iso >= 0.0 && iso <= 1.0)) throw BadRequest("isovalue", "isovalue must be in [0,1]");
        const std::string mode = body.value("mode", body.contains("tf") ? "enhanced" : "mono");
        if (mode == "mono") {
            s.style = SurfaceStyle::monotone(iso);
            s.tf.reset();
        } else if (mode == "enhanced" || mode == "shallow" || mode == "deep") {
            if (!body.contains("tf")) throw BadRequest("tf", "enhanced mode needs a transfer function");
            auto tf = detail::parse_field("tf", [&] { return tf_from_json(body.at("tf")); });
            tf.params.isovalue = iso;
            if (mode == "shallow") tf.params.mode = RateMode::shallow;
            if (mode == "deep") tf.params.mode = RateMode::deep;
            s.style = SurfaceStyle::enhanced(tf, cfg_.map_size);
            s.tf = tf;
        } else {
            throw BadRequest("mode", "mode must be mono, enhanced, shallow or deep");
        }
        s.view = SessionView::iso;
    }

    ApiResponse put_iso(detail::Session& s, const Json& body) {
        auto l = locked(s);
        detail::Session probe;  // validate before touching the session
        apply_iso(probe, body);
        s.style = probe.style;
        s.tf = probe.tf;
        if (s.cut && s.cut->iso != s.style.params.isovalue) s.cut.reset();
        s.view = SessionView::iso;
        return mutation(s, {{"isovalue", s.style.params.isovalue}});
    }

    ApiResponse post_peel(detail::Session& s, const Json& body) {
        const auto w = detail::parse_field("rects", [&] { return peel_windows_from_json(body); });
        auto l = locked(s);
        s.peel_windows = w;
        return mutation(s, {{"windows", w.size()}});
    }

    ApiResponse delete_peel(detail::Session& s) {
        auto l = locked(s);
        s.peel_windows.clear();
        return mutation(s);
    }

    // --- rendering --------------------------------------------------------------------------

    detail::RenderedFrame current_frame(detail::Session& s) {
        // Snapshot under the lock, render outside it, store if nothing changed meanwhile.
        std::unique_lock lock(s.mutex);
        if (s.frame.output && s.frame.revision == s.revision) return s.frame;
        const std::uint64_t rev = s.revision;
        const VolumePtr vol = s.volume;
        const Camera cam = s.camera;
        const SurfaceStyle style = s.style;
        const auto windows = s.peel_windows;
        const SeedSets seeds = s.seeds;
        const SessionView view = s.view;
        Scene scene;
        if (view == SessionView::scene) {
            scene.volume = vol;
            scene.labels = s.labels;
            scene.structures = s.structures;
            scene.camera = cam;
        }
        lock.unlock();

        const PeelBuffer peel = build_peel_buffer(windows, cam.image);
        RenderOptions opt;
        opt.peel = &peel;
        opt.seeds = &seeds;
        opt.workers = cfg_.render_workers;
        auto out = std::make_shared<RenderOutput>(view == SessionView::scene ? render_scene(scene, opt)
                                                                             : render_isosurface(*vol, cam, style, opt));
        auto png = std::make_shared<const std::vector<std::uint8_t>>(encode_png(out->image));
        detail::RenderedFrame f{rev, std::move(out), std::move(png)};

        lock.lock();
        if (s.revision == rev && (!s.frame.output || s.frame.revision < rev)) s.frame = f;
        return f;
    }

    ApiResponse get_frame(detail::Session& s, std::string_view accept) {
        const auto f = current_frame(s);
        ApiResponse r;
        const auto& img = f.output->image;
        if (accept.find("image/x-rgba") != std::string_view::npos ||
            accept.find("application/octet-stream") != std::string_view::npos) {
            const auto rgba = img.to_rgba8();
            r.body.assign(rgba.begin(), rgba.end());
            r.content_type = "application/octet-stream";
        } else {
            r.body.assign(f.png->begin(), f.png->end());
            r.content_type = "image/png";
        }
        r.headers["X-Revision"] = std::to_string(f.revision);
        r.headers["X-Width"] = std::to_string(img.dims().width);
        r.headers["X-Height"] = std::to_string(img.dims().height);
        return r;
    }

    // --- exploration ------------------------------------------------------------------------

    ApiResponse post_pick(detail::Session& s, const Json& body) {
        const auto target = detail::field<std::string>(body, "target");
        if (target != "fg" && target != "bg") throw BadRequest("target", "target must be \"fg\" or \"bg\"");
        if (!body.contains("pixels")) throw BadRequest("pixels", "missing field 'pixels'");
        const auto pixels = detail::parse_field("pixels", [&] { return pixels_from_json(body.at("pixels")); });
        const auto f = current_frame(s);
        const auto ids = detail::parse_field("pixels", [&] { return pick_voxels(f.output->ids, pixels); });
        auto l = locked(s);
        std::vector<std::int64_t> added;
        for (std::int64_t id : ids) {
            const auto& side = target == "fg" ? s.seeds.foreground() : s.seeds.background();
            if (std::binary_search(side.begin(), side.end(), id)) continue;
            if (target == "fg") s.seeds.add_foreground(id);
            else s.seeds.add_background(id);
            added.push_back(id);
        }
        return mutation(s, {{"added", added}, {"frame_revision", f.revision}});
    }

    ApiResponse delete_seeds(detail::Session& s) {
        auto l = locked(s);
        s.seeds.clear();
        return mutation(s);
    }

    ApiResponse get_seeds(detail::Session& s) {
        auto l = locked(s);
        return ApiResponse::json(200, {{"fg", s.seeds.foreground()}, {"bg", s.seeds.background()}});
    }

    ApiResponse post_segment(detail::Session& s, const Json& body) {
        std::optional<CropBounds> crop;
        if (body.contains("crop") && !body.at("crop").is_null())
            crop = detail::parse_field("crop", [&] { return crop_from_json(body.at("crop")); });
        auto l = locked(s);
        if (s.seeds.foreground().empty() || s.seeds.background().empty())
            throw HttpError(409, "segmentation needs both foreground and background seeds");
        const double iso = s.style.params.isovalue;
        const CropBounds c = crop.value_or(CropBounds::full(*s.volume));
        try {
            c.validate(*s.volume);
        } catch (const ConfigError& e) {
            throw BadRequest("crop", e.what());
        }
        const auto t0 = std::chrono::steady_clock::now();
        const IsoGraph g = build_graph(*s.volume, iso, s.seeds, c);
        CutResult cut = min_cut(g, s.seeds);
        cut.iso = iso;
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        s.cut = std::move(cut);
        return mutation(s, {{"node_count", s.cut->node_count},
                            {"cut_weight", s.cut->cut_weight},
                            {"solve_ms", ms},
                            {"foreground_cells", s.cut->foreground_cells.size()},
                            {"background_cells", s.cut->background_cells.size()}});
    }

    ApiResponse post_structure(detail::Session& s, const Json& body) {
        const auto side = detail::field<std::string>(body, "side");
        if (side != "fg" && side != "bg") throw BadRequest("side", "side must be \"fg\" or \"bg\"");
        const int id = detail::field<int>(body, "id");
        if (id < 1 || id > kMaxStructures) throw BadRequest("id", "structure id must be in 1..255");
        if (!body.contains("tf")) throw BadRequest("tf", "missing field 'tf'");
        auto tf = detail::parse_field("tf", [&] { return tf_from_json(body.at("tf")); });
        const double iso = body.contains("isovalue") ? detail::field<double>(body, "isovalue") : tf.params.isovalue;
        auto structure = detail::parse_field("isovalue", [&] { return SurfaceStructure::make(id, iso, tf, cfg_.map_size); });
        auto l = locked(s);
        if (!s.cut) throw HttpError(409, "no segmentation result to bake");
        const auto& cells = side == "fg" ? s.cut->foreground_cells : s.cut->background_cells;
        s.labels = std::make_shared<const LabelVolume>(bake_structure(*s.labels, cells, id));
        s.structures.insert_or_assign(id, std::move(structure));
        // Drop structures whose every cell was overwritten by this bake.
        const auto h = s.labels->histogram();
        for (auto it = s.structures.begin(); it != s.structures.end();)
            it = h[static_cast<std::size_t>(it->first)] == 0 ? s.structures.erase(it) : std::next(it);
        s.seeds.clear();
        s.view = SessionView::scene;
        return mutation(s, {{"id", id}, {"cells", cells.size()}});
    }

    ApiResponse get_structures(detail::Session& s) {
        auto l = locked(s);
        const auto h = s.labels->histogram();
        Json list = Json::array();
        for (const auto& [id, st] : s.structures)
            list.push_back({{"id", id}, {"isovalue", st.isovalue()}, {"cells", h[static_cast<std::size_t>(id)]},
                            {"tf", tf_to_json(st.tf)}});
        return ApiResponse::json(200, {{"structures", list}, {"view", s.view == SessionView::iso ? "iso" : "scene"}});
    }

    ApiResponse put_structure(detail::Session& s, int sid, const Json& body) {
        std::optional<TransferFunctionDoc> tf;
        if (body.contains("tf")) tf = detail::parse_field("tf", [&] { return tf_from_json(body.at("tf")); });
        std::optional<double> iso;
        if (body.contains("isovalue")) iso = detail::field<double>(body, "isovalue");
        auto l = locked(s);
        const auto it = s.structures.find(sid);
        if (it == s.structures.end()) throw HttpError(404, "unknown structure " + std::to_string(sid));
        const TransferFunctionDoc doc = tf.value_or(it->second.tf);
        const double v = iso.value_or(tf ? doc.params.isovalue : it->second.isovalue());
        it->second = detail::parse_field("isovalue", [&] { return SurfaceStructure::make(sid, v, doc, cfg_.map_size); });
        s.view = SessionView::scene;
        return mutation(s, {{"id", sid}, {"isovalue", v}});
    }

    ApiResponse delete_structure(detail::Session& s, int sid) {
        auto l = locked(s);
        if (!s.structures.erase(sid)) throw HttpError(404, "unknown structure " + std::to_string(sid));
        LabelVolume labels = *s.labels;
        for (std::int64_t c = 0; c < static_cast<std::int64_t>(labels.data().size()); ++c)
            if (labels.at(c) == sid) labels.set(c, 0);
        s.labels = std::make_shared<const LabelVolume>(std::move(labels));
        return mutation(s, {{"deleted", sid}});
    }

    ApiResponse put_view(detail::Session& s, const Json& body) {
        const auto view = detail::field<std::string>(body, "view");
        if (view != "iso" && view != "scene") throw BadRequest("view", "view must be \"iso\" or \"scene\"");
        auto l = locked(s);
        s.view = view == "iso" ? SessionView::iso : SessionView::scene;
        return mutation(s, {{"view", view}});
    }

    ApiResponse post_export(detail::Session& s, const Json& body) {
        const auto dir = detail::field<std::string>(body, "dir");
        const auto stem = body.value("stem", std::string("scene"));
        auto l = locked(s);
        Scene scene;
        scene.volume = s.volume;
        scene.labels = s.labels;
        scene.structures = s.structures;
        scene.camera = s.camera;
        try {
            save_scene(scene, dir, stem);
        } catch (const std::exception& e) {
            throw BadRequest("dir", e.what());
        }
        return ApiResponse::json(200, {{"scene", (std::filesystem::path(dir) / (stem + ".scene.json")).string()},
                                       {"revision", s.revision}});
    }

    ServiceConfig cfg_;
    mutable std::mutex map_mutex_;
    std::map<std::string, std::shared_ptr<detail::Session>> sessions_;
};

}  // namespace ceir
