// Copyright The ceir Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <httplib.h>

#include "ceir/server.hpp"
#include "test_support.hpp"

namespace {

using namespace ceir;
using nlohmann::json;

const std::filesystem::path kDemos = CEIR_DEMO_DIR;

json demo(const char* name) { return read_json_file(kDemos / name); }

json front_camera(int size) {
    json cam = demo("camera_front.json");
    cam["image_dims"] = {size, size};
    return cam;
}

// Pixel strokes over the two lobes of the 48^3 dumbbell seen from the front at 128^2.
json stroke(int x0, int x1) {
    json px = json::array();
    for (int y = 60; y <= 68; y += 2)
        for (int x = x0; x <= x1; x += 2) px.push_back({x, y});
    return px;
}
const json kLeftLobe = stroke(32, 42);
const json kRightLobe = stroke(86, 96);

json body_of(const ApiResponse& r) { return json::parse(r.body); }

std::string create(Service& svc, const json& body) {
    const auto r = svc.handle("POST", "/sessions", body.dump());
    EXPECT_EQ(r.status, 201) << r.body;
    return body_of(r).at("session").get<std::string>();
}

json dumbbell_session() {
    return {{"synthetic", {{"kind", "dumbbell"}, {"dims", 48}}}, {"camera", front_camera(128)}};
}

// --- endpoint logic ------------------------------------------------------------------------

TEST(Service, CreateStateDelete) {
    Service svc;
    const auto id = create(svc, {{"synthetic", {{"kind", "sphere"}, {"dims", {20, 24, 28}}}}});
    const auto st = body_of(svc.handle("GET", "/sessions/" + id + "/state", ""));
    EXPECT_EQ(st["dims"], json({20, 24, 28}));
    EXPECT_EQ(st["view"], "iso");
    EXPECT_EQ(st["mode"], "mono");
    EXPECT_EQ(svc.handle("GET", "/sessions/" + id, "").status, 200);
    EXPECT_EQ(svc.handle("DELETE", "/sessions/" + id, "").status, 200);
    EXPECT_EQ(svc.handle("GET", "/sessions/" + id, "").status, 404);
    EXPECT_EQ(svc.session_count(), 0u);
}

TEST(Service, CreateFromVolumeFile) {
    const auto dir = ceir::testing::temp_dir("service_volume");
    save_volume_pair(ceir::testing::phantom(PhantomKind::sphere, 16), dir / "s.raw");
    Service svc;
    const auto id = create(svc, {{"volume", (dir / "s.json").string()}});
    EXPECT_EQ(body_of(svc.handle("GET", "/sessions/" + id, ""))["dims"], json({16, 16, 16}));
    const auto bad = svc.handle("POST", "/sessions", json{{"volume", (dir / "none.json").string()}}.dump());
    EXPECT_EQ(bad.status, 400);
    EXPECT_EQ(body_of(bad)["field"], "volume");
}

TEST(Service, ErrorStatuses) {
    Service svc({.max_sessions = 1});
    EXPECT_EQ(svc.handle("GET", "/nothing", "").status, 404);
    EXPECT_EQ(svc.handle("GET", "/sessions/abc/frame", "").status, 404);
    EXPECT_EQ(svc.handle("GET", "/sessions", "").status, 405);

    auto r = svc.handle("POST", "/sessions", "{not json");
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(body_of(r)["field"], "body");
    r = svc.handle("POST", "/sessions", json{{"synthetic", {{"kind", "teapot"}, {"dims", 8}}}}.dump());
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(body_of(r)["field"], "synthetic");

    const auto id = create(svc, {{"synthetic", {{"kind", "sphere"}, {"dims", 12}}}});
    EXPECT_EQ(svc.handle("POST", "/sessions", json{{"synthetic", {{"kind", "sphere"}, {"dims", 8}}}}.dump()).status, 503);
    const std::string base = "/sessions/" + id;
    EXPECT_EQ(svc.handle("PATCH", base + "/camera", "{}").status, 405);
    EXPECT_EQ(svc.handle("GET", base + "/teapot", "").status, 404);

    r = svc.handle("PUT", base + "/iso", json{{"isovalue", 1.5}}.dump());
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(body_of(r)["field"], "isovalue");
    r = svc.handle("PUT", base + "/iso", json{{"isovalue", 0.5}, {"mode", "shallow"}}.dump());
    EXPECT_EQ(body_of(r)["field"], "tf");
    r = svc.handle("PUT", base + "/camera", json{{"eye", {0, 0, 0}}}.dump());
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(body_of(r)["field"], "camera");
    r = svc.handle("POST", base + "/pick", json{{"pixels", {{1, 1}}}, {"target", "middle"}}.dump());
    EXPECT_EQ(body_of(r)["field"], "target");
    r = svc.handle("POST", base + "/peel-windows", json{{"rects", {{1, 2}}}}.dump());
    EXPECT_EQ(body_of(r)["field"], "rects");

    EXPECT_EQ(svc.handle("POST", base + "/segment", "{}").status, 409);
    const json tf = demo("tf_red.json");
    EXPECT_EQ(svc.handle("POST", base + "/structures", json{{"side", "fg"}, {"id", 1}, {"tf", tf}}.dump()).status, 409);
    // Rejected requests leave the session untouched.
    EXPECT_EQ(body_of(svc.handle("GET", base, ""))["revision"], 1);
}

TEST(Service, RevisionsAndCachedFrames) {
    Service svc;
    const auto id = create(svc, {{"synthetic", {{"kind", "sphere"}, {"dims", 24}}}, {"camera", front_camera(48)}});
    const std::string base = "/sessions/" + id;
    const auto f1 = svc.handle("GET", base + "/frame", "");
    const auto f2 = svc.handle("GET", base + "/frame", "");
    EXPECT_EQ(f1.content_type, "image/png");
    EXPECT_EQ(f1.body, f2.body);
    EXPECT_EQ(f1.headers.at("X-Revision"), "1");

    std::uint64_t last = 1;
    for (const auto& [m, path, body] : std::vector<std::tuple<std::string, std::string, json>>{
             {"PUT", "/camera", front_camera(40)},
             {"PUT", "/iso", {{"isovalue", 0.4}}},
             {"POST", "/peel-windows", {{"rects", {{0, 0, 10, 10}}}}},
             {"DELETE", "/peel-windows", {}},
             {"DELETE", "/seeds", {}}}) {
        const auto r = svc.handle(m, base + path, body.is_null() ? "" : body.dump());
        ASSERT_EQ(r.status, 200) << path << r.body;
        EXPECT_TRUE(r.mutated);
        const auto rev = body_of(r)["revision"].get<std::uint64_t>();
        EXPECT_GT(rev, last);
        last = rev;
    }
    const auto f3 = svc.handle("GET", base + "/frame", "");
    EXPECT_EQ(f3.headers.at("X-Revision"), std::to_string(last));
    EXPECT_EQ(f3.headers.at("X-Width"), "40");
    const auto raw = svc.handle("GET", base + "/frame", "", "image/x-rgba");
    EXPECT_EQ(raw.body.size(), 40u * 40u * 4u);
    EXPECT_FALSE(svc.handle("GET", base + "/frame", "").mutated);
}

TEST(Service, PickMissAddsNothing) {
    Service svc;
    const auto id = create(svc, {{"synthetic", {{"kind", "sphere"}, {"dims", 24}}}, {"camera", front_camera(64)}});
    const auto r = svc.handle("POST", "/sessions/" + id + "/pick", json{{"pixels", {{0, 0}, {63, 63}}}, {"target", "fg"}}.dump());
    ASSERT_EQ(r.status, 200);
    EXPECT_TRUE(body_of(r)["added"].empty());
    const auto hit = svc.handle("POST", "/sessions/" + id + "/pick", json{{"pixels", {{32, 32}, {32, 32}}}, {"target", "fg"}}.dump());
    EXPECT_EQ(body_of(hit)["added"].size(), 1u);
    const auto again = svc.handle("POST", "/sessions/" + id + "/pick", json{{"pixels", {{32, 32}}}, {"target", "fg"}}.dump());
    EXPECT_TRUE(body_of(again)["added"].empty());
    // Strokes may leave the canvas; those pixels count as misses.
    const auto out = svc.handle("POST", "/sessions/" + id + "/pick", json{{"pixels", {{64, 2}, {-1, 5}}}, {"target", "bg"}}.dump());
    EXPECT_EQ(out.status, 200);
    EXPECT_TRUE(body_of(out)["added"].empty());
    const auto bad = svc.handle("POST", "/sessions/" + id + "/pick", json{{"pixels", {{1}}}, {"target", "bg"}}.dump());
    EXPECT_EQ(bad.status, 400);
    EXPECT_EQ(body_of(bad)["field"], "pixels");
}

TEST(Service, CommandsMirrorRoutes) {
    Service svc;
    const auto id = create(svc, {{"synthetic", {{"kind", "sphere"}, {"dims", 16}}}});
    auto r = svc.command(id, {{"op", "iso"}, {"body", {{"isovalue", 0.3}}}});
    EXPECT_EQ(r.status, 200);
    EXPECT_TRUE(r.mutated);
    EXPECT_EQ(body_of(svc.command(id, {{"op", "state"}}))["isovalue"], 0.3);
    EXPECT_EQ(svc.command(id, {{"op", "fly"}}).status, 400);
    EXPECT_EQ(body_of(svc.command(id, {{"body", {}}}))["field"], "op");
    EXPECT_EQ(svc.command(id, {{"op", "segment"}}).status, 409);
}

TEST(Service, SegmentBakeExport) {
    Service svc;
    const auto id = create(svc, dumbbell_session());
    const std::string base = "/sessions/" + id;
    ASSERT_EQ(svc.handle("POST", base + "/pick", json{{"pixels", kLeftLobe}, {"target", "fg"}}.dump()).status, 200);
    ASSERT_EQ(svc.handle("POST", base + "/pick", json{{"pixels", kRightLobe}, {"target", "bg"}}.dump()).status, 200);
    const auto seg = body_of(svc.handle("POST", base + "/segment", "{}"));
    EXPECT_GT(seg["node_count"].get<int>(), 0);
    EXPECT_GT(seg["cut_weight"].get<double>(), 0.0);
    EXPECT_GT(seg["foreground_cells"].get<int>(), 0);
    EXPECT_GT(seg["background_cells"].get<int>(), 0);

    auto r = svc.handle("POST", base + "/structures", json{{"side", "fg"}, {"id", 1}, {"tf", demo("tf_red.json")}}.dump());
    ASSERT_EQ(r.status, 200) << r.body;
    const auto st = body_of(svc.handle("GET", base + "/state", ""));
    EXPECT_EQ(st["view"], "scene");
    EXPECT_EQ(st["seeds"]["fg"], 0);
    r = svc.handle("POST", base + "/structures", json{{"side", "bg"}, {"id", 2}, {"tf", demo("tf_blue.json")}}.dump());
    ASSERT_EQ(r.status, 200);
    const auto list = body_of(svc.handle("GET", base + "/structures", ""));
    ASSERT_EQ(list["structures"].size(), 2u);
    EXPECT_EQ(list["structures"][0]["cells"].get<std::uint64_t>(), seg["foreground_cells"].get<std::uint64_t>());

    // Rebaking every cell of structure 1 as structure 3 retires structure 1.
    r = svc.handle("POST", base + "/structures", json{{"side", "fg"}, {"id", 3}, {"tf", demo("tf_blue.json")}}.dump());
    const auto after = body_of(svc.handle("GET", base + "/structures", ""))["structures"];
    ASSERT_EQ(after.size(), 2u);
    EXPECT_EQ(after[0]["id"], 2);
    EXPECT_EQ(after[1]["id"], 3);

    // Structures stay editable after baking.
    r = svc.handle("PUT", base + "/structures/2", json{{"isovalue", 0.45}}.dump());
    ASSERT_EQ(r.status, 200) << r.body;
    EXPECT_EQ(body_of(svc.handle("GET", base + "/structures", ""))["structures"][0]["isovalue"], 0.45);
    r = svc.command(id, {{"op", "edit-structure"}, {"body", {{"id", 3}, {"tf", demo("tf_red.json")}}}});
    ASSERT_EQ(r.status, 200) << r.body;
    EXPECT_EQ(svc.handle("PUT", base + "/structures/9", json{{"isovalue", 0.4}}.dump()).status, 404);
    EXPECT_EQ(svc.handle("PUT", base + "/structures/x", "{}").status, 400);
    EXPECT_EQ(svc.handle("PUT", base + "/view", json{{"view", "iso"}}.dump()).status, 200);
    EXPECT_EQ(body_of(svc.handle("GET", base + "/state", ""))["view"], "iso");
    EXPECT_EQ(body_of(svc.handle("PUT", base + "/view", json{{"view", "side"}}.dump()))["field"], "view");
    svc.handle("PUT", base + "/view", json{{"view", "scene"}}.dump());

    const auto dir = ceir::testing::temp_dir("service_export");
    r = svc.handle("POST", base + "/export", json{{"dir", dir.string()}, {"stem", "db"}}.dump());
    ASSERT_EQ(r.status, 200) << r.body;
    const Scene loaded = load_scene(dir / "db.scene.json");
    EXPECT_EQ(loaded.structures.size(), 2u);
    EXPECT_EQ(loaded.structures.at(2).isovalue(), 0.45);

    r = svc.handle("DELETE", base + "/structures/2", "");
    ASSERT_EQ(r.status, 200);
    const auto remaining = body_of(svc.handle("GET", base + "/structures", ""))["structures"];
    ASSERT_EQ(remaining.size(), 1u);
    EXPECT_EQ(remaining[0]["id"], 3);
    EXPECT_EQ(svc.handle("DELETE", base + "/structures/2", "").status, 404);

    // A new isovalue returns to the isosurface view and drops the stale cut.
    svc.handle("PUT", base + "/iso", json{{"isovalue", 0.4}}.dump());
    EXPECT_EQ(body_of(svc.handle("GET", base + "/state", ""))["has_cut"], false);
}

// --- transport -----------------------------------------------------------------------------

class ServerFixture : public ::testing::Test {
protected:
    ServerFixture() : server(svc, "127.0.0.1", 0) { server.start(); }
    ~ServerFixture() override { server.stop(); }

    httplib::Client client() {
        httplib::Client c("127.0.0.1", server.port());
        c.set_read_timeout(60, 0);
        return c;
    }

    Service svc;
    Server server;
};

TEST_F(ServerFixture, HttpFrameIsDecodablePng) {
    auto c = client();
    auto r = c.Post("/sessions", json{{"synthetic", {{"kind", "sphere"}, {"dims", 32}}}}.dump(), "application/json");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 201);
    EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
    const auto id = json::parse(r->body)["session"].get<std::string>();

    json cam = demo("camera_oblique.json");
    cam["image_dims"] = {96, 72};
    r = c.Put("/sessions/" + id + "/camera", cam.dump(), "application/json");
    ASSERT_EQ(r->status, 200);
    r = c.Get("/sessions/" + id + "/frame");
    ASSERT_EQ(r->status, 200);
    EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(r->get_header_value("X-Revision"), "2");
    const auto png = ceir::testing::decode_png({r->body.begin(), r->body.end()});
    EXPECT_EQ(png.width, 96);
    EXPECT_EQ(png.height, 72);

    r = c.Get("/sessions/" + id + "/frame", httplib::Headers{{"Accept", "image/x-rgba"}});
    EXPECT_EQ(r->body.size(), 96u * 72u * 4u);
    r = c.Post("/sessions/" + id + "/pick", json{{"pixels", {{0, 0}}}, {"target", "bg"}}.dump(), "application/json");
    EXPECT_EQ(json::parse(r->body)["added"], json::array());
    r = c.Get("/sessions/nope/frame");
    EXPECT_EQ(r->status, 404);
    r = c.Put("/sessions/" + id + "/iso", "{\"isovalue\":\"high\"}", "application/json");
    EXPECT_EQ(r->status, 400);
    EXPECT_EQ(json::parse(r->body)["field"], "isovalue");
    r = c.Post("/sessions/" + id + "/segment", "{}", "application/json");
    EXPECT_EQ(r->status, 409);
    r = c.Options("/sessions");
    EXPECT_EQ(r->status, 204);
}

class WsClient {
public:
    WsClient(unsigned short port, const std::string& path) : ws_(ioc_) {
        tcp::resolver resolver(ioc_);
        net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", path);
    }

    struct Message {
        bool text;
        std::string data;
    };

    Message read() {
        beast::flat_buffer b;
        ws_.read(b);
        return {ws_.got_text(), beast::buffers_to_string(b.data())};
    }

    /// Reads until a frame header arrives; returns it with the PNG that follows.
    std::pair<json, std::string> read_frame(std::vector<json>* replies = nullptr) {
        for (;;) {
            const auto m = read();
            EXPECT_TRUE(m.text);
            const auto j = json::parse(m.data);
            if (j["type"] == "frame") {
                const auto png = read();
                EXPECT_FALSE(png.text);
                return {j, png.data};
            }
            if (replies) replies->push_back(j);
        }
    }

    void send(const json& j) {
        ws_.text(true);
        ws_.write(net::buffer(j.dump()));
    }

    ~WsClient() {
        beast::error_code ec;
        ws_.close(websocket::close_code::normal, ec);
    }

private:
    net::io_context ioc_;
    websocket::stream<tcp::socket> ws_;
};

TEST_F(ServerFixture, WebSocketPushesFramesAndReplies) {
    auto c = client();
    const auto id =
        json::parse(c.Post("/sessions", json{{"synthetic", {{"kind", "sphere"}, {"dims", 24}}}, {"camera", front_camera(48)}}.dump(),
                           "application/json")
                        ->body)["session"]
            .get<std::string>();
    WsClient ws(server.port(), "/sessions/" + id + "/stream");
    auto [first, png] = ws.read_frame();
    EXPECT_EQ(first["revision"], 1);
    EXPECT_EQ(first["width"], 48);
    EXPECT_EQ(ceir::testing::decode_png({png.begin(), png.end()}).width, 48);

    // Command over the socket: a reply, then a push of the new revision.
    json cam = front_camera(40);
    ws.send({{"op", "camera"}, {"body", cam}});
    std::vector<json> replies;
    auto [second, png2] = ws.read_frame(&replies);
    if (replies.empty()) {
        const auto m = ws.read();
        replies.push_back(json::parse(m.data));
    }
    ASSERT_EQ(replies.size(), 1u);
    EXPECT_EQ(replies[0]["type"], "reply");
    EXPECT_EQ(replies[0]["status"], 200);
    EXPECT_EQ(replies[0]["body"]["revision"], 2);
    EXPECT_EQ(second["revision"], 2);
    EXPECT_EQ(second["width"], 40);

    // An HTTP mutation is pushed to the socket too.
    ASSERT_EQ(c.Put("/sessions/" + id + "/iso", json{{"isovalue", 0.3}}.dump(), "application/json")->status, 200);
    auto [third, png3] = ws.read_frame();
    EXPECT_EQ(third["revision"], 3);
    const auto http_png = c.Get("/sessions/" + id + "/frame")->body;
    EXPECT_EQ(png3, http_png);

    ws.send({{"op", "segment"}});
    const auto err = json::parse(ws.read().data);
    EXPECT_EQ(err["type"], "reply");
    EXPECT_EQ(err["status"], 409);
    ws.send(json("garbage"));
    EXPECT_EQ(json::parse(ws.read().data)["status"], 400);
}

TEST_F(ServerFixture, UpgradeToUnknownSessionIsRejected) {
    EXPECT_THROW(WsClient(server.port(), "/sessions/missing/stream"), beast::system_error);
}

// A scripted session over HTTP renders exactly what the in-process pipeline renders.
TEST_F(ServerFixture, ScriptedDumbbellMatchesInProcessPipeline) {
    auto c = client();
    const json tf_warm = demo("tf_warm.json"), tf_red = demo("tf_red.json"), tf_blue = demo("tf_blue.json");
    const auto id = json::parse(c.Post("/sessions", dumbbell_session().dump(), "application/json")->body)["session"].get<std::string>();
    const std::string base = "/sessions/" + id;
    auto ok = [&](const httplib::Result& r) {
        EXPECT_TRUE(r);
        EXPECT_EQ(r->status, 200) << r->body;
        return json::parse(r->body);
    };
    ok(c.Put(base + "/iso", json{{"isovalue", 0.5}, {"tf", tf_warm}, {"mode", "shallow"}}.dump(), "application/json"));
    ok(c.Post(base + "/pick", json{{"pixels", kLeftLobe}, {"target", "fg"}}.dump(), "application/json"));
    ok(c.Post(base + "/pick", json{{"pixels", kRightLobe}, {"target", "bg"}}.dump(), "application/json"));
    const json seg = ok(c.Post(base + "/segment", "{}", "application/json"));
    ok(c.Post(base + "/structures", json{{"side", "fg"}, {"id", 1}, {"tf", tf_red}}.dump(), "application/json"));
    ok(c.Post(base + "/structures", json{{"side", "bg"}, {"id", 2}, {"tf", tf_blue}}.dump(), "application/json"));
    const auto frame = c.Get(base + "/frame", httplib::Headers{{"Accept", "image/x-rgba"}});
    ASSERT_EQ(frame->status, 200);

    // Same steps without the service.
    auto vol = std::make_shared<const ScalarVolume>(ceir::testing::phantom(PhantomKind::dumbbell, 48));
    const Camera cam = camera_from_json(front_camera(128));
    auto tf = tf_from_json(tf_warm);
    tf.params.mode = RateMode::shallow;
    const auto ref = render_isosurface(*vol, cam, SurfaceStyle::enhanced(tf));
    SeedSets seeds;
    for (auto cell : pick_voxels(ref.ids, pixels_from_json(kLeftLobe))) seeds.add_foreground(cell);
    for (auto cell : pick_voxels(ref.ids, pixels_from_json(kRightLobe))) seeds.add_background(cell);
    const CutResult cut = min_cut(build_graph(*vol, 0.5, seeds, CropBounds::full(*vol)), seeds);
    EXPECT_EQ(seg["node_count"].get<std::size_t>(), cut.node_count);
    EXPECT_DOUBLE_EQ(seg["cut_weight"].get<double>(), cut.cut_weight);
    Scene scene;
    scene.volume = vol;
    scene.camera = cam;
    LabelVolume labels(vol->cell_dims());
    labels = bake_structure(labels, cut.foreground_cells, 1);
    labels = bake_structure(labels, cut.background_cells, 2);
    scene.labels = std::make_shared<const LabelVolume>(std::move(labels));
    scene.structures.emplace(1, SurfaceStructure::make(1, 0.5, tf_from_json(tf_red)));
    scene.structures.emplace(2, SurfaceStructure::make(2, 0.5, tf_from_json(tf_blue)));
    const auto expected = render_scene(scene).image.to_rgba8();
    ASSERT_EQ(frame->body.size(), expected.size());
    EXPECT_TRUE(std::equal(expected.begin(), expected.end(), reinterpret_cast<const std::uint8_t*>(frame->body.data())));
}

}  // namespace
