#include <gtest/gtest.h>

#include <thread>

#include "rsf/edit_service.hpp"
#include "support.hpp"

using namespace rsf;
using rsf::service::EditService;
using rsf::service::ServiceOptions;

namespace {

std::string str(const Bytes& b) { return std::string(b.begin(), b.end()); }
Bytes bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

class Server {
public:
    explicit Server(ServiceOptions opts = {}) : svc(std::move(opts))
    {
        svc.mount(http);
        port = http.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { http.listen_after_bind(); });
        http.wait_until_ready();
    }
    ~Server()
    {
        http.stop();
        thread.join();
    }
    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(120, 0);
        return c;
    }

    EditService svc;
    httplib::Server http;
    int port = 0;
    std::thread thread;
};

json body_of(const httplib::Result& r)
{
    EXPECT_TRUE(r);
    return json::parse(r->body);
}

std::string create_raw(const Server& s, const Image& img)
{
    auto r = s.client().Post("/sessions", str(encode_png(img)), "image/png");
    EXPECT_EQ(r->status, 201) << r->body;
    return body_of(r)["id"];
}

httplib::Result patch(const Server& s, const std::string& id, const json& patches)
{
    return s.client().Patch("/sessions/" + id + "/recipe", json{{"patches", patches}}.dump(), "application/json");
}

} // namespace

TEST(Service, CreateFromRawBodyGivesIdentityRecipe)
{
    Server s;
    Image img = quantized(test::scene_image(40, 30, 1));
    auto r = s.client().Post("/sessions", str(encode_png(img)), "image/png");
    ASSERT_EQ(r->status, 201);
    json b = json::parse(r->body);
    EXPECT_EQ(b["revision"], 0);
    EXPECT_EQ(b["width"], 40);
    EXPECT_EQ(b["height"], 30);
    EXPECT_EQ(b["undo_depth"], 0);
    ASSERT_EQ(b["recipe"]["layers"].size(), 1u);
    for (const auto& f : b["recipe"]["layers"][0]["filters"])
        EXPECT_EQ(f["theta"], 0.0);
    auto p = s.client().Get("/sessions/" + b["id"].get<std::string>() + "/preview");
    ASSERT_EQ(p->status, 200);
    EXPECT_EQ(p->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(decode_image(bytes(p->body)), img);
}

TEST(Service, MultipartWithPaletteMasks)
{
    Server s;
    Image img = quantized(test::scene_image(48, 32, 2));
    httplib::MultipartFormDataItems items = {{"image", str(encode_png(img)), "in.png", "image/png"},
                                             {"palette_k", "5", "", ""}};
    auto r = s.client().Post("/sessions", items);
    ASSERT_EQ(r->status, 201) << r->body;
    json b = json::parse(r->body);
    EXPECT_EQ(b["masks"].size(), 5u);
    EXPECT_EQ(b["recipe"]["layers"].size(), 6u);
    const std::string id = b["id"];
    for (int n = 0; n < 5; ++n) {
        auto m = s.client().Get("/sessions/" + id + "/masks/" + std::to_string(n));
        ASSERT_EQ(m->status, 200);
        Mask mask = decode_mask(bytes(m->body));
        EXPECT_EQ(mask.width(), 48);
        EXPECT_EQ(mask.height(), 32);
    }
    EXPECT_EQ(s.client().Get("/sessions/" + id + "/masks/5")->status, 404);
    auto list = body_of(s.client().Get("/sessions/" + id + "/masks"));
    EXPECT_EQ(list["masks"][2]["name"], "mask_02.png");
}

TEST(Service, UploadedMasksAndRecipe)
{
    Server s;
    Image img = quantized(test::scene_image(24, 24, 3));
    Mask m(24, 24);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            m.at(x, y, 0) = x < 12 ? 1.0 : 0.2;
    m = quantized(m);
    Recipe r;
    r.layers.push_back(Layer::masked(m, {{FilterKind::Hue, 0.2}}));
    r.layers[0].mask_source = "mask_00.png";
    httplib::MultipartFormDataItems items = {{"image", str(encode_png(img)), "in.png", "image/png"},
                                             {"recipe", recipe_to_json(r).dump(), "", ""},
                                             {"masks", str(encode_png(m)), "mask_00.png", "image/png"}};
    auto res = s.client().Post("/sessions", items);
    ASSERT_EQ(res->status, 201) << res->body;
    json b = json::parse(res->body);
    auto full = s.client().Get("/sessions/" + b["id"].get<std::string>() + "/export?full=1");
    EXPECT_EQ(decode_image(bytes(full->body)), quantized(render(img, r)));
}

TEST(Service, PatchRendersTheEditedRecipe)
{
    Server s;
    Image img(16, 16, 0.5);
    const std::string id = create_raw(s, img);
    auto r = patch(s, id, json::array({{{"layer", 0}, {"kind", "highlights"}, {"theta", 0.2}}}));
    ASSERT_EQ(r->status, 200) << r->body;
    json b = json::parse(r->body);
    EXPECT_EQ(b["revision"], 1);
    EXPECT_EQ(b["undo_depth"], 1);
    auto p = s.client().Get("/sessions/" + id + "/preview?rev=1");
    ASSERT_EQ(p->status, 200);
    EXPECT_EQ(p->get_header_value("X-Revision"), "1");
    Recipe expect;
    expect.layers.push_back(Layer::global({{FilterKind::Highlights, 0.2}}));
    Image want = quantized(render(quantized(img), expect));
    EXPECT_EQ(decode_image(bytes(p->body)), want);
    EXPECT_GT(want.at(0, 0, 0), quantized(img).at(0, 0, 0));
    EXPECT_FALSE(b["preview"].get<std::string>().empty());
}

TEST(Service, UndoRestoresThePreviousPreviewExactly)
{
    Server s;
    const std::string id = create_raw(s, quantized(test::scene_image(32, 24, 5)));
    ASSERT_EQ(patch(s, id, json::array({{{"layer", 0}, {"kind", "saturation"}, {"theta", 0.4}}}))->status, 200);
    auto after_first = s.client().Get("/sessions/" + id + "/preview")->body;
    ASSERT_EQ(patch(s, id, json::array({{{"layer", 0}, {"kind", "hue"}, {"theta", -0.3}}}))->status, 200);
    EXPECT_NE(s.client().Get("/sessions/" + id + "/preview")->body, after_first);
    auto u = s.client().Post("/sessions/" + id + "/undo");
    ASSERT_EQ(u->status, 200);
    EXPECT_EQ(json::parse(u->body)["revision"], 3);
    EXPECT_EQ(s.client().Get("/sessions/" + id + "/preview")->body, after_first);
}

TEST(Service, ErrorStatusesAndBodies)
{
    Server s;
    const std::string id = create_raw(s, quantized(test::scene_image(16, 16, 6)));

    auto missing = s.client().Get("/sessions/0123abcd/preview");
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(json::parse(missing->body)["code"], "not_found");
    EXPECT_EQ(s.client().Get("/nowhere")->status, 404);

    auto bad_index = patch(s, id, json::array({{{"layer", 7}, {"kind", "hue"}, {"theta", 0.1}}}));
    EXPECT_EQ(bad_index->status, 422);
    EXPECT_EQ(json::parse(bad_index->body)["code"], "bad_index");
    EXPECT_EQ(json::parse(bad_index->body)["field"], "patches[0].layer");

    auto range = patch(s, id, json::array({{{"layer", 0}, {"kind", "hue"}, {"theta", 1.5}}}));
    EXPECT_EQ(range->status, 422);
    EXPECT_EQ(json::parse(range->body)["code"], "out_of_range");

    // All-or-nothing: a bad second patch leaves the first unapplied.
    auto mixed = patch(s, id,
                       json::array({{{"layer", 0}, {"kind", "hue"}, {"theta", 0.1}},
                                    {{"layer", 0}, {"kind", "bogus"}, {"theta", 0.1}}}));
    EXPECT_EQ(mixed->status, 422);
    EXPECT_EQ(body_of(s.client().Get("/sessions/" + id + "/masks"))["revision"], 0);

    auto garbage = s.client().Post("/sessions", "definitely not an image", "application/octet-stream");
    EXPECT_EQ(garbage->status, 400);
    EXPECT_EQ(json::parse(garbage->body)["code"], "invalid_image");

    auto bad_json = s.client().Patch("/sessions/" + id + "/recipe", "{oops", "application/json");
    EXPECT_EQ(bad_json->status, 400);

    auto nothing = s.client().Post("/sessions/" + id + "/undo");
    EXPECT_EQ(nothing->status, 409);
    EXPECT_EQ(json::parse(nothing->body)["code"], "nothing_to_undo");

    auto stale = s.client().Get("/sessions/" + id + "/preview?rev=9");
    EXPECT_EQ(stale->status, 409);

    httplib::MultipartFormDataItems items = {{"image", str(encode_png(Image(8, 8, 0.5))), "a.png", "image/png"},
                                             {"palette_k", "40", "", ""}};
    EXPECT_EQ(s.client().Post("/sessions", items)->status, 422);
}

TEST(Service, OversizedUploadIs413)
{
    ServiceOptions opts;
    opts.max_pixels = 100;
    Server s(opts);
    auto r = s.client().Post("/sessions", str(encode_png(Image(11, 10, 0.5))), "image/png");
    EXPECT_EQ(r->status, 413);
    EXPECT_EQ(json::parse(r->body)["code"], "too_large");
}

TEST(Service, ExportedRecipeAndMasksReproduceTheFullRender)
{
    Server s;
    Image img = quantized(test::scene_image(40, 28, 7));
    httplib::MultipartFormDataItems items = {{"image", str(encode_png(img)), "in.png", "image/png"},
                                             {"palette_k", "3", "", ""}};
    json created = body_of(s.client().Post("/sessions", items));
    const std::string id = created["id"];
    ASSERT_EQ(patch(s, id,
                    json::array({{{"layer", 1}, {"kind", "temperature"}, {"theta", -0.5}},
                                 {{"layer", 2}, {"sigma", 1.5}},
                                 {{"layer", 2}, {"kind", "contrast"}, {"theta", 0.3}},
                                 {{"layer", 0}, {"kind", "shift_g"}, {"theta", 0.05}}}))
                  ->status,
              200);

    json rj = body_of(s.client().Get("/sessions/" + id + "/recipe"));
    Recipe r = recipe_from_json(rj, [&](const std::string& name) {
        const std::string n = name.substr(5, 2);
        auto m = s.client().Get("/sessions/" + id + "/masks/" + std::to_string(std::stoi(n)));
        return decode_mask(bytes(m->body));
    });
    Image cli_equivalent = quantized(render(img, r));
    auto full = s.client().Get("/sessions/" + id + "/export?full=1");
    ASSERT_EQ(full->status, 200);
    EXPECT_EQ(decode_image(bytes(full->body)), cli_equivalent);

    // Re-importing the exported recipe renders identically.
    items = {{"image", str(encode_png(img)), "in.png", "image/png"}, {"recipe", rj.dump(), "", ""}};
    for (int n = 0; n < 3; ++n)
        items.push_back({"masks", s.client().Get("/sessions/" + id + "/masks/" + std::to_string(n))->body,
                         mask_file_name(n), "image/png"});
    json again = body_of(s.client().Post("/sessions", items));
    auto full2 = s.client().Get("/sessions/" + again["id"].get<std::string>() + "/export?full=1");
    EXPECT_EQ(full2->body, full->body);
}

TEST(Service, PreviewsAreDownscaledAndDeterministic)
{
    ServiceOptions opts;
    opts.preview_cap = 32;
    Server s(opts);
    const std::string id = create_raw(s, quantized(test::scene_image(96, 64, 8)));
    auto a = s.client().Get("/sessions/" + id + "/preview");
    auto b = s.client().Get("/sessions/" + id + "/export");
    Image p = decode_image(bytes(a->body));
    EXPECT_EQ(p.width(), 32);
    EXPECT_EQ(p.height(), 21);
    EXPECT_EQ(a->body, b->body);
    EXPECT_EQ(s.client().Get("/sessions/" + id + "/preview")->body, a->body);
    EXPECT_EQ(decode_image(bytes(s.client().Get("/sessions/" + id + "/export?full=1")->body)).width(), 96);
}

TEST(Service, ConcurrentPatchesGetDistinctIncreasingRevisions)
{
    Server s;
    const std::string id = create_raw(s, quantized(test::scene_image(32, 32, 9)));
    std::vector<long> revisions(8);
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&, t] {
            auto r = patch(s, id, json::array({{{"layer", 0}, {"kind", "hue"}, {"theta", 0.05 * t}}}));
            revisions[t] = r && r->status == 200 ? json::parse(r->body)["revision"].get<long>() : -1;
        });
    for (auto& t : threads)
        t.join();
    std::sort(revisions.begin(), revisions.end());
    for (int t = 0; t < 8; ++t)
        EXPECT_EQ(revisions[t], t + 1);
}

TEST(Service, AutoFitRecoversAGlobalEdit)
{
    Server s;
    Image img = quantized(test::scene_image(32, 32, 10));
    Recipe gen;
    gen.layers.push_back(Layer::global({{FilterKind::Saturation, 0.3}}));
    Image target = quantized(render(img, gen));
    httplib::MultipartFormDataItems items = {{"image", str(encode_png(img)), "in.png", "image/png"},
                                             {"target", str(encode_png(target)), "t.png", "image/png"},
                                             {"auto_fit", "1", "", ""},
                                             {"iterations", "400", "", ""}};
    json b = body_of(s.client().Post("/sessions", items));
    double sat = 0.0;
    for (const auto& f : b["recipe"]["layers"][0]["filters"])
        if (f["kind"] == "saturation")
            sat = f["theta"];
    EXPECT_NEAR(sat, 0.3, 0.05);

    items = {{"image", str(encode_png(img)), "in.png", "image/png"}, {"auto_fit", "1", "", ""}};
    EXPECT_EQ(s.client().Post("/sessions", items)->status, 422);
}

TEST(Service, CorsPreflight)
{
    Server s;
    auto r = s.client().Options("/sessions");
    EXPECT_EQ(r->status, 204);
    EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(Service, SessionsPersistAcrossRestarts)
{
    auto root = std::filesystem::temp_directory_path() / ("rsf_service_" + std::to_string(std::random_device{}()));
    ServiceOptions opts;
    opts.root = root;
    std::string id, before;
    {
        Server s(opts);
        Image img = quantized(test::scene_image(20, 20, 11));
        httplib::MultipartFormDataItems items = {{"image", str(encode_png(img)), "in.png", "image/png"},
                                                 {"palette_k", "2", "", ""}};
        id = body_of(s.client().Post("/sessions", items))["id"];
        ASSERT_EQ(patch(s, id, json::array({{{"layer", 1}, {"kind", "shadows"}, {"theta", 0.4}}}))->status, 200);
        before = s.client().Get("/sessions/" + id + "/export?full=1")->body;
    }
    {
        Server s(opts);
        EXPECT_EQ(s.svc.session_count(), 1u);
        EXPECT_EQ(s.client().Get("/sessions/" + id + "/export?full=1")->body, before);
    }
    std::filesystem::remove_all(root);
}
