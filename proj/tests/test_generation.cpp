#include <doctest.h>

#include <cmath>
#include <set>

#include <json.hpp>

#include "diffss/conditions.hpp"
#include "diffss/episodes.hpp"
#include "diffss/generation.hpp"
#include "diffss/png_io.hpp"
#include "stub_server.hpp"
#include "testutil.hpp"

using namespace diffss;

namespace {

ControlCondition segmap_condition(const SupportSample& support) {
    Palette palette;
    ControlCondition cond;
    cond.kind = ConditionKind::segmap;
    cond.condition_image = make_segmap(support.mask, support.class_index, palette);
    cond.source_id = support.id;
    cond.prompt = make_prompt(support.class_name, kDefaultPromptTemplate);
    return cond;
}

SupportSample small_support(std::uint64_t seed, int w = 20, int h = 16) {
    SupportSample s;
    s.image = testutil::random_image(seed, w, h);
    s.mask = testutil::random_mask(seed + 1, w, h, 35);
    s.class_index = 2;
    s.class_name = "lamp";
    s.id = "sup" + std::to_string(seed);
    return s;
}

}  // namespace

TEST_SUITE("generation") {

TEST_CASE("mock generation is deterministic and k-sensitive") {
    SupportSample s = small_support(31);
    ControlCondition cond = segmap_condition(s);
    GeneratedImage a = mock_generate(cond, s.image, s.mask, 99, 1);
    GeneratedImage b = mock_generate(cond, s.image, s.mask, 99, 1);
    CHECK(a.image == b.image);
    CHECK(a.provenance.id() == "sup31#segmap#g1");
    CHECK(a.provenance.backend == "mock");
    CHECK(a.provenance.seed == 99);

    GeneratedImage k2 = mock_generate(cond, s.image, s.mask, 99, 2);
    GeneratedImage other_seed = mock_generate(cond, s.image, s.mask, 100, 1);
    CHECK(a.image != k2.image);
    CHECK(a.image != other_seed.image);
}

TEST_CASE("mock generation matches a draw-order oracle") {
    // Re-derives the image from the documented draw order: foreground scale
    // and offset per channel, two background colors, gradient axis, then the
    // value-noise grid row-major.
    SupportSample s = small_support(32, 9, 7);
    ControlCondition cond = segmap_condition(s);
    MockConfig cfg;
    cfg.noise_cell = 4;
    GeneratedImage g = mock_generate(cond, s.image, s.mask, 55, 3, cfg);

    Rng rng(mix_seed(55, std::uint64_t{3}));
    double scale[3], offset[3], bg0[3], bg1[3];
    for (double& v : scale) v = 1.0 + cfg.jitter_scale * rng.next_signed();
    for (double& v : offset) v = cfg.jitter_offset * rng.next_signed();
    for (double& v : bg0) v = static_cast<double>(rng.next_below(256));
    for (double& v : bg1) v = static_cast<double>(rng.next_below(256));
    bool vertical = rng.next_below(2) == 1;
    int gw = (9 + cfg.noise_cell - 1) / cfg.noise_cell + 1;
    int gh = (7 + cfg.noise_cell - 1) / cfg.noise_cell + 1;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
    for (double& v : grid) v = rng.next_signed() * cfg.noise_amplitude;
    auto noise_at = [&](int x, int y) {
        double fx = static_cast<double>(x) / cfg.noise_cell;
        double fy = static_cast<double>(y) / cfg.noise_cell;
        int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        double wx = fx - x0, wy = fy - y0;
        auto g2 = [&](int xx, int yy) { return grid[static_cast<std::size_t>(yy) * gw + xx]; };
        double top = g2(x0, y0) * (1.0 - wx) + g2(x0 + 1, y0) * wx;
        double bot = g2(x0, y0 + 1) * (1.0 - wx) + g2(x0 + 1, y0 + 1) * wx;
        return top * (1.0 - wy) + bot * wy;
    };
    auto clamp_round = [](double v) {
        long r = std::lround(v);
        return static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
    };
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x) {
            Rgb expected;
            if (s.mask.at(x, y)) {
                Rgb p = s.image.at(x, y);
                double n = noise_at(x, y);
                for (int c = 0; c < 3; ++c)
                    expected[static_cast<std::size_t>(c)] =
                        clamp_round(p[static_cast<std::size_t>(c)] * scale[c] + offset[c] + n);
            } else {
                int span = vertical ? 7 : 9;
                int pos = vertical ? y : x;
                double t = static_cast<double>(pos) / (span - 1);
                for (int c = 0; c < 3; ++c)
                    expected[static_cast<std::size_t>(c)] =
                        clamp_round(bg0[c] + (bg1[c] - bg0[c]) * t);
            }
            CHECK(g.image.at(x, y) == expected);
        }
}

TEST_CASE("mock foreground stays within the configured jitter bound") {
    MockConfig cfg;
    CHECK(cfg.jitter_bound() == doctest::Approx(255.0 * cfg.jitter_scale + cfg.jitter_offset +
                                                cfg.noise_amplitude));
    for (std::uint64_t seed : {41u, 42u, 43u}) {
        SupportSample s = small_support(seed, 24, 24);
        ControlCondition cond = segmap_condition(s);
        for (int k = 1; k <= 3; ++k) {
            GeneratedImage g = mock_generate(cond, s.image, s.mask, seed * 7, k, cfg);
            for (int y = 0; y < 24; ++y)
                for (int x = 0; x < 24; ++x) {
                    if (!s.mask.at(x, y)) continue;
                    Rgb in = s.image.at(x, y), out = g.image.at(x, y);
                    for (int c = 0; c < 3; ++c) {
                        double shift = std::abs(static_cast<double>(out[static_cast<std::size_t>(c)]) -
                                                in[static_cast<std::size_t>(c)]);
                        CHECK(shift <= in[static_cast<std::size_t>(c)] * cfg.jitter_scale +
                                           cfg.jitter_offset + cfg.noise_amplitude + 0.5);
                    }
                }
        }
    }
}

TEST_CASE("mock generation validates its inputs") {
    SupportSample s = small_support(44);
    ControlCondition cond = segmap_condition(s);
    CHECK_THROWS_AS(mock_generate(cond, s.image, s.mask, 1, 0), std::invalid_argument);
    BinaryMask wrong(s.image.width + 1, s.image.height);
    CHECK_THROWS_AS(mock_generate(cond, s.image, wrong, 1, 1), std::invalid_argument);
    MockConfig bad;
    bad.noise_cell = 0;
    CHECK_THROWS_AS(mock_generate(cond, s.image, s.mask, 1, 1, bad), std::invalid_argument);
}

TEST_CASE("the generate entry point normalizes provenance and rejects bad requests") {
    SupportSample s = small_support(45);
    SupportLoader loader = [&](const std::string&) { return s; };
    MockGenerator backend(loader);

    GenerationRequest req;
    req.condition = segmap_condition(s);
    req.count = 3;
    req.seed = 17;
    std::vector<GeneratedImage> images = generate(req, backend);
    REQUIRE(images.size() == 3);
    for (int k = 0; k < 3; ++k) {
        CHECK(images[static_cast<std::size_t>(k)].provenance.index_k == k + 1);
        CHECK(images[static_cast<std::size_t>(k)].provenance.backend == "mock");
        CHECK(images[static_cast<std::size_t>(k)].provenance.seed == 17);
        CHECK(images[static_cast<std::size_t>(k)].provenance.source_id == s.id);
        CHECK(images[static_cast<std::size_t>(k)].provenance.class_index == 2);
        CHECK(images[static_cast<std::size_t>(k)].provenance.class_name == "lamp");
    }

    req.count = 0;
    CHECK(generate(req, backend).empty());
    req.count = -1;
    CHECK_THROWS_AS(generate(req, backend), std::invalid_argument);
    req.count = 1;
    req.condition.prompt.clear();
    CHECK_THROWS_AS(generate(req, backend), std::invalid_argument);
}

TEST_CASE("http generator speaks the documented wire format") {
    SupportSample s = small_support(46, 12, 10);
    ControlCondition cond = segmap_condition(s);
    nlohmann::json seen;
    testutil::StubServer server([&](httplib::Server& srv) {
        srv.Post("/gen", [&](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded()) {
                res.status = 400;
                return;
            }
            seen = body;
            int count = body.value("count", 0);
            nlohmann::json reply;
            reply["images"] = nlohmann::json::array();
            for (int k = 0; k < count; ++k)
                reply["images"].push_back(
                    base64_encode(encode_png(testutil::random_image(900 + k, 12, 10))));
            res.set_content(reply.dump(), "application/json");
        });
    });

    HttpGenerator backend(server.url("/gen"));
    CHECK(backend.id() == "http@" + server.url("/gen"));
    GenerationRequest req;
    req.condition = cond;
    req.count = 2;
    req.seed = 5;
    req.params = {{"guidance_scale", "7.5"}, {"steps", "30"}};
    std::vector<GeneratedImage> images = generate(req, backend);
    REQUIRE(images.size() == 2);
    CHECK(images[0].image == testutil::random_image(900, 12, 10));
    CHECK(images[1].image == testutil::random_image(901, 12, 10));
    CHECK(images[0].provenance.backend == "http@" + server.url("/gen"));

    CHECK(seen["kind"] == "segmap");
    CHECK(seen["prompt"] == "a real shot photo of lamp");
    CHECK(seen["count"] == 2);
    CHECK(seen["seed"] == 5);
    CHECK(seen["params"]["guidance_scale"] == "7.5");
    CHECK(seen["params"]["steps"] == "30");
    ColorImage sent = decode_color_png(base64_decode(seen["condition"].get<std::string>()));
    CHECK(sent == std::get<ColorImage>(cond.condition_image));
}

TEST_CASE("http generator resizes foreign dimensions and rejects bad replies") {
    SupportSample s = small_support(47, 12, 10);
    ControlCondition cond = segmap_condition(s);
    testutil::StubServer server([&](httplib::Server& srv) {
        srv.Post("/big", [&](const httplib::Request&, httplib::Response& res) {
            nlohmann::json reply;
            reply["images"] = {base64_encode(encode_png(testutil::random_image(910, 24, 20)))};
            res.set_content(reply.dump(), "application/json");
        });
        srv.Post("/short", [&](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"images": []})", "application/json");
        });
        srv.Post("/junk", [&](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"pictures": 3})", "application/json");
        });
    });

    GenerationRequest req;
    req.condition = cond;
    req.count = 1;
    std::vector<GeneratedImage> resized = generate(req, HttpGenerator(server.url("/big")));
    REQUIRE(resized.size() == 1);
    CHECK(resized[0].image.width == 12);
    CHECK(resized[0].image.height == 10);

    CHECK_THROWS_AS(generate(req, HttpGenerator(server.url("/short"))), BackendError);
    CHECK_THROWS_AS(generate(req, HttpGenerator(server.url("/junk"))), BackendError);
    CHECK_THROWS_AS(generate(req, HttpGenerator("http://127.0.0.1:1/gen", 1)), BackendError);
}

TEST_CASE("store round-trips records sorted, deduplicated, and loadable") {
    testutil::TempDir dir("store");
    SupportSample s1 = small_support(48);
    SupportSample s2 = small_support(49);
    SupportLoader loader = [&](const std::string& id) { return id == s1.id ? s1 : s2; };
    MockGenerator backend(loader);

    std::vector<StoreRecord> records;
    std::vector<GeneratedImage> all;
    for (const SupportSample* s : {&s2, &s1}) {  // insertion order is not sorted order
        GenerationRequest req;
        req.condition = segmap_condition(*s);
        req.count = 2;
        req.seed = 7;
        std::vector<GeneratedImage> images = generate(req, backend);
        save_store_images(dir.path, images);
        for (const GeneratedImage& g : images) {
            records.push_back({g.provenance, store_image_path(g.provenance)});
            all.push_back(g);
        }
    }
    // A duplicate record must collapse on rewrite.
    records.push_back(records.back());
    write_store_provenance(dir.path, records);

    GeneratedStore store = load_store(dir.path);
    REQUIRE(store.records.size() == 4);
    CHECK(store.records[0].provenance.source_id == s1.id);
    CHECK(store.records[0].provenance.index_k == 1);
    CHECK(store.records[1].provenance.index_k == 2);
    CHECK(store.records[2].provenance.source_id == s2.id);

    const StoreRecord* found = store.find(all[0].provenance.id());
    REQUIRE(found != nullptr);
    GeneratedImage loaded = load_generated(store, *found);
    CHECK(loaded.image == all[0].image);
    CHECK(loaded.provenance.id() == all[0].provenance.id());
    CHECK(load_all_generated(store).size() == 4);
    CHECK(store.find("nope#segmap#g1") == nullptr);

    // Rewriting the same records is byte-stable.
    std::string before = read_text_file(dir.path / "provenance.jsonl");
    write_store_provenance(dir.path, store.records);
    CHECK(read_text_file(dir.path / "provenance.jsonl") == before);
}

TEST_CASE("store image paths sanitize hostile source ids") {
    Provenance p;
    p.source_id = "a/b c";
    p.kind = ConditionKind::hed;
    p.index_k = 2;
    CHECK(store_image_path(p) == "images/a_b_c__hed__g2.png");
}

TEST_CASE("an empty directory loads as an empty store") {
    testutil::TempDir dir("empty_store");
    GeneratedStore store = load_store(dir.path);
    CHECK(store.records.empty());
}

TEST_CASE("mock generator rejects oversized requests and null loaders") {
    SupportSample s = small_support(50);
    SupportLoader loader = [&](const std::string&) { return s; };
    MockGenerator backend(loader);
    GenerationRequest req;
    req.condition = segmap_condition(s);
    req.count = MockGenerator::kMaxCount + 1;
    CHECK_THROWS_AS(generate(req, backend), BackendError);
    CHECK_THROWS_AS(MockGenerator(SupportLoader{}), std::invalid_argument);
}

}  // TEST_SUITE
