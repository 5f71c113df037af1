#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "diffss/conditions.hpp"
#include "diffss/episodes.hpp"
#include "diffss/kernels.hpp"
#include "diffss/png_io.hpp"
#include "stub_server.hpp"
#include "testutil.hpp"

using namespace diffss;
namespace fs = std::filesystem;

namespace {

// Independent palette oracle: accumulate one bit of the index into each
// channel per round, most significant position first.
Rgb palette_oracle(int index) {
    Rgb c = {0, 0, 0};
    for (int shift = 7; shift >= 0 && index != 0; --shift) {
        c[0] = static_cast<std::uint8_t>(c[0] | ((index & 1) << shift));
        c[1] = static_cast<std::uint8_t>(c[1] | (((index >> 1) & 1) << shift));
        c[2] = static_cast<std::uint8_t>(c[2] | (((index >> 2) & 1) << shift));
        index >>= 3;
    }
    return c;
}

SupportSample fixture_support(const DatasetIndex& index, const std::string& id) {
    return load_support(index, id);
}

}  // namespace

TEST_SUITE("conditions") {

TEST_CASE("palette matches the bit-interleave oracle and the known anchors") {
    Palette palette;
    for (int i = 0; i < 256; ++i) CHECK(palette.color(i) == palette_oracle(i));
    CHECK(palette.color(0) == Rgb{0, 0, 0});
    CHECK(palette.color(1) == Rgb{128, 0, 0});
    CHECK(palette.color(2) == Rgb{0, 128, 0});
    CHECK(palette.color(3) == Rgb{128, 128, 0});
    CHECK(palette.color(4) == Rgb{0, 0, 128});
    CHECK(palette.color(15) == Rgb{192, 128, 128});
    CHECK(palette.color(20) == Rgb{0, 64, 128});
}

TEST_CASE("segmap is the two-tone paint of the mask") {
    Palette palette;
    BinaryMask mask = testutil::random_mask(21, 24, 18);
    ColorImage seg = make_segmap(mask, 7, palette);
    CHECK(seg == kernels::paint_two_tone(mask, palette.color(7), palette.color(0)));
    CHECK_THROWS_AS(make_segmap(mask, 0, palette), std::invalid_argument);
    CHECK_THROWS_AS(make_segmap(mask, -2, palette), std::invalid_argument);
    CHECK_THROWS_AS(make_segmap(mask, 256, palette), std::invalid_argument);
}

TEST_CASE("scribble is strictly two-valued with an inclusive threshold") {
    GrayImage boundary(3, 1);
    boundary.values = {127, 128, 200};
    ScribbleConfig cfg;
    GrayImage s = make_scribble(boundary, cfg);
    CHECK(s.values == std::vector<std::uint8_t>{0, 255, 255});
    for (int i = 0; i < 50; ++i) {
        GrayImage noise = testutil::random_gray(mix_seed(22, i), 16, 16);
        GrayImage out = make_scribble(noise, cfg);
        for (std::uint8_t v : out.values) CHECK((v == 0 || v == 255));
    }
}

TEST_CASE("background filter keeps edges only inside the mask") {
    GrayImage edges = testutil::random_gray(23, 19, 11);
    BinaryMask mask = testutil::random_mask(24, 19, 11);
    GrayImage filtered = filter_background(edges, mask);
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 19; ++x)
            CHECK(filtered.at(x, y) == (mask.at(x, y) ? edges.at(x, y) : 0));
}

TEST_CASE("fallback edge detection is the luma gradient magnitude") {
    ColorImage img = testutil::random_image(25, 21, 14);
    FallbackEdgeDetector detector;
    CHECK(detector.detect(img) == kernels::gradient_magnitude(kernels::luma(img)));
    CHECK(detect_edges(img, detector) == detector.detect(img));
}

TEST_CASE("prompt substitution replaces the placeholder exactly once") {
    CHECK(make_prompt("kettle", kDefaultPromptTemplate) == "a real shot photo of kettle");
    CHECK(make_prompt("lamp", "studio render, {class}, white sweep") ==
          "studio render, lamp, white sweep");
    CHECK_THROWS_AS(make_prompt("kettle", "no placeholder"), std::invalid_argument);
    CHECK_THROWS_AS(make_prompt("kettle", "{class} and {class}"), std::invalid_argument);
    CHECK_THROWS_AS(make_prompt("", kDefaultPromptTemplate), std::invalid_argument);
}

TEST_CASE("composition law: scribble condition = threshold of filtered edges") {
    Manifest manifest = load_manifest(testutil::data_dir() / "condset" / "manifest.jsonl");
    DatasetIndex index(manifest);
    FallbackEdgeDetector detector;
    Palette palette;
    ConditionConfig cfg;
    for (const ManifestRecord& rec : manifest.records) {
        SupportSample support = fixture_support(index, rec.id);
        ControlCondition hed = build_condition(support, ConditionKind::hed, detector, cfg, palette);
        ControlCondition scr =
            build_condition(support, ConditionKind::scribble, detector, cfg, palette);
        GrayImage expected = kernels::threshold_binary(
            kernels::mask_filter(detector.detect(support.image), support.mask),
            cfg.scribble.threshold);
        CHECK(std::get<GrayImage>(scr.condition_image) == expected);
        CHECK(std::get<GrayImage>(hed.condition_image) ==
              kernels::mask_filter(detector.detect(support.image), support.mask));
    }
}

TEST_CASE("condition construction reproduces the committed goldens byte for byte") {
    Manifest manifest = load_manifest(testutil::data_dir() / "condset" / "manifest.jsonl");
    DatasetIndex index(manifest);
    FallbackEdgeDetector detector;
    Palette palette;
    ConditionConfig cfg;
    int checked = 0;
    for (const ManifestRecord& rec : manifest.records) {
        SupportSample support = fixture_support(index, rec.id);
        for (ConditionKind kind :
             {ConditionKind::segmap, ConditionKind::hed, ConditionKind::scribble}) {
            ControlCondition cond = build_condition(support, kind, detector, cfg, palette);
            CHECK(cond.kind == kind);
            CHECK(cond.source_id == rec.id);
            CHECK(cond.prompt == make_prompt(rec.class_names[0], kDefaultPromptTemplate));
            fs::path golden = testutil::data_dir() / "condset_golden" /
                              (rec.id + "__" + to_string(kind) + ".png");
            CHECK(encode_condition_png(cond.condition_image) == read_binary_file(golden));
            ++checked;
        }
    }
    CHECK(checked == 36);
}

TEST_CASE("scribble goldens contain some strokes") {
    // An all-zero scribble would make the golden comparison vacuous.
    for (const char* name : {"img01", "img06", "img11"}) {
        GrayImage scr = read_gray_png(testutil::data_dir() / "condset_golden" /
                                      (std::string(name) + "__scribble.png"));
        int strokes = 0;
        for (std::uint8_t v : scr.values) strokes += v == 255;
        CHECK(strokes > 10);
    }
}

TEST_CASE("edge resolution detour keeps the output at input dimensions") {
    Manifest manifest = load_manifest(testutil::data_dir() / "condset" / "manifest.jsonl");
    DatasetIndex index(manifest);
    SupportSample support = fixture_support(index, "img03");  // 57x43, off-square
    FallbackEdgeDetector detector;
    Palette palette;
    ConditionConfig native;
    ConditionConfig small;
    small.edge_resolution = 24;
    ControlCondition a = build_condition(support, ConditionKind::hed, detector, native, palette);
    ControlCondition b = build_condition(support, ConditionKind::hed, detector, small, palette);
    CHECK(condition_width(b.condition_image) == support.image.width);
    CHECK(condition_height(b.condition_image) == support.image.height);
    CHECK(std::get<GrayImage>(a.condition_image) != std::get<GrayImage>(b.condition_image));
}

TEST_CASE("remote edge detector round-trips the wire format") {
    GrayImage canned(8, 6);
    for (std::size_t i = 0; i < canned.values.size(); ++i)
        canned.values[i] = static_cast<std::uint8_t>(7 * i);
    testutil::StubServer server([&](httplib::Server& s) {
        s.Post("/edges", [&](const httplib::Request& req, httplib::Response& res) {
            // Reject malformed requests with a 400, which the client reports
            // as a backend error and the test as a failure.
            nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.contains("image")) {
                res.status = 400;
                return;
            }
            decode_color_png(base64_decode(body["image"].get<std::string>()));
            nlohmann::json reply;
            reply["image"] = base64_encode(encode_png(canned));
            res.set_content(reply.dump(), "application/json");
        });
    });

    RemoteEdgeDetector detector(server.url("/edges"));
    ColorImage img = testutil::random_image(26, 8, 6);
    CHECK(detector.detect(img) == canned);
    CHECK(detector.id() == "hed@" + server.url("/edges"));

    // A detector answering at foreign dimensions is resized back by the
    // caller-facing helper.
    ColorImage big = testutil::random_image(27, 16, 12);
    CHECK(detect_edges(big, detector) == kernels::resize_bilinear(canned, 16, 12));
}

TEST_CASE("remote edge detector maps transport failures to backend errors") {
    RemoteEdgeDetector unreachable("http://127.0.0.1:1/edges", 1);
    ColorImage img = testutil::random_image(28, 4, 4);
    CHECK_THROWS_AS(unreachable.detect(img), BackendError);

    testutil::StubServer server([](httplib::Server& s) {
        s.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
            res.status = 500;
            res.set_content("no", "text/plain");
        });
        s.Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("not json", "application/json");
        });
    });
    RemoteEdgeDetector bad(server.url("/bad"));
    CHECK_THROWS_AS(bad.detect(img), BackendError);
    RemoteEdgeDetector garbled(server.url("/garbled"));
    CHECK_THROWS_AS(garbled.detect(img), BackendError);
}

TEST_CASE("condition kind names round-trip") {
    for (ConditionKind kind :
         {ConditionKind::segmap, ConditionKind::hed, ConditionKind::scribble})
        CHECK(condition_kind_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(condition_kind_from_string("sketch"), std::invalid_argument);
}

}  // TEST_SUITE
