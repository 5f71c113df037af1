#include "diffss/generation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "diffss/kernels.hpp"
#include "diffss/png_io.hpp"
#include "http_util.hpp"
#include "path_util.hpp"

namespace diffss {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<GeneratedImage> generate(const GenerationRequest& req, const Generator& backend) {
    if (req.count < 0) throw std::invalid_argument("generate: negative count");
    if (req.count == 0) return {};
    if (req.effective_prompt().empty())
        throw std::invalid_argument("generate: empty prompt for source " + req.condition.source_id);

    std::vector<GeneratedImage> out = backend.generate(req);
    if (static_cast<int>(out.size()) != req.count)
        throw BackendError("generate: backend " + backend.id() + " returned " +
                           std::to_string(out.size()) + " images for count " +
                           std::to_string(req.count));
    int w = condition_width(req.condition.condition_image);
    int h = condition_height(req.condition.condition_image);
    for (int k = 1; k <= req.count; ++k) {
        GeneratedImage& g = out[static_cast<std::size_t>(k) - 1];
        if (g.image.width != w || g.image.height != h)
            throw BackendError("generate: image " + std::to_string(k) + " is " +
                               std::to_string(g.image.width) + "x" +
                               std::to_string(g.image.height) + ", condition is " +
                               std::to_string(w) + "x" + std::to_string(h));
        g.provenance.backend = backend.id();
        g.provenance.seed = req.seed;
        g.provenance.kind = req.condition.kind;
        g.provenance.source_id = req.condition.source_id;
        g.provenance.index_k = k;
    }
    return out;
}

namespace {

std::uint8_t clamp_round(double v) {
    long r = std::lround(v);
    return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

// Coarse grid of seeded values read back with bilinear interpolation; the
// result only has variation at the cell scale, like low-frequency texture.
struct ValueNoise {
    int cell;
    int grid_w;
    int grid_h;
    std::vector<double> grid;

    ValueNoise(int width, int height, int cell_size, double amplitude, Rng& rng) : cell(cell_size) {
        grid_w = (width + cell - 1) / cell + 1;
        grid_h = (height + cell - 1) / cell + 1;
        grid.resize(static_cast<std::size_t>(grid_w) * grid_h);
        for (double& v : grid) v = amplitude * rng.next_signed();
    }

    double at(int x, int y) const {
        double fx = static_cast<double>(x) / cell;
        double fy = static_cast<double>(y) / cell;
        int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        double tx = fx - x0, ty = fy - y0;
        auto g = [&](int gx, int gy) { return grid[static_cast<std::size_t>(gy) * grid_w + gx]; };
        double top = g(x0, y0) * (1 - tx) + g(x0 + 1, y0) * tx;
        double bottom = g(x0, y0 + 1) * (1 - tx) + g(x0 + 1, y0 + 1) * tx;
        return top * (1 - ty) + bottom * ty;
    }
};

}  // namespace

GeneratedImage mock_generate(const ControlCondition& condition, const ColorImage& support_image,
                             const BinaryMask& mask, std::uint64_t seed, int k,
                             const MockConfig& cfg) {
    require_valid(support_image, "mock_generate image");
    require_valid(mask, "mock_generate mask");
    require_same_dims(support_image.width, support_image.height, mask.width, mask.height,
                      "mock_generate");
    require_same_dims(support_image.width, support_image.height,
                      condition_width(condition.condition_image),
                      condition_height(condition.condition_image), "mock_generate condition");
    if (k < 1) throw std::invalid_argument("mock_generate: k must be >= 1");
    if (cfg.noise_cell < 1) throw std::invalid_argument("mock_generate: noise_cell must be >= 1");

    // The draw order below is part of the format: scale rgb, offset rgb,
    // background colors, gradient axis, then the noise grid row-major.
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
    double scale[3], offset[3];
    for (double& s : scale) s = 1.0 + cfg.jitter_scale * rng.next_signed();
    for (double& o : offset) o = cfg.jitter_offset * rng.next_signed();
    double bg0[3], bg1[3];
    for (double& c : bg0) c = static_cast<double>(rng.next_below(256));
    for (double& c : bg1) c = static_cast<double>(rng.next_below(256));
    bool vertical = rng.next_below(2) == 1;
    ValueNoise noise(support_image.width, support_image.height, cfg.noise_cell,
                     cfg.noise_amplitude, rng);

    int w = support_image.width, h = support_image.height;
    ColorImage img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Rgb out;
            if (mask.at(x, y)) {
                Rgb p = support_image.at(x, y);
                double n = noise.at(x, y);
                for (int c = 0; c < 3; ++c)
                    out[static_cast<std::size_t>(c)] =
                        clamp_round(p[static_cast<std::size_t>(c)] * scale[c] + offset[c] + n);
            } else {
                int span = vertical ? h : w;
                int pos = vertical ? y : x;
                double t = span > 1 ? static_cast<double>(pos) / (span - 1) : 0.0;
                for (int c = 0; c < 3; ++c)
                    out[static_cast<std::size_t>(c)] = clamp_round(bg0[c] + (bg1[c] - bg0[c]) * t);
            }
            img.set(x, y, out);
        }
    }

    GeneratedImage g;
    g.image = std::move(img);
    g.provenance.backend = "mock";
    g.provenance.seed = seed;
    g.provenance.kind = condition.kind;
    g.provenance.source_id = condition.source_id;
    g.provenance.index_k = k;
    return g;
}

MockGenerator::MockGenerator(SupportLoader loader, MockConfig cfg)
    : loader_(std::move(loader)), cfg_(cfg) {
    if (!loader_) throw std::invalid_argument("MockGenerator: null support loader");
}

std::vector<GeneratedImage> MockGenerator::generate(const GenerationRequest& req) const {
    if (req.count > kMaxCount)
        throw BackendError("mock backend: count " + std::to_string(req.count) + " exceeds limit " +
                           std::to_string(kMaxCount));
    SupportSample support = loader_(req.condition.source_id);
    std::vector<GeneratedImage> out;
    out.reserve(static_cast<std::size_t>(req.count));
    for (int k = 1; k <= req.count; ++k) {
        GeneratedImage g =
            mock_generate(req.condition, support.image, support.mask, req.seed, k, cfg_);
        g.provenance.class_index = support.class_index;
        g.provenance.class_name = support.class_name;
        out.push_back(std::move(g));
    }
    return out;
}

HttpGenerator::HttpGenerator(std::string url, int timeout_seconds)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds) {
    if (url_.empty()) throw ConfigError("HttpGenerator: empty url");
}

std::vector<GeneratedImage> HttpGenerator::generate(const GenerationRequest& req) const {
    ordered_json body;
    body["condition"] = base64_encode(encode_condition_png(req.condition.condition_image));
    body["kind"] = to_string(req.condition.kind);
    body["prompt"] = req.effective_prompt();
    body["count"] = req.count;
    body["seed"] = req.seed;
    body["params"] = req.params;
    json doc = detail::post_json(url_, timeout_seconds_, body, "generator backend");

    if (!doc.contains("images") || !doc["images"].is_array())
        throw BackendError("generator backend: response has no \"images\" array");
    const json& images = doc["images"];
    if (static_cast<int>(images.size()) != req.count)
        throw BackendError("generator backend: got " + std::to_string(images.size()) +
                           " images, requested " + std::to_string(req.count));

    int w = condition_width(req.condition.condition_image);
    int h = condition_height(req.condition.condition_image);
    std::vector<GeneratedImage> out;
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!images[i].is_string())
            throw BackendError("generator backend: image " + std::to_string(i + 1) +
                               " is not a base64 string");
        GeneratedImage g;
        try {
            g.image = decode_color_png(base64_decode(images[i].get<std::string>()));
        } catch (const std::exception& e) {
            throw BackendError("generator backend: image " + std::to_string(i + 1) + ": " +
                               e.what());
        }
        if (g.image.width != w || g.image.height != h)
            g.image = kernels::resize_bilinear(g.image, w, h);
        g.provenance.index_k = static_cast<int>(i) + 1;
        out.push_back(std::move(g));
    }
    return out;
}

std::string HttpGenerator::id() const { return "http@" + url_; }

const StoreRecord* GeneratedStore::find(const std::string& id) const {
    for (const StoreRecord& r : records)
        if (r.provenance.id() == id) return &r;
    return nullptr;
}

std::string store_image_path(const Provenance& p) {
    return "images/" + detail::sanitize_for_path(p.source_id) + "__" + to_string(p.kind) + "__g" +
           std::to_string(p.index_k) + ".png";
}

namespace {

ordered_json store_record_to_json(const StoreRecord& rec) {
    ordered_json doc;
    doc["id"] = rec.provenance.id();
    doc["backend"] = rec.provenance.backend;
    doc["seed"] = rec.provenance.seed;
    doc["kind"] = to_string(rec.provenance.kind);
    doc["source_id"] = rec.provenance.source_id;
    doc["k"] = rec.provenance.index_k;
    doc["class_index"] = rec.provenance.class_index;
    doc["class_name"] = rec.provenance.class_name;
    doc["image"] = rec.image_path;
    return doc;
}

StoreRecord store_record_from_json(const json& doc, const std::string& where) {
    StoreRecord rec;
    try {
        rec.provenance.backend = doc.at("backend").get<std::string>();
        rec.provenance.seed = doc.at("seed").get<std::uint64_t>();
        rec.provenance.kind = condition_kind_from_string(doc.at("kind").get<std::string>());
        rec.provenance.source_id = doc.at("source_id").get<std::string>();
        rec.provenance.index_k = doc.at("k").get<int>();
        rec.provenance.class_index = doc.value("class_index", 0);
        rec.provenance.class_name = doc.value("class_name", std::string());
        rec.image_path = doc.at("image").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return rec;
}

}  // namespace

GeneratedStore load_store(const std::filesystem::path& dir) {
    GeneratedStore store;
    store.dir = dir;
    std::filesystem::path prov = dir / "provenance.jsonl";
    if (!std::filesystem::exists(prov)) return store;
    std::vector<std::string> lines = read_jsonl_lines(prov);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string where = prov.string() + " line " + std::to_string(i + 1);
        json doc = json::parse(lines[i], nullptr, false);
        if (doc.is_discarded()) throw ConfigError(where + ": invalid JSON");
        store.records.push_back(store_record_from_json(doc, where));
    }
    return store;
}

void save_store_images(const std::filesystem::path& dir,
                       const std::vector<GeneratedImage>& images) {
    for (const GeneratedImage& g : images) write_png(dir / store_image_path(g.provenance), g.image);
}

void write_store_provenance(const std::filesystem::path& dir, std::vector<StoreRecord> records) {
    // Whole-file rewrite in a canonical order, so resumed and fresh runs end
    // up byte-identical.
    std::sort(records.begin(), records.end(), [](const StoreRecord& a, const StoreRecord& b) {
        auto key = [](const StoreRecord& r) {
            return std::make_tuple(r.provenance.source_id, static_cast<int>(r.provenance.kind),
                                   r.provenance.index_k);
        };
        return key(a) < key(b);
    });
    records.erase(std::unique(records.begin(), records.end(),
                              [](const StoreRecord& a, const StoreRecord& b) {
                                  return a.provenance.id() == b.provenance.id();
                              }),
                  records.end());
    std::string out;
    for (const StoreRecord& rec : records) {
        out += store_record_to_json(rec).dump();
        out += '\n';
    }
    atomic_write(dir / "provenance.jsonl", out);
}

GeneratedImage load_generated(const GeneratedStore& store, const StoreRecord& record) {
    GeneratedImage g;
    g.image = read_color_png(store.dir / record.image_path);
    g.provenance = record.provenance;
    return g;
}

std::vector<GeneratedImage> load_all_generated(const GeneratedStore& store) {
    std::vector<GeneratedImage> out;
    out.reserve(store.records.size());
    for (const StoreRecord& rec : store.records) out.push_back(load_generated(store, rec));
    return out;
}

}  // namespace diffss
