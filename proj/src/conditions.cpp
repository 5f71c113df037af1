#include "diffss/conditions.hpp"

#include <stdexcept>
#include <utility>

#include "diffss/common.hpp"
#include "diffss/episodes.hpp"
#include "diffss/kernels.hpp"
#include "diffss/png_io.hpp"
#include "http_util.hpp"

namespace diffss {

const char* to_string(ConditionKind kind) {
    switch (kind) {
        case ConditionKind::segmap: return "segmap";
        case ConditionKind::hed: return "hed";
        case ConditionKind::scribble: return "scribble";
    }
    throw std::invalid_argument("unknown condition kind value");
}

ConditionKind condition_kind_from_string(const std::string& s) {
    if (s == "segmap") return ConditionKind::segmap;
    if (s == "hed") return ConditionKind::hed;
    if (s == "scribble") return ConditionKind::scribble;
    throw std::invalid_argument("unknown condition kind: " + s);
}

Palette::Palette(int size) {
    if (size < 1) throw std::invalid_argument("Palette: size must be positive");
    colors_.resize(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        Rgb c = {0, 0, 0};
        int v = i;
        for (int j = 0; j < 8 && v != 0; ++j) {
            c[0] = static_cast<std::uint8_t>(c[0] | (((v >> 0) & 1) << (7 - j)));
            c[1] = static_cast<std::uint8_t>(c[1] | (((v >> 1) & 1) << (7 - j)));
            c[2] = static_cast<std::uint8_t>(c[2] | (((v >> 2) & 1) << (7 - j)));
            v >>= 3;
        }
        colors_[static_cast<std::size_t>(i)] = c;
    }
}

Rgb Palette::color(int class_index) const {
    if (class_index < 0 || class_index >= size())
        throw std::invalid_argument("Palette: class index " + std::to_string(class_index) +
                                    " outside [0," + std::to_string(size()) + ")");
    return colors_[static_cast<std::size_t>(class_index)];
}

GrayImage FallbackEdgeDetector::detect(const ColorImage& image) const {
    return kernels::gradient_magnitude(kernels::luma(image));
}

RemoteEdgeDetector::RemoteEdgeDetector(std::string url, int timeout_seconds)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds) {
    if (url_.empty()) throw ConfigError("RemoteEdgeDetector: empty url");
}

GrayImage RemoteEdgeDetector::detect(const ColorImage& image) const {
    require_valid(image, "detect");
    nlohmann::ordered_json body;
    body["image"] = base64_encode(encode_png(image));
    nlohmann::json doc = detail::post_json(url_, timeout_seconds_, body, "edge backend");
    if (!doc.contains("image") || !doc["image"].is_string())
        throw BackendError("edge backend: response has no \"image\" field");
    try {
        return decode_gray_png(base64_decode(doc["image"].get<std::string>()));
    } catch (const std::exception& e) {
        throw BackendError(std::string("edge backend: bad image payload: ") + e.what());
    }
}

std::string RemoteEdgeDetector::id() const { return "hed@" + url_; }

int condition_width(const ConditionImage& img) {
    return std::visit([](const auto& i) { return i.width; }, img);
}

int condition_height(const ConditionImage& img) {
    return std::visit([](const auto& i) { return i.height; }, img);
}

std::vector<std::uint8_t> encode_condition_png(const ConditionImage& img) {
    return std::visit([](const auto& i) { return encode_png(i); }, img);
}

GrayImage detect_edges(const ColorImage& image, const EdgeDetector& detector) {
    require_valid(image, "detect_edges");
    GrayImage edge = detector.detect(image);
    require_valid(edge, "detect_edges output");
    if (edge.width != image.width || edge.height != image.height)
        edge = kernels::resize_bilinear(edge, image.width, image.height);
    return edge;
}

GrayImage filter_background(const GrayImage& edge, const BinaryMask& mask) {
    return kernels::mask_filter(edge, mask);
}

GrayImage make_scribble(const GrayImage& boundary, const ScribbleConfig& cfg) {
    return kernels::threshold_binary(boundary, cfg.threshold);
}

ColorImage make_segmap(const BinaryMask& mask, int class_index, const Palette& palette) {
    require_valid(mask, "make_segmap");
    if (class_index < 1)
        throw std::invalid_argument("make_segmap: class index must be positive, got " +
                                    std::to_string(class_index));
    return kernels::paint_two_tone(mask, palette.color(class_index), palette.color(0));
}

std::string make_prompt(const std::string& class_name, const std::string& template_text) {
    if (class_name.empty()) throw std::invalid_argument("make_prompt: empty class name");
    const std::string placeholder = kPromptPlaceholder;
    std::size_t pos = template_text.find(placeholder);
    if (pos == std::string::npos)
        throw std::invalid_argument("make_prompt: template has no " + placeholder +
                                    " placeholder: " + template_text);
    if (template_text.find(placeholder, pos + placeholder.size()) != std::string::npos)
        throw std::invalid_argument("make_prompt: template must contain " + placeholder +
                                    " exactly once: " + template_text);
    std::string out = template_text;
    out.replace(pos, placeholder.size(), class_name);
    return out;
}

namespace {

GrayImage detect_at_resolution(const ColorImage& image, const EdgeDetector& detector,
                               int edge_resolution) {
    if (edge_resolution < 0)
        throw std::invalid_argument("edge_resolution must be >= 0, got " +
                                    std::to_string(edge_resolution));
    if (edge_resolution == 0) return detect_edges(image, detector);
    ColorImage scaled = kernels::resize_bilinear(image, edge_resolution, edge_resolution);
    GrayImage edge = detect_edges(scaled, detector);
    return kernels::resize_bilinear(edge, image.width, image.height);
}

}  // namespace

ControlCondition build_condition(const SupportSample& support, ConditionKind kind,
                                 const EdgeDetector& detector, const ConditionConfig& cfg,
                                 const Palette& palette) {
    require_valid(support.image, "build_condition image");
    require_valid(support.mask, "build_condition mask");
    require_same_dims(support.image.width, support.image.height, support.mask.width,
                      support.mask.height, "build_condition");

    ControlCondition out;
    out.kind = kind;
    out.source_id = support.id;
    out.prompt = make_prompt(support.class_name, cfg.prompt_template);

    if (kind == ConditionKind::segmap) {
        out.condition_image = make_segmap(support.mask, support.class_index, palette);
        return out;
    }
    GrayImage edge = detect_at_resolution(support.image, detector, cfg.edge_resolution);
    GrayImage filtered = filter_background(edge, support.mask);
    if (kind == ConditionKind::hed)
        out.condition_image = std::move(filtered);
    else
        out.condition_image = make_scribble(filtered, cfg.scribble);
    return out;
}

}  // namespace diffss
