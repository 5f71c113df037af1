#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "diffss/image.hpp"

namespace diffss {

enum class ConditionKind { segmap, hed, scribble };

const char* to_string(ConditionKind kind);
ConditionKind condition_kind_from_string(const std::string& s);

struct ScribbleConfig {
    // Binarization threshold applied to the boundary map; >= threshold is
    // foreground. 128 is the average intensity of an 8-bit image.
    std::uint8_t threshold = 128;
};

// Deterministic class-index -> RGB map built by bit interleaving (the
// standard VOC color map). Index 0 is black.
class Palette {
public:
    explicit Palette(int size = 256);
    Rgb color(int class_index) const;
    int size() const { return static_cast<int>(colors_.size()); }

private:
    std::vector<Rgb> colors_;
};

// Edge detector seam: the built-in gradient fallback runs everywhere, the
// remote detector calls a neural backend over the wire.
class EdgeDetector {
public:
    virtual ~EdgeDetector() = default;
    virtual GrayImage detect(const ColorImage& image) const = 0;
    virtual std::string id() const = 0;
};

// Luma gradient magnitude via halved 3x3 central differences, clamped to
// [0,255]. Deterministic, needs no model weights.
class FallbackEdgeDetector final : public EdgeDetector {
public:
    GrayImage detect(const ColorImage& image) const override;
    std::string id() const override { return "grad3x3"; }
};

// HTTP client to a neural edge-detection service (same wire style as the
// generator backend: base64 PNG in, base64 PNG out).
class RemoteEdgeDetector final : public EdgeDetector {
public:
    explicit RemoteEdgeDetector(std::string url, int timeout_seconds = 30);
    GrayImage detect(const ColorImage& image) const override;
    std::string id() const override;

private:
    std::string url_;
    int timeout_seconds_;
};

using ConditionImage = std::variant<GrayImage, ColorImage>;

int condition_width(const ConditionImage& img);
int condition_height(const ConditionImage& img);
std::vector<std::uint8_t> encode_condition_png(const ConditionImage& img);

struct ControlCondition {
    ConditionKind kind = ConditionKind::segmap;
    ConditionImage condition_image;
    std::string prompt;
    std::string source_id;
};

struct SupportSample;  // episodes.hpp

GrayImage detect_edges(const ColorImage& image, const EdgeDetector& detector);

// out(x) = edge(x) where mask(x)=1, else 0. No dilation.
GrayImage filter_background(const GrayImage& edge, const BinaryMask& mask);

// Strictly two-valued {0,255} map.
GrayImage make_scribble(const GrayImage& boundary, const ScribbleConfig& cfg);

// palette[class_index] where mask=1, palette[0] elsewhere.
ColorImage make_segmap(const BinaryMask& mask, int class_index, const Palette& palette);

inline constexpr const char* kPromptPlaceholder = "{class}";
inline constexpr const char* kDefaultPromptTemplate = "a real shot photo of {class}";

// Substitutes the class name for the placeholder; the template must contain
// it exactly once.
std::string make_prompt(const std::string& class_name, const std::string& template_text);

struct ConditionConfig {
    ScribbleConfig scribble;
    // 0 = detect at native resolution; otherwise the image is resized to
    // edge_resolution x edge_resolution for detection and the edge map is
    // resized back. Logged in provenance either way.
    int edge_resolution = 0;
    std::string prompt_template = kDefaultPromptTemplate;
};

ControlCondition build_condition(const SupportSample& support, ConditionKind kind,
                                 const EdgeDetector& detector, const ConditionConfig& cfg,
                                 const Palette& palette);

}  // namespace diffss
