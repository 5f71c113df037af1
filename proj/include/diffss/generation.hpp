#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "diffss/conditions.hpp"
#include "diffss/episodes.hpp"
#include "diffss/image.hpp"

namespace diffss {

struct Provenance {
    std::string backend;
    std::uint64_t seed = 0;
    ConditionKind kind = ConditionKind::segmap;
    std::string source_id;
    int index_k = 0;  // 1-based position within the request
    int class_index = 0;
    std::string class_name;

    // Unique within a store: one image per (source, guidance kind, k).
    std::string id() const {
        return source_id + "#" + to_string(kind) + "#g" + std::to_string(index_k);
    }
};

struct GeneratedImage {
    ColorImage image;
    Provenance provenance;
};

struct GenerationRequest {
    ControlCondition condition;
    std::string prompt;  // empty = use condition.prompt
    int count = 0;
    std::uint64_t seed = 0;
    // Opaque sampler settings (guidance scale, steps, ...) forwarded to the
    // backend and logged, never interpreted here.
    std::map<std::string, std::string> params;

    const std::string& effective_prompt() const {
        return prompt.empty() ? condition.prompt : prompt;
    }
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual std::vector<GeneratedImage> generate(const GenerationRequest& req) const = 0;
    virtual std::string id() const = 0;
};

std::vector<GeneratedImage> generate(const GenerationRequest& req, const Generator& backend);

struct MockConfig {
    // Per-channel affine jitter: scale in [1-s, 1+s], offset in [-o, o].
    double jitter_scale = 0.25;
    double jitter_offset = 24.0;
    // Band-limited value noise added to foreground luma, in intensity units.
    double noise_amplitude = 18.0;
    int noise_cell = 8;  // noise grid cell size in pixels

    // Worst-case mean foreground intensity shift.
    double jitter_bound() const { return jitter_scale * 255.0 + jitter_offset + noise_amplitude; }
};

// Desk-scale stand-in for a diffusion backend: keeps the object exactly where
// the mask says it is (zero generation drift by construction), jitters
// foreground color and texture, and replaces the background with a seeded
// two-color gradient.
GeneratedImage mock_generate(const ControlCondition& condition, const ColorImage& support_image,
                             const BinaryMask& mask, std::uint64_t seed, int k,
                             const MockConfig& cfg = {});

using SupportLoader = std::function<SupportSample(const std::string& source_id)>;

class MockGenerator final : public Generator {
public:
    static constexpr int kMaxCount = 10000;

    MockGenerator(SupportLoader loader, MockConfig cfg = {});
    std::vector<GeneratedImage> generate(const GenerationRequest& req) const override;
    std::string id() const override { return "mock"; }

private:
    SupportLoader loader_;
    MockConfig cfg_;
};

// Wire client. POSTs one JSON document {condition, kind, prompt, count, seed,
// params} with a base64 PNG condition image; expects {"images": [b64, ...]}
// in request order. Images that come back at a different size are resized to
// the condition dimensions (bilinear).
class HttpGenerator final : public Generator {
public:
    explicit HttpGenerator(std::string url, int timeout_seconds = 120);
    std::vector<GeneratedImage> generate(const GenerationRequest& req) const override;
    std::string id() const override;

private:
    std::string url_;
    int timeout_seconds_;
};

inline constexpr const char* kGeneratorUrlEnv = "DIFFSS_GENERATOR_URL";

// Persisted store: images/<source>__<kind>__gK.png plus provenance.jsonl,
// rewritten as a whole in sorted order so re-runs and resumes are byte-stable.
struct StoreRecord {
    Provenance provenance;
    std::string image_path;  // relative to store dir
};

struct GeneratedStore {
    std::filesystem::path dir;
    std::vector<StoreRecord> records;

    const StoreRecord* find(const std::string& id) const;
};

// Relative image path inside a store for one provenance record.
std::string store_image_path(const Provenance& p);

GeneratedStore load_store(const std::filesystem::path& dir);
void save_store_images(const std::filesystem::path& dir, const std::vector<GeneratedImage>& images);
void write_store_provenance(const std::filesystem::path& dir, std::vector<StoreRecord> records);
GeneratedImage load_generated(const GeneratedStore& store, const StoreRecord& record);
std::vector<GeneratedImage> load_all_generated(const GeneratedStore& store);

}  // namespace diffss
