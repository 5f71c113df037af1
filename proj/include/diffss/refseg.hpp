#pragma once

#include <memory>
#include <string>
#include <vector>

#include "diffss/episodes.hpp"
#include "diffss/featuremap.hpp"
#include "diffss/image.hpp"

namespace diffss {

struct Prototype {
    enum class Norm { raw, l2 };
    std::vector<double> vector;
    Norm norm_kind = Norm::raw;

    int channels() const { return static_cast<int>(vector.size()); }
};

struct PredictedMask {
    BinaryMask mask;
    std::vector<double> scores;  // per-pixel foreground score in [0,1]; may be empty
};

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual FeatureMap extract(const ColorImage& image) const = 0;
    virtual std::string id() const = 0;
};

// Default extractor: [R, G, B, luma gradient magnitude, 3x3 luma mean,
// 3x3 luma variance] per pixel.
class HandcraftedExtractor final : public FeatureExtractor {
public:
    FeatureMap extract(const ColorImage& image) const override;
    std::string id() const override { return "handcrafted6"; }
};

Prototype masked_average_pool(const FeatureMap& features, const BinaryMask& mask);
Prototype l2_normalize(const Prototype& p);

// Per-pixel cosine match against the two prototypes. Ties go to background;
// score = (cos_fg - cos_bg + 2) / 4.
PredictedMask predict(const FeatureMap& query_features, const Prototype& fg, const Prototype& bg);

BinaryMask complement(const BinaryMask& mask);

// The model contract: consumes every support in the episode (auxiliaries are
// indistinguishable from originals here) and predicts the query mask.
class FssModel {
public:
    virtual ~FssModel() = default;
    virtual PredictedMask segment(const Episode& episode) const = 0;
    virtual std::string id() const = 0;
};

// Prototype-matching reference model: foreground prototype is the mean of the
// per-support masked-average-pooled prototypes, background prototype the mean
// of the per-support complement-masked prototypes.
class ReferenceModel final : public FssModel {
public:
    explicit ReferenceModel(std::shared_ptr<const FeatureExtractor> extractor =
                                std::make_shared<HandcraftedExtractor>());
    PredictedMask segment(const Episode& episode) const override;
    std::string id() const override;

private:
    std::shared_ptr<const FeatureExtractor> extractor_;
};

// Adapter for external models: writes a one-episode dump, runs
//   <command> <episodes.jsonl> <output.png>
// and reads the PNG prediction back. See docs/model-adapter.md.
class SubprocessModel final : public FssModel {
public:
    explicit SubprocessModel(std::string command, std::filesystem::path work_dir);
    PredictedMask segment(const Episode& episode) const override;
    std::string id() const override;

private:
    std::string command_;
    std::filesystem::path work_dir_;
};

// Runs the model on one episode; failures are rethrown with the episode id.
PredictedMask segment_episode(const Episode& episode, const FssModel& model);

}  // namespace diffss
