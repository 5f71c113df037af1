#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "diffss/generation.hpp"
#include "diffss/refseg.hpp"

namespace diffss {

// Segments an image given the support sample it was generated from. Must be
// deterministic.
class DriftSegmenter {
public:
    virtual ~DriftSegmenter() = default;
    virtual BinaryMask segment(const ColorImage& image, const SupportSample& source) const = 0;
    virtual std::string id() const = 0;
};

// Returns the source mask unchanged; ground-truth fixture for audits of
// drift-free stores.
class OracleSegmenter final : public DriftSegmenter {
public:
    BinaryMask segment(const ColorImage& image, const SupportSample& source) const override;
    std::string id() const override { return "oracle"; }
};

// 1-shot reference model with the source as support and the audited image as
// query.
class ReferenceDriftSegmenter final : public DriftSegmenter {
public:
    explicit ReferenceDriftSegmenter(std::shared_ptr<const FeatureExtractor> extractor =
                                         std::make_shared<HandcraftedExtractor>());
    BinaryMask segment(const ColorImage& image, const SupportSample& source) const override;
    std::string id() const override;

private:
    ReferenceModel model_;
};

struct DriftRecord {
    std::string generated_id;
    std::string source_id;
    ConditionKind guidance = ConditionKind::segmap;
    int class_index = 0;
    double iou = 0.0;
    bool failed = false;
    std::string error;
};

struct DriftReport {
    std::string segmenter_id;
    std::vector<DriftRecord> records;
    std::map<std::string, double> per_guidance_mean;   // keyed by guidance name
    std::map<int, double> per_class_mean;              // second reporting granularity
    double overall_mean = 0.0;
    // Baseline: the same segmenter on the original support images.
    std::vector<DriftRecord> baseline_records;
    double baseline_mean = 0.0;
};

// Published GPU-scale reference values for this audit protocol (pretrained
// UPerNet segmenter), kept as context for reading desk-scale reports. Never
// asserted.
struct DriftReferenceContext {
    double segmap_miou_pct = 51.34;
    double hed_miou_pct = 56.39;
    double scribble_miou_pct = 51.56;
    double original_miou_pct = 71.41;
};

DriftReport audit(const std::vector<GeneratedImage>& generated, const SupportLoader& sources,
                  const DriftSegmenter& segmenter);

// Keeps images whose audited IoU is >= floor; order preserved. floor=0 keeps
// everything.
std::vector<GeneratedImage> filter_drifted(const std::vector<GeneratedImage>& generated,
                                           const DriftReport& report, double floor);

std::string drift_report_to_json(const DriftReport& report);
DriftReport drift_report_from_json(const std::string& json_text);
std::string drift_report_to_table(const DriftReport& report);

}  // namespace diffss
