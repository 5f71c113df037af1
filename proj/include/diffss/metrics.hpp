#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diffss/image.hpp"

namespace diffss {

// |pred AND gt| / |pred OR gt|. Two empty masks give 1.0 (correct rejection
// of an absent class).
double iou(const BinaryMask& pred, const BinaryMask& gt);

struct ClassIoU {
    int class_index = 0;
    long long intersection = 0;
    long long union_ = 0;

    // A class whose union stayed zero only ever saw empty-vs-empty pairs.
    double value() const { return union_ == 0 ? 1.0 : static_cast<double>(intersection) / union_; }
};

// Unweighted mean over classes.
double miou(const std::vector<ClassIoU>& per_class);

// Streaming per-class accumulator: intersections and unions aggregate over
// all episodes of a class before the ratio. Partial accumulators merge
// associatively and commutatively.
class IoUAccumulator {
public:
    void add(int class_index, const BinaryMask& pred, const BinaryMask& gt);
    void add_counts(int class_index, long long intersection, long long union_);
    void merge(const IoUAccumulator& other);
    std::vector<ClassIoU> per_class() const;
    double miou() const;
    bool empty() const { return acc_.empty(); }

private:
    std::map<int, std::pair<long long, long long>> acc_;
};

struct ConfigFingerprint {
    std::string dataset;
    std::string phase;
    std::vector<int> folds;
    int k_original = 1;
    int n_aux = 0;
    std::string guidance;  // "segmap" | "hed" | "scribble" | "none"
    std::uint64_t episode_seed = 0;
    std::uint64_t generation_seed = 0;
    int episodes_per_fold = 0;
    std::string model;
    std::string extractor;

    // True when two runs evaluate the same episodes and differ only in
    // augmentation (n_aux, guidance, generation seed).
    bool comparable_with(const ConfigFingerprint& other) const;
};

struct FoldResult {
    int fold = 0;
    double miou = 0.0;
    std::vector<ClassIoU> per_class;
    int episodes = 0;
    int failed_episodes = 0;
};

struct FoldReport {
    ConfigFingerprint config;
    std::vector<FoldResult> folds;
    double mean_miou = 0.0;  // arithmetic mean over folds
};

FoldReport make_fold_report(ConfigFingerprint config, std::vector<FoldResult> folds);

struct GainRecord {
    double base_mean = 0.0;
    double augmented_mean = 0.0;
    double delta = 0.0;  // augmented - base
    std::optional<double> reference_delta;  // true K-shot gain, when provided
    std::string formatted;  // "+x.x" or "+x.x/y.y", values in percentage points
};

GainRecord gain(const FoldReport& base, const FoldReport& augmented,
                const FoldReport* reference_kshot = nullptr);

std::string fold_report_to_json(const FoldReport& report);
FoldReport fold_report_from_json(const std::string& json_text);
// Aligned-column table: one row per config, columns Fold-0..Fold-N and Mean.
std::string fold_report_to_table(const FoldReport& report);
std::string fold_report_to_csv(const FoldReport& report);
std::string gain_record_to_json(const GainRecord& record);

}  // namespace diffss
