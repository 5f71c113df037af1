#include "diffss/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "diffss/common.hpp"
#include "diffss/kernels.hpp"

namespace diffss {

using nlohmann::json;
using nlohmann::ordered_json;

double iou(const BinaryMask& pred, const BinaryMask& gt) {
    auto [intersection, union_] = kernels::iou_counts(pred, gt);
    if (union_ == 0) return 1.0;  // both empty: the absent class was correctly rejected
    return static_cast<double>(intersection) / static_cast<double>(union_);
}

double miou(const std::vector<ClassIoU>& per_class) {
    if (per_class.empty()) throw std::invalid_argument("miou: no classes");
    double sum = 0.0;
    for (const ClassIoU& c : per_class) sum += c.value();
    return sum / static_cast<double>(per_class.size());
}

void IoUAccumulator::add(int class_index, const BinaryMask& pred, const BinaryMask& gt) {
    auto [intersection, union_] = kernels::iou_counts(pred, gt);
    add_counts(class_index, intersection, union_);
}

void IoUAccumulator::add_counts(int class_index, long long intersection, long long union_) {
    if (intersection < 0 || union_ < intersection)
        throw std::invalid_argument("add_counts: need 0 <= intersection <= union");
    auto& [i, u] = acc_[class_index];
    i += intersection;
    u += union_;
}

void IoUAccumulator::merge(const IoUAccumulator& other) {
    for (const auto& [c, counts] : other.acc_) add_counts(c, counts.first, counts.second);
}

std::vector<ClassIoU> IoUAccumulator::per_class() const {
    std::vector<ClassIoU> out;
    out.reserve(acc_.size());
    for (const auto& [c, counts] : acc_) out.push_back({c, counts.first, counts.second});
    return out;
}

double IoUAccumulator::miou() const { return diffss::miou(per_class()); }

bool ConfigFingerprint::comparable_with(const ConfigFingerprint& other) const {
    return dataset == other.dataset && phase == other.phase && folds == other.folds &&
           k_original == other.k_original && episode_seed == other.episode_seed &&
           episodes_per_fold == other.episodes_per_fold && model == other.model &&
           extractor == other.extractor;
}

FoldReport make_fold_report(ConfigFingerprint config, std::vector<FoldResult> folds) {
    if (folds.empty()) throw std::invalid_argument("make_fold_report: no folds");
    FoldReport report;
    report.config = std::move(config);
    report.folds = std::move(folds);
    double sum = 0.0;
    for (const FoldResult& f : report.folds) sum += f.miou;
    report.mean_miou = sum / static_cast<double>(report.folds.size());
    return report;
}

namespace {

std::string format_pct(const char* fmt, double fraction) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, fraction * 100.0);
    return buf;
}

}  // namespace

GainRecord gain(const FoldReport& base, const FoldReport& augmented,
                const FoldReport* reference_kshot) {
    if (!base.config.comparable_with(augmented.config))
        throw std::invalid_argument("gain: runs evaluate different episode sets");
    if (reference_kshot && !base.config.comparable_with(reference_kshot->config))
        throw std::invalid_argument("gain: reference run evaluates a different episode set");
    GainRecord rec;
    rec.base_mean = base.mean_miou;
    rec.augmented_mean = augmented.mean_miou;
    rec.delta = augmented.mean_miou - base.mean_miou;
    rec.formatted = format_pct("%+.1f", rec.delta);
    if (reference_kshot) {
        rec.reference_delta = reference_kshot->mean_miou - base.mean_miou;
        rec.formatted += "/" + format_pct("%.1f", *rec.reference_delta);
    }
    return rec;
}

namespace {

ordered_json fingerprint_to_json(const ConfigFingerprint& c) {
    ordered_json doc;
    doc["dataset"] = c.dataset;
    doc["phase"] = c.phase;
    doc["folds"] = c.folds;
    doc["k_original"] = c.k_original;
    doc["n_aux"] = c.n_aux;
    doc["guidance"] = c.guidance;
    doc["episode_seed"] = c.episode_seed;
    doc["generation_seed"] = c.generation_seed;
    doc["episodes_per_fold"] = c.episodes_per_fold;
    doc["model"] = c.model;
    doc["extractor"] = c.extractor;
    return doc;
}

ConfigFingerprint fingerprint_from_json(const json& doc) {
    ConfigFingerprint c;
    c.dataset = doc.at("dataset").get<std::string>();
    c.phase = doc.at("phase").get<std::string>();
    c.folds = doc.at("folds").get<std::vector<int>>();
    c.k_original = doc.at("k_original").get<int>();
    c.n_aux = doc.at("n_aux").get<int>();
    c.guidance = doc.at("guidance").get<std::string>();
    c.episode_seed = doc.at("episode_seed").get<std::uint64_t>();
    c.generation_seed = doc.at("generation_seed").get<std::uint64_t>();
    c.episodes_per_fold = doc.at("episodes_per_fold").get<int>();
    c.model = doc.at("model").get<std::string>();
    c.extractor = doc.at("extractor").get<std::string>();
    return c;
}

}  // namespace

std::string fold_report_to_json(const FoldReport& report) {
    ordered_json doc;
    doc["config"] = fingerprint_to_json(report.config);
    ordered_json folds = ordered_json::array();
    for (const FoldResult& f : report.folds) {
        ordered_json fd;
        fd["fold"] = f.fold;
        fd["miou"] = f.miou;
        fd["episodes"] = f.episodes;
        fd["failed_episodes"] = f.failed_episodes;
        ordered_json per_class = ordered_json::array();
        for (const ClassIoU& c : f.per_class)
            per_class.push_back({{"class", c.class_index},
                                 {"intersection", c.intersection},
                                 {"union", c.union_},
                                 {"iou", c.value()}});
        fd["per_class"] = per_class;
        folds.push_back(fd);
    }
    doc["folds"] = folds;
    doc["mean_miou"] = report.mean_miou;
    return doc.dump(2) + "\n";
}

FoldReport fold_report_from_json(const std::string& json_text) {
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("fold report: invalid JSON");
    FoldReport report;
    try {
        report.config = fingerprint_from_json(doc.at("config"));
        for (const json& fd : doc.at("folds")) {
            FoldResult f;
            f.fold = fd.at("fold").get<int>();
            f.miou = fd.at("miou").get<double>();
            f.episodes = fd.at("episodes").get<int>();
            f.failed_episodes = fd.at("failed_episodes").get<int>();
            for (const json& cd : fd.at("per_class"))
                f.per_class.push_back({cd.at("class").get<int>(),
                                       cd.at("intersection").get<long long>(),
                                       cd.at("union").get<long long>()});
            report.folds.push_back(std::move(f));
        }
        report.mean_miou = doc.at("mean_miou").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("fold report: ") + e.what());
    }
    return report;
}

std::string fold_report_to_table(const FoldReport& report) {
    std::ostringstream out;
    out << "model=" << report.config.model << " dataset=" << report.config.dataset
        << " phase=" << report.config.phase << " k=" << report.config.k_original
        << " n_aux=" << report.config.n_aux << " guidance=" << report.config.guidance << "\n";
    char buf[64];
    for (const FoldResult& f : report.folds) {
        std::snprintf(buf, sizeof(buf), "Fold-%-3d ", f.fold);
        out << buf;
    }
    out << "Mean\n";
    for (const FoldResult& f : report.folds) {
        std::snprintf(buf, sizeof(buf), "%-8.2f ", f.miou * 100.0);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.2f", report.mean_miou * 100.0);
    out << buf << "\n";
    return out.str();
}

std::string fold_report_to_csv(const FoldReport& report) {
    std::ostringstream out;
    out << "fold,miou,episodes,failed_episodes\n";
    char buf[64];
    for (const FoldResult& f : report.folds) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%d,%d\n", f.fold, f.miou, f.episodes,
                      f.failed_episodes);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "mean,%.17g,,\n", report.mean_miou);
    out << buf;
    return out.str();
}

std::string gain_record_to_json(const GainRecord& record) {
    ordered_json doc;
    doc["base_mean"] = record.base_mean;
    doc["augmented_mean"] = record.augmented_mean;
    doc["delta"] = record.delta;
    if (record.reference_delta)
        doc["reference_delta"] = *record.reference_delta;
    else
        doc["reference_delta"] = nullptr;
    doc["formatted"] = record.formatted;
    return doc.dump(2) + "\n";
}

}  // namespace diffss
