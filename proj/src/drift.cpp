#include "diffss/drift.hpp"

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "diffss/metrics.hpp"

namespace diffss {

using nlohmann::json;
using nlohmann::ordered_json;

BinaryMask OracleSegmenter::segment(const ColorImage& image, const SupportSample& source) const {
    require_same_dims(image.width, image.height, source.mask.width, source.mask.height,
                      "oracle segment");
    return source.mask;
}

ReferenceDriftSegmenter::ReferenceDriftSegmenter(std::shared_ptr<const FeatureExtractor> extractor)
    : model_(std::move(extractor)) {}

BinaryMask ReferenceDriftSegmenter::segment(const ColorImage& image,
                                            const SupportSample& source) const {
    Episode ep;
    ep.id = "drift:" + source.id;
    ep.supports.push_back(source);
    ep.query.image = image;
    ep.query.mask = BinaryMask(image.width, image.height, 0);
    ep.query.class_index = source.class_index;
    ep.query.class_name = source.class_name;
    ep.query.id = source.id;
    ep.k_original = 1;
    ep.class_index = source.class_index;
    return model_.segment(ep).mask;
}

std::string ReferenceDriftSegmenter::id() const { return model_.id(); }

namespace {

struct MeanAcc {
    double sum = 0.0;
    int n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    double mean() const { return n == 0 ? 0.0 : sum / n; }
};

}  // namespace

DriftReport audit(const std::vector<GeneratedImage>& generated, const SupportLoader& sources,
                  const DriftSegmenter& segmenter) {
    if (!sources) throw std::invalid_argument("audit: null support loader");
    DriftReport report;
    report.segmenter_id = segmenter.id();

    // Source lookup failures are fatal (broken provenance); segmenter
    // failures are recorded per image and excluded from the means.
    std::map<std::string, SupportSample> cache;
    std::vector<std::string> source_order;
    auto source_of = [&](const std::string& id) -> const SupportSample& {
        auto it = cache.find(id);
        if (it == cache.end()) {
            it = cache.emplace(id, sources(id)).first;
            source_order.push_back(id);
        }
        return it->second;
    };

    MeanAcc overall;
    std::map<std::string, MeanAcc> per_guidance;
    std::map<int, MeanAcc> per_class;
    for (const GeneratedImage& g : generated) {
        DriftRecord rec;
        rec.generated_id = g.provenance.id();
        rec.source_id = g.provenance.source_id;
        rec.guidance = g.provenance.kind;
        rec.class_index = g.provenance.class_index;
        const SupportSample& source = source_of(g.provenance.source_id);
        try {
            BinaryMask pred = segmenter.segment(g.image, source);
            rec.iou = iou(pred, source.mask);
            overall.add(rec.iou);
            per_guidance[to_string(g.provenance.kind)].add(rec.iou);
            per_class[rec.class_index].add(rec.iou);
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
        }
        report.records.push_back(std::move(rec));
    }
    report.overall_mean = overall.mean();
    for (const auto& [k, acc] : per_guidance) report.per_guidance_mean[k] = acc.mean();
    for (const auto& [c, acc] : per_class) report.per_class_mean[c] = acc.mean();

    MeanAcc baseline;
    for (const std::string& id : source_order) {
        const SupportSample& source = cache.at(id);
        DriftRecord rec;
        rec.generated_id = id;
        rec.source_id = id;
        rec.class_index = source.class_index;
        try {
            BinaryMask pred = segmenter.segment(source.image, source);
            rec.iou = iou(pred, source.mask);
            baseline.add(rec.iou);
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
        }
        report.baseline_records.push_back(std::move(rec));
    }
    report.baseline_mean = baseline.mean();
    return report;
}

std::vector<GeneratedImage> filter_drifted(const std::vector<GeneratedImage>& generated,
                                           const DriftReport& report, double floor) {
    if (floor < 0.0 || floor > 1.0)
        throw std::invalid_argument("filter_drifted: floor must be in [0,1]");
    std::map<std::string, const DriftRecord*> by_id;
    for (const DriftRecord& r : report.records) by_id[r.generated_id] = &r;
    std::vector<GeneratedImage> kept;
    for (const GeneratedImage& g : generated) {
        auto it = by_id.find(g.provenance.id());
        if (it == by_id.end())
            throw std::invalid_argument("filter_drifted: report does not cover " +
                                        g.provenance.id());
        double v = it->second->failed ? 0.0 : it->second->iou;
        if (v >= floor) kept.push_back(g);
    }
    return kept;
}

namespace {

ordered_json record_to_json(const DriftRecord& r, bool with_guidance) {
    ordered_json doc;
    doc["id"] = r.generated_id;
    doc["source_id"] = r.source_id;
    if (with_guidance) doc["guidance"] = to_string(r.guidance);
    doc["class_index"] = r.class_index;
    doc["iou"] = r.iou;
    doc["failed"] = r.failed;
    if (r.failed) doc["error"] = r.error;
    return doc;
}

DriftRecord record_from_json(const json& doc, bool with_guidance) {
    DriftRecord r;
    r.generated_id = doc.at("id").get<std::string>();
    r.source_id = doc.at("source_id").get<std::string>();
    if (with_guidance) r.guidance = condition_kind_from_string(doc.at("guidance").get<std::string>());
    r.class_index = doc.at("class_index").get<int>();
    r.iou = doc.at("iou").get<double>();
    r.failed = doc.at("failed").get<bool>();
    if (r.failed) r.error = doc.value("error", std::string());
    return r;
}

}  // namespace

std::string drift_report_to_json(const DriftReport& report) {
    ordered_json doc;
    doc["segmenter"] = report.segmenter_id;
    doc["overall_mean"] = report.overall_mean;
    ordered_json pg = ordered_json::object();
    for (const auto& [k, v] : report.per_guidance_mean) pg[k] = v;
    doc["per_guidance_mean"] = pg;
    ordered_json pc = ordered_json::object();
    for (const auto& [c, v] : report.per_class_mean) pc[std::to_string(c)] = v;
    doc["per_class_mean"] = pc;
    doc["baseline_mean"] = report.baseline_mean;
    ordered_json records = ordered_json::array();
    for (const DriftRecord& r : report.records) records.push_back(record_to_json(r, true));
    doc["records"] = records;
    ordered_json baseline = ordered_json::array();
    for (const DriftRecord& r : report.baseline_records)
        baseline.push_back(record_to_json(r, false));
    doc["baseline_records"] = baseline;
    return doc.dump(2) + "\n";
}

DriftReport drift_report_from_json(const std::string& json_text) {
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("drift report: invalid JSON");
    DriftReport report;
    try {
        report.segmenter_id = doc.at("segmenter").get<std::string>();
        report.overall_mean = doc.at("overall_mean").get<double>();
        for (const auto& [k, v] : doc.at("per_guidance_mean").items())
            report.per_guidance_mean[k] = v.get<double>();
        for (const auto& [k, v] : doc.at("per_class_mean").items())
            report.per_class_mean[std::stoi(k)] = v.get<double>();
        report.baseline_mean = doc.at("baseline_mean").get<double>();
        for (const json& r : doc.at("records"))
            report.records.push_back(record_from_json(r, true));
        for (const json& r : doc.at("baseline_records"))
            report.baseline_records.push_back(record_from_json(r, false));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("drift report: ") + e.what());
    }
    return report;
}

std::string drift_report_to_table(const DriftReport& report) {
    std::ostringstream out;
    out << "segmenter: " << report.segmenter_id << "\n";
    out << "guidance   images  mean IoU\n";
    char buf[96];
    for (const auto& [k, v] : report.per_guidance_mean) {
        int n = 0;
        for (const DriftRecord& r : report.records)
            if (!r.failed && to_string(r.guidance) == k) ++n;
        std::snprintf(buf, sizeof(buf), "%-10s %-7d %.4f\n", k.c_str(), n, v);
        out << buf;
    }
    int baseline_n = 0;
    for (const DriftRecord& r : report.baseline_records)
        if (!r.failed) ++baseline_n;
    std::snprintf(buf, sizeof(buf), "%-10s %-7d %.4f\n", "original", baseline_n,
                  report.baseline_mean);
    out << buf;
    int overall_n = 0;
    for (const DriftRecord& r : report.records)
        if (!r.failed) ++overall_n;
    std::snprintf(buf, sizeof(buf), "%-10s %-7d %.4f\n", "overall", overall_n,
                  report.overall_mean);
    out << buf;
    DriftReferenceContext ref;
    char ref_line[160];
    std::snprintf(ref_line, sizeof(ref_line),
                  "\nfull-scale reference (pretrained segmenter, %% mIoU): segmap %.2f  hed %.2f"
                  "  scribble %.2f  original %.2f\n",
                  ref.segmap_miou_pct, ref.hed_miou_pct, ref.scribble_miou_pct,
                  ref.original_miou_pct);
    out << ref_line;
    return out.str();
}

}  // namespace diffss
