#include "diffss/refseg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "diffss/common.hpp"
#include "diffss/kernels.hpp"
#include "diffss/png_io.hpp"
#include "path_util.hpp"

namespace diffss {

FeatureMap HandcraftedExtractor::extract(const ColorImage& image) const {
    return kernels::extract_features(image);
}

Prototype masked_average_pool(const FeatureMap& features, const BinaryMask& mask) {
    Prototype p;
    p.vector = kernels::masked_mean(features, mask);
    p.norm_kind = Prototype::Norm::raw;
    return p;
}

Prototype l2_normalize(const Prototype& p) {
    double sq = 0.0;
    for (double v : p.vector) sq += v * v;
    double norm = std::sqrt(sq);
    if (norm == 0.0) throw std::invalid_argument("l2_normalize: zero vector");
    Prototype out;
    out.vector.reserve(p.vector.size());
    for (double v : p.vector) out.vector.push_back(v / norm);
    out.norm_kind = Prototype::Norm::l2;
    return out;
}

PredictedMask predict(const FeatureMap& query_features, const Prototype& fg, const Prototype& bg) {
    if (fg.channels() != query_features.channels || bg.channels() != query_features.channels)
        throw std::invalid_argument("predict: prototype channels " + std::to_string(fg.channels()) +
                                    "/" + std::to_string(bg.channels()) + " vs feature channels " +
                                    std::to_string(query_features.channels));
    auto all_zero = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    };
    if (all_zero(fg.vector) || all_zero(bg.vector))
        throw std::invalid_argument("predict: zero prototype");
    kernels::CosinePrediction pred = kernels::cosine_predict(query_features, fg.vector, bg.vector);
    return {std::move(pred.mask), std::move(pred.scores)};
}

BinaryMask complement(const BinaryMask& mask) {
    require_valid(mask, "complement");
    BinaryMask out = mask;
    for (std::uint8_t& v : out.values) v = static_cast<std::uint8_t>(1 - v);
    return out;
}

ReferenceModel::ReferenceModel(std::shared_ptr<const FeatureExtractor> extractor)
    : extractor_(std::move(extractor)) {
    if (!extractor_) throw std::invalid_argument("ReferenceModel: null extractor");
}

namespace {

// Mean over per-support prototypes. Shifting by the per-channel minimum and
// summing the shifted values in sorted order makes the result independent of
// support order, and equal to the common value (no rounding at all) when
// every support contributes the same prototype.
Prototype mean_prototype(const std::vector<Prototype>& parts) {
    std::size_t channels = parts.at(0).vector.size();
    for (const Prototype& p : parts)
        if (p.vector.size() != channels)
            throw std::invalid_argument("mean_prototype: channel count mismatch");
    Prototype out;
    out.vector.resize(channels);
    std::vector<double> shifted(parts.size());
    for (std::size_t c = 0; c < channels; ++c) {
        double ref = parts[0].vector[c];
        for (const Prototype& p : parts) ref = std::min(ref, p.vector[c]);
        for (std::size_t i = 0; i < parts.size(); ++i) shifted[i] = parts[i].vector[c] - ref;
        std::sort(shifted.begin(), shifted.end());
        double sum = 0.0;
        for (double v : shifted) sum += v;
        out.vector[c] = ref + sum / static_cast<double>(parts.size());
    }
    out.norm_kind = Prototype::Norm::raw;
    return out;
}

}  // namespace

PredictedMask ReferenceModel::segment(const Episode& episode) const {
    if (episode.supports.empty())
        throw std::invalid_argument("segment: episode " + episode.id + " has no supports");
    std::vector<Prototype> fg_parts, bg_parts;
    for (const SupportSample& s : episode.supports) {
        require_same_dims(s.image.width, s.image.height, s.mask.width, s.mask.height,
                          "segment support");
        FeatureMap features = extractor_->extract(s.image);
        fg_parts.push_back(masked_average_pool(features, s.mask));
        bg_parts.push_back(masked_average_pool(features, complement(s.mask)));
    }
    Prototype fg = mean_prototype(fg_parts);
    Prototype bg = mean_prototype(bg_parts);
    return predict(extractor_->extract(episode.query.image), fg, bg);
}

std::string ReferenceModel::id() const { return "reference:" + extractor_->id(); }

SubprocessModel::SubprocessModel(std::string command, std::filesystem::path work_dir)
    : command_(std::move(command)), work_dir_(std::move(work_dir)) {
    if (command_.empty()) throw ConfigError("SubprocessModel: empty command");
}

PredictedMask SubprocessModel::segment(const Episode& episode) const {
    std::filesystem::path dir = work_dir_ / detail::sanitize_for_path(episode.id);
    write_episode_dump(dir, {episode});
    std::filesystem::path episodes_file = dir / "episodes.jsonl";
    std::filesystem::path out_file = dir / "prediction.png";
    std::string cmd =
        command_ + " \"" + episodes_file.string() + "\" \"" + out_file.string() + "\"";
    int rc = std::system(cmd.c_str());
    if (rc != 0)
        throw BackendError("model adapter exited with status " + std::to_string(rc) + ": " + cmd);
    PredictedMask pred;
    pred.mask = read_mask_png(out_file);
    if (pred.mask.width != episode.query.image.width ||
        pred.mask.height != episode.query.image.height)
        throw BackendError("model adapter prediction is " + std::to_string(pred.mask.width) + "x" +
                           std::to_string(pred.mask.height) + ", query is " +
                           std::to_string(episode.query.image.width) + "x" +
                           std::to_string(episode.query.image.height));
    return pred;
}

std::string SubprocessModel::id() const { return "subprocess:" + command_; }

PredictedMask segment_episode(const Episode& episode, const FssModel& model) {
    try {
        return model.segment(episode);
    } catch (const BackendError& e) {
        throw BackendError("episode " + episode.id + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error("episode " + episode.id + ": " + e.what());
    }
}

}  // namespace diffss
