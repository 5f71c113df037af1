#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "diffss/image.hpp"
#include "diffss/refseg.hpp"

namespace diffss {

enum class Origin { raw, generated };

const char* to_string(Origin origin);
Origin origin_from_string(const std::string& s);

struct ProtoSample {
    ColorImage image;
    BinaryMask mask;
    int class_index = 0;
    Origin origin = Origin::raw;
    std::string id;
};

struct PrototypeEntry {
    int class_index = 0;
    Origin origin = Origin::raw;
    Prototype prototype;  // always l2-normalized
    std::string sample_id;
};

struct PrototypeSet {
    std::vector<PrototypeEntry> entries;
    int skipped_empty_masks = 0;
};

// extract -> masked average pool -> l2 normalize, per sample. Empty-mask
// samples are skipped and counted.
PrototypeSet prototype_set(const std::vector<ProtoSample>& samples,
                           const FeatureExtractor& extractor);

enum class Reducer { pca, tsne };

Reducer reducer_from_string(const std::string& s);

struct EmbeddingPoint {
    double x = 0.0;
    double y = 0.0;
    int class_index = 0;
    Origin origin = Origin::raw;
};

struct EmbeddingExport {
    std::vector<EmbeddingPoint> points;  // one per prototype, input order
    std::string reducer_id;
    std::uint64_t seed = 0;
};

// PCA (default) is fully deterministic: top-2 principal components of the
// mean-centered set, each component's sign fixed so its largest-magnitude
// coordinate is positive. t-SNE is optional and seed-stamped.
EmbeddingExport embed2d(const PrototypeSet& prototypes, Reducer reducer, std::uint64_t seed);

struct TsneConfig {
    double perplexity = 30.0;  // clamped to (n-1)/3 for small sets
    int iterations = 500;
    double learning_rate = 200.0;
    int early_exaggeration_iters = 250;
    double early_exaggeration = 12.0;
};

// Per class: mean cosine similarity between the generated prototypes and the
// renormalized centroid of the raw prototypes. Every class in the set must
// have both origins.
std::map<int, double> consistency_score(const PrototypeSet& prototypes);

std::string embedding_to_csv(const EmbeddingExport& embedding);
std::string embedding_to_svg(const EmbeddingExport& embedding);

}  // namespace diffss
