#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "diffss/episodes.hpp"

namespace diffss {

// Full-scale dataset sizes this construction targets when run on the real
// corpus; kept as metadata, never asserted at desk scale.
inline constexpr int kMiniCocoReferenceTrainImages = 8200;
inline constexpr int kMiniCocoReferenceValImages = 4953;
inline constexpr int kMiniCocoClassCount = 80;

struct MiniCocoConfig {
    double ratio = 0.10;
    std::uint64_t seed = 0;
    // A class "supports 5-shot" with at least this many validation images
    // (5 supports + 1 query).
    int min_val_images_per_class = 6;
};

struct MiniCocoResult {
    Manifest train;
    Manifest val;
    SplitSpec spec;  // dataset kind + the classes the reduced train set kept
    // Per-(class, size-bucket) counts of the emitted train manifest, keyed
    // "class:bucket" — what the stratification preserves.
    std::map<std::string, int> train_stratum_counts;
    int topped_up_classes = 0;  // classes that needed extra validation images
};

// Stratified reduction of the training manifest: per (class, size-bucket)
// stratum, keeps round(ratio * count) images, sampled without replacement
// under the seed. The validation set is the intersection of the given
// validation manifests, topped up per class from the pool (smallest id
// first) until 5-shot episodes are possible.
MiniCocoResult build_minicoco(const Manifest& train_manifest,
                              const std::vector<Manifest>& val_manifests,
                              const Manifest& val_pool, const MiniCocoConfig& cfg);

}  // namespace diffss
