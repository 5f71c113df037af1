#include "diffss/minicoco.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "diffss/common.hpp"

namespace diffss {

namespace {

struct StratumKey {
    int class_index;
    std::string bucket;

    bool operator<(const StratumKey& other) const {
        return std::tie(class_index, bucket) < std::tie(other.class_index, other.bucket);
    }
};

}  // namespace

MiniCocoResult build_minicoco(const Manifest& train_manifest,
                              const std::vector<Manifest>& val_manifests, const Manifest& val_pool,
                              const MiniCocoConfig& cfg) {
    if (cfg.ratio <= 0.0 || cfg.ratio > 1.0)
        throw ConfigError("build_minicoco: ratio must be in (0,1]");
    if (cfg.min_val_images_per_class < 1)
        throw ConfigError("build_minicoco: min_val_images_per_class must be >= 1");
    if (val_manifests.empty()) throw ConfigError("build_minicoco: no validation manifests");

    MiniCocoResult result;

    // Stratified train reduction. An image sits in the stratum of its primary
    // class and that instance's size bucket.
    std::map<StratumKey, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < train_manifest.records.size(); ++i) {
        const ManifestRecord& rec = train_manifest.records[i];
        if (rec.class_indices.empty())
            throw ConfigError("build_minicoco: record " + rec.id + " has no classes");
        strata[{rec.class_indices[0], rec.size_buckets[0]}].push_back(i);
    }

    std::set<std::size_t> selected;
    for (const auto& [key, members] : strata) {
        long long target = std::llround(cfg.ratio * static_cast<double>(members.size()));
        if (target < 1)
            throw ConfigError("build_minicoco: stratum class " + std::to_string(key.class_index) +
                              " bucket " + key.bucket + " has " + std::to_string(members.size()) +
                              " images, too few to sample at ratio " + std::to_string(cfg.ratio));
        Rng rng(mix_seed(cfg.seed, "minicoco:" + std::to_string(key.class_index) + ":" + key.bucket));
        std::vector<std::size_t> order = members;
        for (long long i = 0; i < target; ++i) {
            std::size_t j = static_cast<std::size_t>(i) +
                            static_cast<std::size_t>(rng.next_below(order.size() - i));
            std::swap(order[static_cast<std::size_t>(i)], order[j]);
        }
        for (long long i = 0; i < target; ++i) selected.insert(order[static_cast<std::size_t>(i)]);
        result.train_stratum_counts[std::to_string(key.class_index) + ":" + key.bucket] =
            static_cast<int>(target);
    }
    result.train.root = train_manifest.root;
    for (std::size_t i = 0; i < train_manifest.records.size(); ++i)
        if (selected.count(i)) result.train.records.push_back(train_manifest.records[i]);

    // Validation: ids present in every provided manifest, with record content
    // taken from the pool so all paths resolve against one root.
    std::map<std::string, const ManifestRecord*> pool_by_id;
    for (const ManifestRecord& rec : val_pool.records)
        if (!pool_by_id.emplace(rec.id, &rec).second)
            throw ConfigError("build_minicoco: pool has duplicate id " + rec.id);

    std::vector<std::set<std::string>> id_sets;
    for (const Manifest& m : val_manifests) {
        std::set<std::string> ids;
        for (const ManifestRecord& rec : m.records) ids.insert(rec.id);
        id_sets.push_back(std::move(ids));
    }
    std::set<std::string> chosen;
    for (const std::string& id : id_sets[0]) {
        bool everywhere = true;
        for (const auto& ids : id_sets)
            if (!ids.count(id)) {
                everywhere = false;
                break;
            }
        if (!everywhere) continue;
        if (!pool_by_id.count(id))
            throw ConfigError("build_minicoco: intersection id " + id + " is not in the pool");
        chosen.insert(id);
    }

    std::map<int, int> val_class_counts;
    for (const std::string& id : chosen) ++val_class_counts[pool_by_id.at(id)->class_indices[0]];

    // Top up classes short of a 5-shot episode from the pool, smallest id
    // first.
    std::map<int, std::vector<std::string>> pool_spares;
    for (const ManifestRecord& rec : val_pool.records)
        if (!chosen.count(rec.id)) pool_spares[rec.class_indices[0]].push_back(rec.id);
    for (auto& [cls, ids] : pool_spares) std::sort(ids.begin(), ids.end());

    std::set<int> pool_classes;
    for (const ManifestRecord& rec : val_pool.records) pool_classes.insert(rec.class_indices[0]);
    for (int cls : pool_classes) {
        int have = val_class_counts.count(cls) ? val_class_counts.at(cls) : 0;
        bool topped = false;
        auto it = pool_spares.find(cls);
        while (have < cfg.min_val_images_per_class && it != pool_spares.end() &&
               !it->second.empty()) {
            chosen.insert(it->second.front());
            it->second.erase(it->second.begin());
            ++have;
            topped = true;
        }
        if (have == 0)
            throw ConfigError("build_minicoco: class " + std::to_string(cls) +
                              " has no validation images after intersection");
        if (topped) ++result.topped_up_classes;
    }

    result.val.root = val_pool.root;
    for (const std::string& id : chosen) result.val.records.push_back(*pool_by_id.at(id));
    std::sort(result.val.records.begin(), result.val.records.end(),
              [](const ManifestRecord& a, const ManifestRecord& b) { return a.id < b.id; });

    result.spec.dataset = DatasetKind::minicoco20i;
    result.spec.fold = 0;
    result.spec.phase = Phase::train;
    std::set<int> train_classes;
    for (const ManifestRecord& rec : result.train.records)
        train_classes.insert(rec.class_indices[0]);
    result.spec.classes.assign(train_classes.begin(), train_classes.end());
    return result;
}

}  // namespace diffss
