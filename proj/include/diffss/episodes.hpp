#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diffss/common.hpp"
#include "diffss/image.hpp"

namespace diffss {

struct SupportSample {
    ColorImage image;
    BinaryMask mask;
    int class_index = 0;
    std::string class_name;
    std::string id;
};

struct QuerySample {
    ColorImage image;
    BinaryMask mask;  // evaluation-only
    int class_index = 0;
    std::string class_name;
    std::string id;
};

// One evaluation unit: K supports (originals first, then auxiliaries) plus a
// query of the same class. K = k_original + n_aux.
struct Episode {
    std::string id;
    std::vector<SupportSample> supports;
    QuerySample query;
    int k_original = 0;
    int n_aux = 0;
    int fold = 0;
    int class_index = 0;
};

enum class DatasetKind { pascal5i, fss1000, minicoco20i, custom };
enum class Phase { train, val, test };

const char* to_string(DatasetKind d);
const char* to_string(Phase p);
DatasetKind dataset_kind_from_string(const std::string& s);
Phase phase_from_string(const std::string& s);

struct SplitSpec {
    DatasetKind dataset = DatasetKind::custom;
    int fold = 0;
    Phase phase = Phase::val;
    std::vector<int> classes;
};

// One record per image. class_indices / class_names / size_buckets are
// parallel per-instance arrays; the mask (optional) is the binary foreground
// mask of the primary class, class_indices[0].
struct ManifestRecord {
    std::string id;
    std::string image_path;  // relative to the manifest's directory
    std::string mask_path;   // empty for metadata-only manifests
    std::vector<int> class_indices;
    std::vector<std::string> class_names;
    std::vector<std::string> size_buckets;
};

struct Manifest {
    std::filesystem::path root;  // directory the relative paths resolve from
    std::vector<ManifestRecord> records;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Test classes of fold f are the consecutive block {5f+1 .. 5f+5} of the 20
// classes; train is the remaining 15.
struct Pascal5iSplit {
    std::vector<int> train_classes;
    std::vector<int> test_classes;
};
Pascal5iSplit split_pascal5i(int fold);

// Splits a 1000-class manifest into 520/240/240 train/val/test class lists,
// in manifest order.
struct Fss1000Split {
    std::vector<std::string> train_classes;
    std::vector<std::string> val_classes;
    std::vector<std::string> test_classes;
};
Fss1000Split split_fss1000(const std::vector<std::string>& class_names);

// Groups manifest records by primary class for episode sampling.
class DatasetIndex {
public:
    explicit DatasetIndex(const Manifest& manifest);

    const Manifest& manifest() const { return *manifest_; }
    std::vector<int> classes() const;
    const std::vector<const ManifestRecord*>& records_of(int class_index) const;
    const ManifestRecord* find(const std::string& id) const;

private:
    const Manifest* manifest_;
    std::map<int, std::vector<const ManifestRecord*>> by_class_;
    std::map<std::string, const ManifestRecord*> by_id_;
};

struct EpisodeDraw {
    int class_index = 0;
    std::vector<std::string> support_ids;
    std::string query_id;
};

// Uniform over split classes with at least k+1 records, then k+1 distinct
// records of that class (k supports, one query). Pure id-level sampling.
EpisodeDraw draw_episode(const DatasetIndex& index, const SplitSpec& split, int k, Rng& rng);

SupportSample load_support(const DatasetIndex& index, const std::string& record_id);
QuerySample load_query(const DatasetIndex& index, const std::string& record_id);

Episode materialize_episode(const DatasetIndex& index, const EpisodeDraw& draw, int fold,
                            const std::string& episode_id);

Episode sample_episode(const DatasetIndex& index, const SplitSpec& split, int k,
                       std::uint64_t seed);

struct GeneratedImage;  // generation.hpp

// Appends auxiliaries to a 1-shot episode. Every auxiliary must trace back to
// the original support via provenance; each one inherits the support's mask
// byte-for-byte and its class.
Episode extend_episode(const Episode& episode, const std::vector<GeneratedImage>& aux);

// Episode dumps: JSONL plus PNGs, the wire format external FSS models consume.
void write_episode_dump(const std::filesystem::path& dir, const std::vector<Episode>& episodes);
std::vector<Episode> read_episode_dump(const std::filesystem::path& dir);

}  // namespace diffss
