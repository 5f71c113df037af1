#include "diffss/episodes.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "diffss/generation.hpp"
#include "diffss/png_io.hpp"
#include "path_util.hpp"

namespace diffss {

using nlohmann::json;
using nlohmann::ordered_json;

const char* to_string(DatasetKind d) {
    switch (d) {
        case DatasetKind::pascal5i: return "pascal5i";
        case DatasetKind::fss1000: return "fss1000";
        case DatasetKind::minicoco20i: return "minicoco20i";
        case DatasetKind::custom: return "custom";
    }
    throw std::invalid_argument("unknown dataset kind value");
}

const char* to_string(Phase p) {
    switch (p) {
        case Phase::train: return "train";
        case Phase::val: return "val";
        case Phase::test: return "test";
    }
    throw std::invalid_argument("unknown phase value");
}

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "pascal5i") return DatasetKind::pascal5i;
    if (s == "fss1000") return DatasetKind::fss1000;
    if (s == "minicoco20i") return DatasetKind::minicoco20i;
    if (s == "custom") return DatasetKind::custom;
    throw std::invalid_argument("unknown dataset kind: " + s);
}

Phase phase_from_string(const std::string& s) {
    if (s == "train") return Phase::train;
    if (s == "val") return Phase::val;
    if (s == "test") return Phase::test;
    throw std::invalid_argument("unknown phase: " + s);
}

namespace {

ManifestRecord record_from_json(const json& doc, const std::string& where) {
    if (!doc.is_object()) throw ConfigError(where + ": record is not an object");
    ManifestRecord rec;
    try {
        rec.id = doc.at("id").get<std::string>();
        rec.image_path = doc.at("image").get<std::string>();
        rec.mask_path = doc.value("mask", std::string());
        rec.class_indices = doc.at("classes").get<std::vector<int>>();
        if (doc.contains("class_names"))
            rec.class_names = doc["class_names"].get<std::vector<std::string>>();
        if (doc.contains("size_buckets"))
            rec.size_buckets = doc["size_buckets"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    if (rec.id.empty()) throw ConfigError(where + ": empty id");
    if (rec.class_indices.empty()) throw ConfigError(where + ": record " + rec.id + " has no classes");
    if (rec.class_names.empty())
        for (int c : rec.class_indices) rec.class_names.push_back("class" + std::to_string(c));
    if (rec.size_buckets.empty())
        rec.size_buckets.assign(rec.class_indices.size(), "unknown");
    if (rec.class_names.size() != rec.class_indices.size() ||
        rec.size_buckets.size() != rec.class_indices.size())
        throw ConfigError(where + ": record " + rec.id +
                          " has mismatched classes/class_names/size_buckets lengths");
    return rec;
}

ordered_json record_to_json(const ManifestRecord& rec) {
    ordered_json doc;
    doc["id"] = rec.id;
    doc["image"] = rec.image_path;
    doc["mask"] = rec.mask_path;
    doc["classes"] = rec.class_indices;
    doc["class_names"] = rec.class_names;
    doc["size_buckets"] = rec.size_buckets;
    return doc;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
    Manifest manifest;
    manifest.root = path.parent_path();
    std::vector<std::string> lines;
    try {
        lines = read_jsonl_lines(path);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string where = path.string() + " line " + std::to_string(i + 1);
        json doc = json::parse(lines[i], nullptr, false);
        if (doc.is_discarded()) throw ConfigError(where + ": invalid JSON");
        manifest.records.push_back(record_from_json(doc, where));
    }
    return manifest;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::string out;
    for (const ManifestRecord& rec : manifest.records) {
        out += record_to_json(rec).dump();
        out += '\n';
    }
    atomic_write(path, out);
}

Pascal5iSplit split_pascal5i(int fold) {
    if (fold < 0 || fold > 3)
        throw std::invalid_argument("split_pascal5i: fold must be in [0,3], got " +
                                    std::to_string(fold));
    Pascal5iSplit split;
    for (int c = 1; c <= 20; ++c) {
        if (c > 5 * fold && c <= 5 * fold + 5)
            split.test_classes.push_back(c);
        else
            split.train_classes.push_back(c);
    }
    return split;
}

Fss1000Split split_fss1000(const std::vector<std::string>& class_names) {
    if (class_names.size() != 1000)
        throw ConfigError("split_fss1000: expected 1000 classes, got " +
                          std::to_string(class_names.size()));
    Fss1000Split split;
    split.train_classes.assign(class_names.begin(), class_names.begin() + 520);
    split.val_classes.assign(class_names.begin() + 520, class_names.begin() + 760);
    split.test_classes.assign(class_names.begin() + 760, class_names.end());
    return split;
}

DatasetIndex::DatasetIndex(const Manifest& manifest) : manifest_(&manifest) {
    for (const ManifestRecord& rec : manifest.records) {
        if (rec.class_indices.empty())
            throw ConfigError("manifest record " + rec.id + " has no classes");
        if (!by_id_.emplace(rec.id, &rec).second)
            throw ConfigError("manifest has duplicate id " + rec.id);
        by_class_[rec.class_indices[0]].push_back(&rec);
    }
}

std::vector<int> DatasetIndex::classes() const {
    std::vector<int> out;
    out.reserve(by_class_.size());
    for (const auto& [c, _] : by_class_) out.push_back(c);
    return out;
}

const std::vector<const ManifestRecord*>& DatasetIndex::records_of(int class_index) const {
    auto it = by_class_.find(class_index);
    if (it == by_class_.end())
        throw std::out_of_range("no records for class " + std::to_string(class_index));
    return it->second;
}

const ManifestRecord* DatasetIndex::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : it->second;
}

EpisodeDraw draw_episode(const DatasetIndex& index, const SplitSpec& split, int k, Rng& rng) {
    if (k < 1) throw std::invalid_argument("draw_episode: k must be >= 1");
    if (split.classes.empty()) throw ConfigError("draw_episode: split has no classes");

    std::vector<int> candidates;
    for (int c : split.classes) {
        if (std::find(candidates.begin(), candidates.end(), c) != candidates.end()) continue;
        try {
            if (index.records_of(c).size() >= static_cast<std::size_t>(k) + 1)
                candidates.push_back(c);
        } catch (const std::out_of_range&) {
        }
    }
    if (candidates.empty())
        throw ConfigError("draw_episode: no class has " + std::to_string(k + 1) + " records");

    int cls = candidates[static_cast<std::size_t>(rng.next_below(candidates.size()))];
    const auto& recs = index.records_of(cls);

    // Partial Fisher-Yates: the first k+1 slots become the episode.
    std::vector<std::size_t> order(recs.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i <= k; ++i) {
        std::size_t j = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(rng.next_below(order.size() - i));
        std::swap(order[static_cast<std::size_t>(i)], order[j]);
    }

    EpisodeDraw draw;
    draw.class_index = cls;
    for (int i = 0; i < k; ++i) draw.support_ids.push_back(recs[order[static_cast<std::size_t>(i)]]->id);
    draw.query_id = recs[order[static_cast<std::size_t>(k)]]->id;
    return draw;
}

namespace {

const ManifestRecord& require_record(const DatasetIndex& index, const std::string& id) {
    const ManifestRecord* rec = index.find(id);
    if (!rec) throw ConfigError("unknown record id " + id);
    return *rec;
}

void load_pair(const DatasetIndex& index, const ManifestRecord& rec, ColorImage& image,
               BinaryMask& mask, bool mask_required) {
    try {
        image = read_color_png(index.manifest().root / rec.image_path);
        if (rec.mask_path.empty()) {
            if (mask_required) throw ConfigError("record " + rec.id + " has no mask");
            mask = BinaryMask(image.width, image.height, 0);
            return;
        }
        mask = read_mask_png(index.manifest().root / rec.mask_path);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::runtime_error& e) {
        // Unreadable files are a manifest problem, not an internal failure.
        throw ConfigError("record " + rec.id + ": " + e.what());
    }
    require_same_dims(image.width, image.height, mask.width, mask.height,
                      ("record " + rec.id).c_str());
}

}  // namespace

SupportSample load_support(const DatasetIndex& index, const std::string& record_id) {
    const ManifestRecord& rec = require_record(index, record_id);
    SupportSample s;
    load_pair(index, rec, s.image, s.mask, true);
    if (s.mask.foreground_count() == 0)
        throw ConfigError("support " + rec.id + " has an empty mask");
    s.class_index = rec.class_indices[0];
    s.class_name = rec.class_names.empty() ? "" : rec.class_names[0];
    s.id = rec.id;
    return s;
}

QuerySample load_query(const DatasetIndex& index, const std::string& record_id) {
    const ManifestRecord& rec = require_record(index, record_id);
    QuerySample q;
    load_pair(index, rec, q.image, q.mask, false);
    q.class_index = rec.class_indices[0];
    q.class_name = rec.class_names.empty() ? "" : rec.class_names[0];
    q.id = rec.id;
    return q;
}

Episode materialize_episode(const DatasetIndex& index, const EpisodeDraw& draw, int fold,
                            const std::string& episode_id) {
    Episode ep;
    ep.id = episode_id;
    ep.fold = fold;
    ep.class_index = draw.class_index;
    for (const std::string& id : draw.support_ids) ep.supports.push_back(load_support(index, id));
    ep.query = load_query(index, draw.query_id);
    ep.k_original = static_cast<int>(ep.supports.size());
    ep.n_aux = 0;
    return ep;
}

Episode sample_episode(const DatasetIndex& index, const SplitSpec& split, int k,
                       std::uint64_t seed) {
    Rng rng(seed);
    EpisodeDraw draw = draw_episode(index, split, k, rng);
    return materialize_episode(index, draw, split.fold, "ep" + std::to_string(seed));
}

Episode extend_episode(const Episode& episode, const std::vector<GeneratedImage>& aux) {
    if (episode.k_original != 1 || episode.supports.size() != 1)
        throw std::invalid_argument("extend_episode: episode " + episode.id +
                                    " is not 1-shot (k_original=" +
                                    std::to_string(episode.k_original) + ")");
    Episode out = episode;
    const SupportSample& original = episode.supports[0];
    for (const GeneratedImage& g : aux) {
        if (g.provenance.source_id != original.id)
            throw std::invalid_argument("extend_episode: auxiliary " + g.provenance.id() +
                                        " was generated from " + g.provenance.source_id +
                                        ", episode support is " + original.id);
        require_same_dims(g.image.width, g.image.height, original.mask.width,
                          original.mask.height, "extend_episode auxiliary");
        SupportSample s;
        s.image = g.image;
        s.mask = original.mask;  // auxiliaries share the source mask byte for byte
        s.class_index = original.class_index;
        s.class_name = original.class_name;
        s.id = g.provenance.id();
        out.supports.push_back(std::move(s));
    }
    out.n_aux = static_cast<int>(aux.size());
    return out;
}

void write_episode_dump(const std::filesystem::path& dir, const std::vector<Episode>& episodes) {
    std::filesystem::create_directories(dir);
    std::string jsonl;
    std::set<std::string> used_dirs;
    for (const Episode& ep : episodes) {
        std::string ep_dir = detail::sanitize_for_path(ep.id);
        if (!used_dirs.insert(ep_dir).second)
            throw std::invalid_argument("write_episode_dump: duplicate episode directory " + ep_dir);
        std::filesystem::create_directories(dir / ep_dir);

        ordered_json doc;
        doc["id"] = ep.id;
        doc["fold"] = ep.fold;
        doc["class_index"] = ep.class_index;
        doc["class_name"] = ep.query.class_name;
        doc["k_original"] = ep.k_original;
        doc["n_aux"] = ep.n_aux;
        ordered_json supports = ordered_json::array();
        for (std::size_t i = 0; i < ep.supports.size(); ++i) {
            const SupportSample& s = ep.supports[i];
            std::string img_rel = ep_dir + "/support_" + std::to_string(i) + ".png";
            std::string mask_rel = ep_dir + "/support_" + std::to_string(i) + "_mask.png";
            write_png(dir / img_rel, s.image);
            write_png(dir / mask_rel, s.mask);
            supports.push_back({{"id", s.id}, {"image", img_rel}, {"mask", mask_rel}});
        }
        doc["supports"] = supports;
        std::string q_img = ep_dir + "/query.png";
        std::string q_mask = ep_dir + "/query_mask.png";
        write_png(dir / q_img, ep.query.image);
        write_png(dir / q_mask, ep.query.mask);
        doc["query"] = {{"id", ep.query.id}, {"image", q_img}, {"mask", q_mask}};
        jsonl += doc.dump();
        jsonl += '\n';
    }
    atomic_write(dir / "episodes.jsonl", jsonl);
}

std::vector<Episode> read_episode_dump(const std::filesystem::path& dir) {
    std::vector<Episode> episodes;
    for (const std::string& line : read_jsonl_lines(dir / "episodes.jsonl")) {
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded()) throw ConfigError("episode dump: invalid JSON line");
        Episode ep;
        try {
            ep.id = doc.at("id").get<std::string>();
            ep.fold = doc.at("fold").get<int>();
            ep.class_index = doc.at("class_index").get<int>();
            std::string class_name = doc.at("class_name").get<std::string>();
            ep.k_original = doc.at("k_original").get<int>();
            ep.n_aux = doc.at("n_aux").get<int>();
            for (const json& s : doc.at("supports")) {
                SupportSample sample;
                sample.id = s.at("id").get<std::string>();
                sample.image = read_color_png(dir / s.at("image").get<std::string>());
                sample.mask = read_mask_png(dir / s.at("mask").get<std::string>());
                sample.class_index = ep.class_index;
                sample.class_name = class_name;
                ep.supports.push_back(std::move(sample));
            }
            const json& q = doc.at("query");
            ep.query.id = q.at("id").get<std::string>();
            ep.query.image = read_color_png(dir / q.at("image").get<std::string>());
            ep.query.mask = read_mask_png(dir / q.at("mask").get<std::string>());
            ep.query.class_index = ep.class_index;
            ep.query.class_name = class_name;
        } catch (const json::exception& e) {
            throw ConfigError(std::string("episode dump: ") + e.what());
        }
        if (static_cast<int>(ep.supports.size()) != ep.k_original + ep.n_aux)
            throw ConfigError("episode dump: " + ep.id + " support count does not match K");
        episodes.push_back(std::move(ep));
    }
    return episodes;
}

}  // namespace diffss
