#include "diffss/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "diffss/conditions.hpp"
#include "diffss/drift.hpp"
#include "diffss/episodes.hpp"
#include "diffss/generation.hpp"
#include "diffss/metrics.hpp"
#include "diffss/minicoco.hpp"
#include "diffss/png_io.hpp"
#include "diffss/proto_analysis.hpp"
#include "diffss/refseg.hpp"
#include "path_util.hpp"

namespace diffss {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<ConditionKind> resolve_guidance(const std::string& s) {
    if (s == "all") return {ConditionKind::segmap, ConditionKind::hed, ConditionKind::scribble};
    return {condition_kind_from_string(s)};
}

void apply_workers(int workers) {
#ifdef _OPENMP
    if (workers > 0) omp_set_num_threads(workers);
#else
    (void)workers;
#endif
}

void require_opt(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Applies a flat key=value file to the subcommand's options. Options already
// given on the command line keep their value; everything else goes through the
// option's own parser so types and validators still apply.
void apply_flat_config(CLI::App& sub, const std::string& path) {
    if (path.empty()) return;
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    std::istringstream lines(text);
    std::string line;
    for (int lineno = 1; std::getline(lines, line); ++lineno) {
        std::string entry = trim(line);
        if (entry.empty() || entry[0] == '#') continue;
        std::size_t eq = entry.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError(path + " line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(entry.substr(0, eq));
        std::string value = trim(entry.substr(eq + 1));
        CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (!opt)
            throw ConfigError(path + ": unknown key '" + key + "' for " + sub.get_name());
        if (opt->count() > 0) continue;
        opt->add_result(value);
        try {
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw ConfigError(path + ": " + key + ": " + e.what());
        }
    }
}

using KvList = std::vector<std::pair<std::string, ordered_json>>;

void write_fingerprint(const fs::path& out_dir, const std::string& command, const KvList& kv) {
    ordered_json doc;
    doc["command"] = command;
    for (const auto& [k, v] : kv) doc[k] = v;
    atomic_write(out_dir / "fingerprint.json", doc.dump(2) + "\n");
}

std::unique_ptr<EdgeDetector> make_detector(const std::string& url, int timeout) {
    if (url.empty()) return std::make_unique<FallbackEdgeDetector>();
    return std::make_unique<RemoteEdgeDetector>(url, timeout);
}

// ---------------------------------------------------------------- conditions

struct ConditionsOpts {
    std::string config;
    std::string manifest;
    std::string out;
    std::string guidance = "all";
    int threshold = 128;
    int edge_resolution = 0;
    std::string edge_backend_url;
    std::string prompt_template = kDefaultPromptTemplate;
    int timeout = 30;
    bool keep_going = false;
    int workers = 0;
};

int run_conditions(const ConditionsOpts& o) {
    apply_workers(o.workers);
    require_opt(o.manifest, "--manifest");
    require_opt(o.out, "--out");
    if (o.threshold < 0 || o.threshold > 255)
        throw ConfigError("--threshold must be in [0,255]");
    Manifest manifest = load_manifest(o.manifest);
    DatasetIndex index(manifest);
    std::vector<ConditionKind> kinds = resolve_guidance(o.guidance);
    std::unique_ptr<EdgeDetector> detector = make_detector(o.edge_backend_url, o.timeout);
    Palette palette;
    ConditionConfig cfg;
    cfg.scribble.threshold = static_cast<std::uint8_t>(o.threshold);
    cfg.edge_resolution = o.edge_resolution;
    cfg.prompt_template = o.prompt_template;

    fs::create_directories(o.out);
    std::string provenance;
    int written = 0, failures = 0;
    for (const ManifestRecord& rec : manifest.records) {
        try {
            SupportSample support = load_support(index, rec.id);
            for (ConditionKind kind : kinds) {
                ControlCondition cond = build_condition(support, kind, *detector, cfg, palette);
                std::string file =
                    detail::sanitize_for_path(rec.id) + "__" + to_string(kind) + ".png";
                atomic_write(fs::path(o.out) / file, encode_condition_png(cond.condition_image));
                ordered_json line;
                line["source_id"] = cond.source_id;
                line["kind"] = to_string(kind);
                line["image"] = file;
                line["prompt"] = cond.prompt;
                line["detector"] = detector->id();
                line["threshold"] = o.threshold;
                line["edge_resolution"] = o.edge_resolution;
                provenance += line.dump();
                provenance += '\n';
                ++written;
            }
        } catch (const BackendError&) {
            throw;
        } catch (const std::exception& e) {
            if (!o.keep_going) throw;
            ++failures;
            std::cerr << "skipping " << rec.id << ": " << e.what() << "\n";
        }
    }
    atomic_write(fs::path(o.out) / "conditions.jsonl", provenance);
    write_fingerprint(o.out, "conditions",
                      {{"manifest", o.manifest},
                       {"guidance", o.guidance},
                       {"threshold", o.threshold},
                       {"edge_resolution", o.edge_resolution},
                       {"edge_backend_url", o.edge_backend_url},
                       {"prompt_template", o.prompt_template},
                       {"detector", detector->id()}});
    std::cout << "wrote " << written << " condition images to " << o.out;
    if (failures) std::cout << " (" << failures << " records skipped)";
    std::cout << "\n";
    return 0;
}

// ------------------------------------------------------------------ generate

struct GenerateOpts {
    std::string config;
    std::string manifest;
    std::string out;
    std::string guidance = "segmap";
    int n_aux = 4;
    std::uint64_t seed = 0;
    std::string backend = "mock";
    std::string backend_url;
    int timeout = 120;
    int threshold = 128;
    int edge_resolution = 0;
    std::string edge_backend_url;
    std::string prompt_template = kDefaultPromptTemplate;
    std::vector<std::string> params;
    double jitter_scale = MockConfig{}.jitter_scale;
    double jitter_offset = MockConfig{}.jitter_offset;
    double noise_amplitude = MockConfig{}.noise_amplitude;
    int noise_cell = MockConfig{}.noise_cell;
    int workers = 0;
};

std::map<std::string, std::string> parse_params(const std::vector<std::string>& kvs) {
    std::map<std::string, std::string> params;
    for (const std::string& kv : kvs) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--param expects key=value, got " + kv);
        params[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return params;
}

int run_generate(const GenerateOpts& o) {
    apply_workers(o.workers);
    require_opt(o.manifest, "--manifest");
    require_opt(o.out, "--out");
    if (o.n_aux < 0) throw ConfigError("--n-aux must be >= 0");
    Manifest manifest = load_manifest(o.manifest);
    DatasetIndex index(manifest);
    std::vector<ConditionKind> kinds = resolve_guidance(o.guidance);
    std::unique_ptr<EdgeDetector> detector = make_detector(o.edge_backend_url, o.timeout);
    Palette palette;
    ConditionConfig cond_cfg;
    cond_cfg.scribble.threshold = static_cast<std::uint8_t>(o.threshold);
    cond_cfg.edge_resolution = o.edge_resolution;
    cond_cfg.prompt_template = o.prompt_template;
    std::map<std::string, std::string> params = parse_params(o.params);

    SupportLoader loader = [&index](const std::string& id) { return load_support(index, id); };
    std::unique_ptr<Generator> backend;
    if (o.backend == "mock") {
        MockConfig mock_cfg;
        mock_cfg.jitter_scale = o.jitter_scale;
        mock_cfg.jitter_offset = o.jitter_offset;
        mock_cfg.noise_amplitude = o.noise_amplitude;
        mock_cfg.noise_cell = o.noise_cell;
        backend = std::make_unique<MockGenerator>(loader, mock_cfg);
    } else if (o.backend == "http") {
        std::string url = o.backend_url;
        if (url.empty()) {
            const char* env = std::getenv(kGeneratorUrlEnv);
            if (env) url = env;
        }
        if (url.empty())
            throw ConfigError(std::string("http backend needs --backend-url or ") +
                              kGeneratorUrlEnv);
        backend = std::make_unique<HttpGenerator>(url, o.timeout);
    } else {
        throw ConfigError("--backend must be mock or http, got " + o.backend);
    }

    fs::create_directories(o.out);
    GeneratedStore store = load_store(o.out);
    std::set<std::string> existing;
    for (const StoreRecord& rec : store.records) existing.insert(rec.provenance.id());

    std::vector<StoreRecord> records = store.records;
    int generated_count = 0;
    auto flush = [&]() { write_store_provenance(o.out, records); };
    try {
        for (const ManifestRecord& rec : manifest.records) {
            for (ConditionKind kind : kinds) {
                bool complete = o.n_aux > 0;
                for (int k = 1; k <= o.n_aux; ++k) {
                    Provenance probe;
                    probe.kind = kind;
                    probe.source_id = rec.id;
                    probe.index_k = k;
                    if (!existing.count(probe.id())) {
                        complete = false;
                        break;
                    }
                }
                if (complete || o.n_aux == 0) continue;

                SupportSample support = load_support(index, rec.id);
                GenerationRequest req;
                req.condition = build_condition(support, kind, *detector, cond_cfg, palette);
                req.count = o.n_aux;
                req.seed = mix_seed(o.seed, rec.id + "#" + to_string(kind));
                req.params = params;
                std::vector<GeneratedImage> images = generate(req, *backend);
                for (GeneratedImage& g : images) {
                    g.provenance.class_index = support.class_index;
                    g.provenance.class_name = support.class_name;
                }
                save_store_images(o.out, images);
                for (const GeneratedImage& g : images)
                    records.push_back({g.provenance, store_image_path(g.provenance)});
                generated_count += static_cast<int>(images.size());
            }
        }
    } catch (...) {
        flush();  // keep the partial store loadable for a resumed run
        throw;
    }
    flush();
    std::set<std::string> distinct;
    for (const StoreRecord& rec : records) distinct.insert(rec.provenance.id());
    write_fingerprint(o.out, "generate",
                      {{"manifest", o.manifest},
                       {"guidance", o.guidance},
                       {"n_aux", o.n_aux},
                       {"seed", o.seed},
                       {"backend", backend->id()},
                       {"threshold", o.threshold},
                       {"edge_resolution", o.edge_resolution},
                       {"prompt_template", o.prompt_template},
                       {"jitter_scale", o.jitter_scale},
                       {"jitter_offset", o.jitter_offset},
                       {"noise_amplitude", o.noise_amplitude},
                       {"noise_cell", o.noise_cell}});
    std::cout << "store " << o.out << " holds " << distinct.size() << " images ("
              << generated_count << " new)\n";
    return 0;
}

// ------------------------------------------------------------------ evaluate

struct EvaluateOpts {
    std::string config;
    std::string manifest;
    std::string out;
    std::string dataset = "custom";
    std::vector<int> folds;
    std::string phase = "test";
    int k = 1;
    int n_aux = 0;
    std::string guidance = "none";
    std::string store;
    int episodes = 20;
    std::uint64_t seed = 0;
    std::string model_command;
    std::string compare_with;
    std::string reference_kshot;
    int workers = 0;
};

std::vector<int> default_folds(DatasetKind kind) {
    if (kind == DatasetKind::pascal5i || kind == DatasetKind::minicoco20i) return {0, 1, 2, 3};
    return {0};
}

std::vector<int> fss1000_phase_classes(const DatasetIndex& index, Phase phase) {
    std::map<int, std::string> names;
    for (const ManifestRecord& rec : index.manifest().records)
        names.emplace(rec.class_indices[0], rec.class_names[0]);
    std::vector<std::string> ordered;
    ordered.reserve(names.size());
    for (const auto& [_, name] : names) ordered.push_back(name);
    Fss1000Split split = split_fss1000(ordered);
    const std::vector<std::string>& wanted = phase == Phase::train ? split.train_classes
                                             : phase == Phase::val ? split.val_classes
                                                                   : split.test_classes;
    std::set<std::string> wanted_set(wanted.begin(), wanted.end());
    std::vector<int> classes;
    for (const auto& [idx, name] : names)
        if (wanted_set.count(name)) classes.push_back(idx);
    return classes;
}

SplitSpec make_split(const DatasetIndex& index, DatasetKind kind, int fold, Phase phase) {
    SplitSpec split;
    split.dataset = kind;
    split.fold = fold;
    split.phase = phase;
    switch (kind) {
        case DatasetKind::pascal5i: {
            Pascal5iSplit s = split_pascal5i(fold);
            split.classes = phase == Phase::train ? s.train_classes : s.test_classes;
            break;
        }
        case DatasetKind::minicoco20i: {
            // Same consecutive-block convention as the 20-class benchmark,
            // scaled to 80 classes in four folds of 20.
            if (fold < 0 || fold > 3) throw ConfigError("minicoco20i fold must be in [0,3]");
            for (int c = 1; c <= 80; ++c) {
                bool in_test = c > 20 * fold && c <= 20 * fold + 20;
                if (in_test == (phase != Phase::train)) split.classes.push_back(c);
            }
            break;
        }
        case DatasetKind::fss1000:
            split.classes = fss1000_phase_classes(index, phase);
            break;
        case DatasetKind::custom:
            split.classes = index.classes();
            break;
    }
    return split;
}

int run_evaluate(const EvaluateOpts& o) {
    apply_workers(o.workers);
    require_opt(o.manifest, "--manifest");
    require_opt(o.out, "--out");
    DatasetKind dataset = dataset_kind_from_string(o.dataset);
    Phase phase = phase_from_string(o.phase);
    if (o.k < 1) throw ConfigError("--k must be >= 1");
    if (o.n_aux < 0) throw ConfigError("--n-aux must be >= 0");
    if (o.episodes < 1) throw ConfigError("--episodes must be >= 1");
    if (o.n_aux > 0 && o.guidance == "none")
        throw ConfigError("--n-aux > 0 needs --guidance segmap|hed|scribble");
    if (o.n_aux > 0 && o.store.empty())
        throw ConfigError("--n-aux > 0 needs --store with generated images");
    if (o.n_aux > 0 && o.k != 1)
        throw ConfigError("auxiliaries extend 1-shot episodes; use --k 1");
    if (o.n_aux == 0 && o.guidance != "none")
        throw ConfigError("--guidance without --n-aux has no effect; use --n-aux");

    Manifest manifest = load_manifest(o.manifest);
    DatasetIndex index(manifest);
    std::vector<int> folds = o.folds.empty() ? default_folds(dataset) : o.folds;

    GeneratedStore store;
    ConditionKind aux_kind = ConditionKind::segmap;
    std::uint64_t generation_seed = 0;
    if (o.n_aux > 0) {
        store = load_store(o.store);
        aux_kind = condition_kind_from_string(o.guidance);
        fs::path store_fp = fs::path(o.store) / "fingerprint.json";
        if (fs::exists(store_fp)) {
            json doc = json::parse(read_text_file(store_fp), nullptr, false);
            if (!doc.is_discarded()) generation_seed = doc.value("seed", std::uint64_t{0});
        }
    }

    std::shared_ptr<const FeatureExtractor> extractor = std::make_shared<HandcraftedExtractor>();
    std::unique_ptr<FssModel> model;
    if (o.model_command.empty())
        model = std::make_unique<ReferenceModel>(extractor);
    else
        model = std::make_unique<SubprocessModel>(o.model_command, fs::path(o.out) / "adapter");

    ConfigFingerprint fp;
    fp.dataset = o.dataset;
    fp.phase = o.phase;
    fp.folds = folds;
    fp.k_original = o.k;
    fp.n_aux = o.n_aux;
    fp.guidance = o.guidance;
    fp.episode_seed = o.seed;
    fp.generation_seed = generation_seed;
    fp.episodes_per_fold = o.episodes;
    fp.model = model->id();
    fp.extractor = extractor->id();

    std::vector<FoldResult> fold_results;
    int total_failed = 0;
    for (int fold : folds) {
        SplitSpec split = make_split(index, dataset, fold, phase);
        IoUAccumulator acc;
        int failed = 0;
        for (int e = 0; e < o.episodes; ++e) {
            std::string episode_id = "f" + std::to_string(fold) + "-e" + std::to_string(e);
            try {
                Rng rng(mix_seed(o.seed, episode_id));
                EpisodeDraw draw = draw_episode(index, split, o.k, rng);
                Episode ep = materialize_episode(index, draw, fold, episode_id);
                if (o.n_aux > 0) {
                    std::vector<GeneratedImage> aux;
                    for (int k = 1; k <= o.n_aux; ++k) {
                        Provenance probe;
                        probe.kind = aux_kind;
                        probe.source_id = ep.supports[0].id;
                        probe.index_k = k;
                        const StoreRecord* rec = store.find(probe.id());
                        if (!rec)
                            throw std::runtime_error("store has no " + probe.id() +
                                                     "; run the generate step first");
                        aux.push_back(load_generated(store, *rec));
                    }
                    ep = extend_episode(ep, aux);
                }
                PredictedMask pred = segment_episode(ep, *model);
                acc.add(ep.class_index, pred.mask, ep.query.mask);
            } catch (const std::exception& e) {
                ++failed;
                std::cerr << "episode " << episode_id << " failed: " << e.what() << "\n";
            }
        }
        FoldResult fr;
        fr.fold = fold;
        fr.miou = acc.empty() ? 0.0 : acc.miou();
        fr.per_class = acc.per_class();
        fr.episodes = o.episodes;
        fr.failed_episodes = failed;
        total_failed += failed;
        fold_results.push_back(std::move(fr));
    }

    FoldReport report = make_fold_report(fp, std::move(fold_results));
    fs::create_directories(o.out);
    atomic_write(fs::path(o.out) / "report.json", fold_report_to_json(report));
    atomic_write(fs::path(o.out) / "report.txt", fold_report_to_table(report));
    atomic_write(fs::path(o.out) / "report.csv", fold_report_to_csv(report));
    write_fingerprint(o.out, "evaluate",
                      {{"manifest", o.manifest},
                       {"dataset", o.dataset},
                       {"phase", o.phase},
                       {"folds", folds},
                       {"k", o.k},
                       {"n_aux", o.n_aux},
                       {"guidance", o.guidance},
                       {"store", o.store},
                       {"episodes", o.episodes},
                       {"seed", o.seed},
                       {"generation_seed", generation_seed},
                       {"model", model->id()},
                       {"extractor", extractor->id()}});
    std::cout << fold_report_to_table(report);

    if (!o.compare_with.empty()) {
        FoldReport base = fold_report_from_json(read_text_file(o.compare_with));
        std::optional<FoldReport> reference;
        if (!o.reference_kshot.empty())
            reference = fold_report_from_json(read_text_file(o.reference_kshot));
        GainRecord rec;
        try {
            rec = gain(base, report, reference ? &*reference : nullptr);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        atomic_write(fs::path(o.out) / "gain.json", gain_record_to_json(rec));
        std::cout << "gain vs " << o.compare_with << ": " << rec.formatted << "\n";
    }

    int total_episodes = o.episodes * static_cast<int>(folds.size());
    if (total_failed * 100 > total_episodes)
        throw QualityGateError(std::to_string(total_failed) + " of " +
                               std::to_string(total_episodes) +
                               " episodes failed (threshold 1%)");
    return 0;
}

// --------------------------------------------------------------------- drift

struct DriftOpts {
    std::string config;
    std::string store;
    std::string manifest;
    std::string out;
    std::string segmenter = "reference";
    double floor = 0.0;
    int workers = 0;
};

int run_drift(const DriftOpts& o) {
    apply_workers(o.workers);
    require_opt(o.store, "--store");
    require_opt(o.manifest, "--manifest");
    require_opt(o.out, "--out");
    Manifest manifest = load_manifest(o.manifest);
    DatasetIndex index(manifest);
    GeneratedStore store = load_store(o.store);
    std::vector<GeneratedImage> images = load_all_generated(store);

    std::unique_ptr<DriftSegmenter> segmenter;
    if (o.segmenter == "oracle")
        segmenter = std::make_unique<OracleSegmenter>();
    else if (o.segmenter == "reference")
        segmenter = std::make_unique<ReferenceDriftSegmenter>();
    else
        throw ConfigError("--segmenter must be oracle or reference, got " + o.segmenter);

    SupportLoader loader = [&index](const std::string& id) { return load_support(index, id); };
    DriftReport report = audit(images, loader, *segmenter);

    fs::create_directories(o.out);
    atomic_write(fs::path(o.out) / "drift.json", drift_report_to_json(report));
    atomic_write(fs::path(o.out) / "drift.txt", drift_report_to_table(report));
    if (o.floor > 0.0) {
        std::vector<GeneratedImage> kept = filter_drifted(images, report, o.floor);
        std::string lines;
        for (const GeneratedImage& g : kept) {
            const StoreRecord* rec = store.find(g.provenance.id());
            ordered_json doc;
            doc["id"] = g.provenance.id();
            doc["image"] = rec ? rec->image_path : "";
            lines += doc.dump();
            lines += '\n';
        }
        atomic_write(fs::path(o.out) / "kept.jsonl", lines);
        std::cout << "floor " << o.floor << " keeps " << kept.size() << " of " << images.size()
                  << " images\n";
    }
    write_fingerprint(o.out, "drift",
                      {{"store", o.store},
                       {"manifest", o.manifest},
                       {"segmenter", segmenter->id()},
                       {"floor", o.floor}});
    std::cout << drift_report_to_table(report);
    return 0;
}

// --------------------------------------------------------------------- proto

struct ProtoOpts {
    std::string config;
    std::string manifest;
    std::string store;
    std::string out;
    std::string reducer = "pca";
    std::uint64_t seed = 0;
    int workers = 0;
};

int run_proto(const ProtoOpts& o) {
    apply_workers(o.workers);
    require_opt(o.manifest, "--manifest");
    require_opt(o.out, "--out");
    Manifest manifest = load_manifest(o.manifest);
    DatasetIndex index(manifest);

    std::vector<ProtoSample> samples;
    for (const ManifestRecord& rec : manifest.records) {
        QuerySample q = load_query(index, rec.id);
        samples.push_back({std::move(q.image), std::move(q.mask), q.class_index, Origin::raw,
                           rec.id});
    }
    if (!o.store.empty()) {
        GeneratedStore store = load_store(o.store);
        std::map<std::string, BinaryMask> source_masks;
        for (const StoreRecord& rec : store.records) {
            auto it = source_masks.find(rec.provenance.source_id);
            if (it == source_masks.end()) {
                SupportSample s = load_support(index, rec.provenance.source_id);
                it = source_masks.emplace(rec.provenance.source_id, std::move(s.mask)).first;
            }
            GeneratedImage g = load_generated(store, rec);
            samples.push_back({std::move(g.image), it->second, rec.provenance.class_index,
                               Origin::generated, rec.provenance.id()});
        }
    }

    HandcraftedExtractor extractor;
    PrototypeSet set = prototype_set(samples, extractor);
    EmbeddingExport embedding = embed2d(set, reducer_from_string(o.reducer), o.seed);

    fs::create_directories(o.out);
    atomic_write(fs::path(o.out) / "embedding.csv", embedding_to_csv(embedding));
    atomic_write(fs::path(o.out) / "embedding.svg", embedding_to_svg(embedding));

    // Consistency only covers classes observed with both origins.
    std::map<int, std::set<Origin>> origins;
    for (const PrototypeEntry& e : set.entries) origins[e.class_index].insert(e.origin);
    PrototypeSet scored;
    std::vector<int> skipped_classes;
    for (const auto& [cls, seen] : origins)
        if (seen.size() < 2) skipped_classes.push_back(cls);
    for (const PrototypeEntry& e : set.entries)
        if (origins[e.class_index].size() == 2) scored.entries.push_back(e);
    ordered_json consistency;
    consistency["per_class"] = ordered_json::object();
    if (!scored.entries.empty())
        for (const auto& [cls, score] : consistency_score(scored))
            consistency["per_class"][std::to_string(cls)] = score;
    consistency["skipped_classes"] = skipped_classes;
    consistency["skipped_empty_masks"] = set.skipped_empty_masks;
    atomic_write(fs::path(o.out) / "consistency.json", consistency.dump(2) + "\n");

    write_fingerprint(o.out, "proto",
                      {{"manifest", o.manifest},
                       {"store", o.store},
                       {"reducer", embedding.reducer_id},
                       {"seed", o.seed}});
    std::cout << "embedded " << embedding.points.size() << " prototypes ("
              << set.skipped_empty_masks << " empty masks skipped)\n";
    return 0;
}

// ------------------------------------------------------------------ minicoco

struct MinicocoOpts {
    std::string config;
    std::string train_manifest;
    std::vector<std::string> val_manifests;
    std::string val_pool;
    double ratio = 0.10;
    std::uint64_t seed = 0;
    int min_val = 6;
    std::string out;
};

std::string rebase_path(const fs::path& old_root, const std::string& rel,
                        const fs::path& new_root) {
    if (rel.empty()) return rel;
    fs::path src = (old_root / rel).lexically_normal();
    fs::path out = src.lexically_relative(new_root.lexically_normal());
    if (out.empty()) out = fs::absolute(src);
    return out.generic_string();
}

int run_minicoco(const MinicocoOpts& o) {
    require_opt(o.train_manifest, "--train-manifest");
    require_opt(o.out, "--out");
    if (o.val_manifests.empty()) throw ConfigError("--val-manifest is required");
    Manifest train = load_manifest(o.train_manifest);
    std::vector<Manifest> vals;
    for (const std::string& path : o.val_manifests) vals.push_back(load_manifest(path));
    Manifest pool = o.val_pool.empty() ? vals.back() : load_manifest(o.val_pool);

    MiniCocoConfig cfg;
    cfg.ratio = o.ratio;
    cfg.seed = o.seed;
    cfg.min_val_images_per_class = o.min_val;
    MiniCocoResult result = build_minicoco(train, vals, pool, cfg);

    fs::create_directories(o.out);
    // Rewritten so the emitted manifests resolve from the output directory.
    Manifest out_train = result.train;
    for (ManifestRecord& rec : out_train.records) {
        rec.image_path = rebase_path(result.train.root, rec.image_path, o.out);
        rec.mask_path = rebase_path(result.train.root, rec.mask_path, o.out);
    }
    Manifest out_val = result.val;
    for (ManifestRecord& rec : out_val.records) {
        rec.image_path = rebase_path(result.val.root, rec.image_path, o.out);
        rec.mask_path = rebase_path(result.val.root, rec.mask_path, o.out);
    }
    save_manifest(out_train, fs::path(o.out) / "train.jsonl");
    save_manifest(out_val, fs::path(o.out) / "val.jsonl");

    ordered_json stats;
    stats["train_images"] = result.train.records.size();
    stats["val_images"] = result.val.records.size();
    stats["classes"] = result.spec.classes;
    stats["topped_up_classes"] = result.topped_up_classes;
    ordered_json strata = ordered_json::object();
    for (const auto& [k, v] : result.train_stratum_counts) strata[k] = v;
    stats["train_stratum_counts"] = strata;
    stats["reference_full_scale"] = {{"train_images", kMiniCocoReferenceTrainImages},
                                     {"val_images", kMiniCocoReferenceValImages},
                                     {"classes", kMiniCocoClassCount}};
    atomic_write(fs::path(o.out) / "stats.json", stats.dump(2) + "\n");
    write_fingerprint(o.out, "minicoco",
                      {{"train_manifest", o.train_manifest},
                       {"val_manifests", o.val_manifests},
                       {"val_pool", o.val_pool},
                       {"ratio", o.ratio},
                       {"seed", o.seed},
                       {"min_val", o.min_val}});
    std::cout << "train " << result.train.records.size() << " images, val "
              << result.val.records.size() << " images (" << result.topped_up_classes
              << " classes topped up)\n";
    return 0;
}

// ------------------------------------------------------------------- wiring

void add_workers(CLI::App* sub, int& workers) {
    sub->add_option("--workers", workers, "worker threads for parallel kernels (0 = default)");
}

void add_config_opt(CLI::App* sub, std::string& path) {
    sub->add_option("--config", path,
                    "flat key=value file filling in unset options; flags take precedence");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"augments few-shot segmentation episodes with generated support images"};
    app.require_subcommand(1);

    ConditionsOpts co;
    CLI::App* conditions = app.add_subcommand(
        "conditions", "derive control conditions (seg map, boundary, scribble) from supports");
    add_config_opt(conditions, co.config);
    conditions->add_option("--manifest,-m", co.manifest, "dataset manifest (jsonl, required)");
    conditions->add_option("--out,-o", co.out, "output directory (required)");
    conditions->add_option("--guidance", co.guidance, "segmap|hed|scribble|all (default all)");
    conditions->add_option("--threshold", co.threshold, "scribble binarization threshold");
    conditions->add_option("--edge-resolution", co.edge_resolution,
                           "square size for edge detection, 0 = native");
    conditions->add_option("--edge-backend-url", co.edge_backend_url,
                           "neural edge detector endpoint (default: built-in fallback)");
    conditions->add_option("--prompt-template", co.prompt_template,
                           "prompt template with a {class} placeholder");
    conditions->add_option("--timeout", co.timeout, "backend timeout in seconds");
    conditions->add_flag("--keep-going", co.keep_going, "skip bad records instead of stopping");
    add_workers(conditions, co.workers);

    GenerateOpts go;
    CLI::App* generate_cmd =
        app.add_subcommand("generate", "produce auxiliary images into a store (resumable)");
    add_config_opt(generate_cmd, go.config);
    generate_cmd->add_option("--manifest,-m", go.manifest, "dataset manifest (jsonl, required)");
    generate_cmd->add_option("--out,-o", go.out, "store directory (required)");
    generate_cmd->add_option("--guidance", go.guidance, "segmap|hed|scribble|all (default segmap)");
    generate_cmd->add_option("--n-aux", go.n_aux, "images per support and guidance (default 4)");
    generate_cmd->add_option("--seed", go.seed, "generation seed");
    generate_cmd->add_option("--backend", go.backend, "mock|http (default mock)");
    generate_cmd->add_option("--backend-url", go.backend_url,
                             std::string("generator endpoint (or env ") + kGeneratorUrlEnv + ")");
    generate_cmd->add_option("--timeout", go.timeout, "backend timeout in seconds");
    generate_cmd->add_option("--threshold", go.threshold, "scribble binarization threshold");
    generate_cmd->add_option("--edge-resolution", go.edge_resolution,
                             "square size for edge detection, 0 = native");
    generate_cmd->add_option("--edge-backend-url", go.edge_backend_url,
                             "neural edge detector endpoint");
    generate_cmd->add_option("--prompt-template", go.prompt_template, "prompt template");
    generate_cmd->add_option("--param", go.params,
                             "opaque backend parameter key=value, repeatable");
    generate_cmd->add_option("--jitter-scale", go.jitter_scale, "mock: color scale jitter");
    generate_cmd->add_option("--jitter-offset", go.jitter_offset, "mock: color offset jitter");
    generate_cmd->add_option("--noise-amplitude", go.noise_amplitude, "mock: texture noise");
    generate_cmd->add_option("--noise-cell", go.noise_cell, "mock: noise cell size in pixels");
    add_workers(generate_cmd, go.workers);

    EvaluateOpts eo;
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "sample episodes, segment queries, report mIoU per fold");
    add_config_opt(evaluate, eo.config);
    evaluate->add_option("--manifest,-m", eo.manifest, "dataset manifest (jsonl, required)");
    evaluate->add_option("--out,-o", eo.out, "output directory (required)");
    evaluate->add_option("--dataset", eo.dataset, "pascal5i|fss1000|minicoco20i|custom");
    evaluate->add_option("--fold", eo.folds, "fold index, repeatable (default: all folds)");
    evaluate->add_option("--phase", eo.phase, "train|val|test (default test)");
    evaluate->add_option("--k", eo.k, "original supports per episode (default 1)");
    evaluate->add_option("--n-aux", eo.n_aux, "auxiliaries appended per episode (default 0)");
    evaluate->add_option("--guidance", eo.guidance, "guidance kind of the auxiliaries");
    evaluate->add_option("--store", eo.store, "generated-image store directory");
    evaluate->add_option("--episodes", eo.episodes, "episodes per fold (default 20)");
    evaluate->add_option("--seed", eo.seed, "episode sampling seed");
    evaluate->add_option("--model-command", eo.model_command,
                         "external model adapter command (default: built-in reference model)");
    evaluate->add_option("--compare-with", eo.compare_with,
                         "baseline report.json; emits gain.json");
    evaluate->add_option("--reference-kshot", eo.reference_kshot,
                         "true K-shot report.json for the second gain figure");
    add_workers(evaluate, eo.workers);

    DriftOpts dr;
    CLI::App* drift = app.add_subcommand(
        "drift", "segment generated images and score IoU against their source masks");
    add_config_opt(drift, dr.config);
    drift->add_option("--store", dr.store, "generated-image store directory (required)");
    drift->add_option("--manifest,-m", dr.manifest, "dataset manifest (jsonl, required)");
    drift->add_option("--out,-o", dr.out, "output directory (required)");
    drift->add_option("--segmenter", dr.segmenter, "oracle|reference (default reference)");
    drift->add_option("--floor", dr.floor, "keep images with IoU >= floor (0 = keep all)");
    add_workers(drift, dr.workers);

    ProtoOpts po;
    CLI::App* proto =
        app.add_subcommand("proto", "embed raw and generated prototypes into 2D for inspection");
    add_config_opt(proto, po.config);
    proto->add_option("--manifest,-m", po.manifest, "dataset manifest (jsonl, required)");
    proto->add_option("--store", po.store, "generated-image store directory");
    proto->add_option("--out,-o", po.out, "output directory (required)");
    proto->add_option("--reducer", po.reducer, "pca|tsne (default pca)");
    proto->add_option("--seed", po.seed, "reducer seed (tsne)");
    add_workers(proto, po.workers);

    MinicocoOpts mo;
    CLI::App* minicoco = app.add_subcommand(
        "minicoco", "stratified 10% reduction of a training manifest plus validation set");
    add_config_opt(minicoco, mo.config);
    minicoco->add_option("--train-manifest", mo.train_manifest,
                         "full training manifest (required)");
    minicoco->add_option("--val-manifest", mo.val_manifests,
                         "validation manifest, repeatable; the set is their intersection "
                         "(required)");
    minicoco->add_option("--val-pool", mo.val_pool,
                         "pool for per-class top-up (default: last --val-manifest)");
    minicoco->add_option("--ratio", mo.ratio, "kept fraction per stratum (default 0.10)");
    minicoco->add_option("--seed", mo.seed, "sampling seed");
    minicoco->add_option("--min-val", mo.min_val, "validation images per class (default 6)");
    minicoco->add_option("--out,-o", mo.out, "output directory (required)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (conditions->parsed()) {
            apply_flat_config(*conditions, co.config);
            return run_conditions(co);
        }
        if (generate_cmd->parsed()) {
            apply_flat_config(*generate_cmd, go.config);
            return run_generate(go);
        }
        if (evaluate->parsed()) {
            apply_flat_config(*evaluate, eo.config);
            return run_evaluate(eo);
        }
        if (drift->parsed()) {
            apply_flat_config(*drift, dr.config);
            return run_drift(dr);
        }
        if (proto->parsed()) {
            apply_flat_config(*proto, po.config);
            return run_proto(po);
        }
        if (minicoco->parsed()) {
            apply_flat_config(*minicoco, mo.config);
            return run_minicoco(mo);
        }
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const QualityGateError& e) {
        std::cerr << "quality gate: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("diffss");
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace diffss
