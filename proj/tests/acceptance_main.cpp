// Release gate for the pipeline. Nine criteria, one PASS/FAIL line each;
// the exit status is the number of failed criteria. Every tolerance and
// pinned value lives here, next to the check that uses it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "diffss/cli.hpp"
#include "diffss/common.hpp"
#include "diffss/conditions.hpp"
#include "diffss/drift.hpp"
#include "diffss/episodes.hpp"
#include "diffss/generation.hpp"
#include "diffss/kernels.hpp"
#include "diffss/metrics.hpp"
#include "diffss/minicoco.hpp"
#include "diffss/png_io.hpp"
#include "diffss/proto_analysis.hpp"
#include "diffss/refseg.hpp"
#include "testutil.hpp"

using namespace diffss;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CriterionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& msg) {
    if (!ok) throw CriterionFailure(msg);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path condset_manifest() { return testutil::data_dir() / "condset" / "manifest.jsonl"; }
fs::path trend_manifest() { return testutil::data_dir() / "trend" / "manifest.jsonl"; }

SplitSpec full_split(const DatasetIndex& index) {
    SplitSpec split;
    split.dataset = DatasetKind::custom;
    split.fold = 0;
    split.phase = Phase::test;
    split.classes = index.classes();
    return split;
}

// Seeded mock auxiliaries for one support, segmap-conditioned.
std::vector<GeneratedImage> mock_aux(const DatasetIndex& index, const SupportSample& support,
                                     int count, std::uint64_t seed) {
    Palette palette;
    GenerationRequest req;
    req.condition.kind = ConditionKind::segmap;
    req.condition.condition_image = make_segmap(support.mask, support.class_index, palette);
    req.condition.source_id = support.id;
    req.condition.prompt = make_prompt(support.class_name, kDefaultPromptTemplate);
    req.count = count;
    req.seed = seed;
    MockGenerator backend([&index](const std::string& id) { return load_support(index, id); });
    return generate(req, backend);
}

bool scores_bitwise_equal(const PredictedMask& a, const PredictedMask& b) {
    if (a.scores.size() != b.scores.size()) return false;
    if (a.scores.empty()) return true;
    return std::memcmp(a.scores.data(), b.scores.data(), a.scores.size() * sizeof(double)) == 0;
}

// 1. Control conditions: the 12-image golden suite is byte-identical, the
//    scribble map stays strictly two-valued on 10,000 random-noise inputs,
//    the scribble composition law holds exactly, and the whole criterion
//    finishes inside 10 seconds.
void criterion_conditions(std::string& note) {
    auto start = std::chrono::steady_clock::now();
    Manifest manifest = load_manifest(condset_manifest());
    DatasetIndex index(manifest);
    FallbackEdgeDetector detector;
    ConditionConfig cfg;
    Palette palette;
    const ConditionKind kinds[] = {ConditionKind::segmap, ConditionKind::hed,
                                   ConditionKind::scribble};

    int goldens = 0;
    for (const ManifestRecord& rec : manifest.records) {
        SupportSample support = load_support(index, rec.id);
        for (ConditionKind kind : kinds) {
            ControlCondition cond = build_condition(support, kind, detector, cfg, palette);
            fs::path golden = testutil::data_dir() / "condset_golden" /
                              (rec.id + std::string("__") + to_string(kind) + ".png");
            require(encode_condition_png(cond.condition_image) == read_binary_file(golden),
                    "golden mismatch: " + golden.filename().string());
            ++goldens;
            if (kind == ConditionKind::scribble) {
                GrayImage expect = kernels::threshold_binary(
                    kernels::mask_filter(detector.detect(support.image), support.mask),
                    cfg.scribble.threshold);
                require(std::get<GrayImage>(cond.condition_image) == expect,
                        "composition law broke on fixture " + rec.id);
            }
        }
    }
    require(goldens == 36, "expected 36 golden comparisons, made " + std::to_string(goldens));

    for (int i = 0; i < 10000; ++i) {
        SupportSample s;
        s.image = testutil::random_image(1000 + i, 24, 16);
        s.mask = testutil::random_mask(500000 + i, 24, 16);
        s.class_index = 1 + i % 5;
        s.class_name = "noise";
        s.id = "noise" + std::to_string(i);
        ControlCondition cond =
            build_condition(s, ConditionKind::scribble, detector, cfg, palette);
        const GrayImage& scribble = std::get<GrayImage>(cond.condition_image);
        for (std::uint8_t v : scribble.values)
            require(v == 0 || v == 255, "scribble value " + std::to_string(v) + " on " + s.id);
        GrayImage expect = kernels::threshold_binary(
            kernels::mask_filter(detector.detect(s.image), s.mask), cfg.scribble.threshold);
        require(scribble == expect, "composition law broke on " + s.id);
    }

    double elapsed = seconds_since(start);
    require(elapsed < 10.0, "took " + std::to_string(elapsed) + "s, limit 10s");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "36 goldens, 10000 noise inputs, %.2fs < 10s", elapsed);
    note = buf;
}

// 2. Metrics: iou matches an independent brute force on 1,000 random 16x16
//    pairs exactly, streaming accumulation equals batch accumulation to
//    1e-12, and a 2x2 block shifted by one pixel scores exactly 1/3.
void criterion_metrics(std::string& note) {
    Rng rng(424242);
    auto random_mask = [&rng](int one_in) {
        BinaryMask m(16, 16);
        for (std::uint8_t& v : m.values)
            v = rng.next_below(static_cast<std::uint64_t>(one_in)) == 0 ? 1 : 0;
        return m;
    };

    IoUAccumulator streaming;
    std::map<int, std::pair<long long, long long>> totals;
    for (int i = 0; i < 1000; ++i) {
        BinaryMask a = random_mask(2 + i % 5);
        BinaryMask b = random_mask(2 + (i / 5) % 5);
        long long inter = 0, uni = 0;
        for (std::size_t p = 0; p < a.values.size(); ++p) {
            bool pa = a.values[p] != 0, pb = b.values[p] != 0;
            inter += pa && pb;
            uni += pa || pb;
        }
        double expect = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        require(iou(a, b) == expect, "iou differs from brute force at pair " + std::to_string(i));
        int cls = 1 + i % 7;
        streaming.add(cls, a, b);
        totals[cls].first += inter;
        totals[cls].second += uni;
    }
    require(iou(BinaryMask(4, 4), BinaryMask(4, 4)) == 1.0, "empty vs empty must be 1.0");

    IoUAccumulator batch;
    for (const auto& [cls, t] : totals) batch.add_counts(cls, t.first, t.second);
    std::vector<ClassIoU> sp = streaming.per_class();
    std::vector<ClassIoU> bp = batch.per_class();
    require(sp.size() == bp.size() && sp.size() == 7, "per-class size mismatch");
    for (std::size_t i = 0; i < sp.size(); ++i) {
        require(sp[i].class_index == bp[i].class_index, "per-class order mismatch");
        require(sp[i].intersection == bp[i].intersection && sp[i].union_ == bp[i].union_,
                "streaming counts differ from batch counts");
        require(std::abs(sp[i].value() - bp[i].value()) <= 1e-12, "per-class value drifted");
    }
    require(std::abs(streaming.miou() - batch.miou()) <= 1e-12,
            "streaming miou differs from batch miou");

    BinaryMask gt(8, 8), shifted(8, 8);
    for (int y = 3; y <= 4; ++y)
        for (int x = 3; x <= 4; ++x) {
            gt.at(x, y) = 1;
            shifted.at(x + 1, y) = 1;
        }
    require(iou(shifted, gt) == 1.0 / 3.0, "shifted 2x2 block must score exactly 1/3");
    note = "1000 pairs vs brute force, streaming == batch";
}

// 3. Episode extension: 500 seeded extensions keep the auxiliary masks
//    byte-equal to the source support, K is always 1 + n_aux, and a
//    provenance mismatch is always rejected.
void criterion_extension(std::string& note) {
    Manifest manifest = load_manifest(condset_manifest());
    DatasetIndex index(manifest);
    SplitSpec split = full_split(index);

    for (int i = 0; i < 500; ++i) {
        std::uint64_t seed = 90000 + static_cast<std::uint64_t>(i);
        Episode episode = sample_episode(index, split, 1, seed);
        const SupportSample& source = episode.supports[0];
        int n_aux = 1 + static_cast<int>(seed % 4);
        std::vector<GeneratedImage> aux = mock_aux(index, source, n_aux, mix_seed(7, seed));

        Episode extended = extend_episode(episode, aux);
        require(extended.supports.size() == static_cast<std::size_t>(1 + n_aux),
                "K != 1 + n_aux at extension " + std::to_string(i));
        require(extended.k_original == 1 && extended.n_aux == n_aux,
                "episode bookkeeping broke at extension " + std::to_string(i));
        for (std::size_t k = 1; k < extended.supports.size(); ++k) {
            require(extended.supports[k].mask == source.mask,
                    "auxiliary mask differs from source at extension " + std::to_string(i));
            require(extended.supports[k].class_index == source.class_index,
                    "auxiliary class differs at extension " + std::to_string(i));
        }

        std::vector<GeneratedImage> tampered = aux;
        tampered[static_cast<std::size_t>(i) % tampered.size()].provenance.source_id =
            "someone-else";
        bool rejected = false;
        try {
            extend_episode(episode, tampered);
        } catch (const std::exception&) {
            rejected = true;
        }
        require(rejected, "tampered provenance accepted at extension " + std::to_string(i));
    }
    note = "500 extensions, 500 rejected tamperings";
}

// 4. Reference model: extending an episode with exact copies of its support
//    leaves the prediction byte-identical to the 1-shot prediction, and
//    permuting support order never changes the output.
void criterion_reference_model(std::string& note) {
    Manifest manifest = load_manifest(trend_manifest());
    DatasetIndex index(manifest);
    SplitSpec split = full_split(index);
    ReferenceModel model;

    for (int i = 0; i < 25; ++i) {
        Episode episode = sample_episode(index, split, 1, 3000 + static_cast<std::uint64_t>(i));
        const SupportSample& source = episode.supports[0];
        PredictedMask base = segment_episode(episode, model);

        std::vector<GeneratedImage> copies;
        for (int k = 1; k <= 4; ++k) {
            GeneratedImage g;
            g.image = source.image;
            g.provenance.backend = "copy";
            g.provenance.kind = ConditionKind::segmap;
            g.provenance.source_id = source.id;
            g.provenance.index_k = k;
            g.provenance.class_index = source.class_index;
            g.provenance.class_name = source.class_name;
            copies.push_back(std::move(g));
        }
        PredictedMask copied = segment_episode(extend_episode(episode, copies), model);
        require(copied.mask == base.mask,
                "copy-extended mask differs from 1-shot at episode " + std::to_string(i));
        require(scores_bitwise_equal(copied, base),
                "copy-extended scores not bitwise equal at episode " + std::to_string(i));

        Episode mixed = extend_episode(
            episode, mock_aux(index, source, 3, 500 + static_cast<std::uint64_t>(i)));
        PredictedMask reference = segment_episode(mixed, model);
        for (std::size_t r = 1; r < mixed.supports.size(); ++r) {
            Episode permuted = mixed;
            std::rotate(permuted.supports.begin(), permuted.supports.begin() + r,
                        permuted.supports.end());
            PredictedMask p = segment_episode(permuted, model);
            require(p.mask == reference.mask && scores_bitwise_equal(p, reference),
                    "rotation " + std::to_string(r) + " changed the prediction");
        }
        Episode reversed = mixed;
        std::reverse(reversed.supports.begin(), reversed.supports.end());
        PredictedMask p = segment_episode(reversed, model);
        require(p.mask == reference.mask && scores_bitwise_equal(p, reference),
                "reversal changed the prediction");
    }
    note = "25 episodes, 4 copies each, all permutations stable";
}

// 5. Directional trend on the committed texture dataset: 40 seeded episodes,
//    4 mock auxiliaries. The augmented mean must beat 1-shot by at least
//    0.005 mIoU; the exact values were measured once and are pinned.
void criterion_trend(std::string& note) {
    // Pinned from the first measurement of this exact configuration
    // (episode seed 11, generation seed 77, guidance segmap, n_aux 4).
    constexpr double kPinnedBase = 0.60727822709297252;
    constexpr double kPinnedAugmented = 0.67877781875913978;
    constexpr double kPinnedDelta = 0.071499591666167261;
    constexpr double kRequiredMargin = 0.005;

    auto start = std::chrono::steady_clock::now();
    testutil::TempDir work("acceptance_trend");
    fs::path base = work;
    std::string manifest = trend_manifest().string();
    fs::path store = base / "store";
    fs::path base_out = base / "base";
    fs::path aug_out = base / "aug";

    require(run_cli({"generate", "-m", manifest, "-o", store.string(), "--guidance", "segmap",
                     "--n-aux", "4", "--seed", "77"}) == 0,
            "generate step failed");
    require(run_cli({"evaluate", "-m", manifest, "-o", base_out.string(), "--episodes", "40",
                     "--seed", "11"}) == 0,
            "1-shot evaluate failed");
    require(run_cli({"evaluate", "-m", manifest, "-o", aug_out.string(), "--episodes", "40",
                     "--seed", "11", "--n-aux", "4", "--guidance", "segmap", "--store",
                     store.string(), "--compare-with", (base_out / "report.json").string()}) == 0,
            "augmented evaluate failed");

    json gain = json::parse(read_text_file(aug_out / "gain.json"));
    double base_mean = gain.at("base_mean").get<double>();
    double augmented_mean = gain.at("augmented_mean").get<double>();
    double delta = gain.at("delta").get<double>();

    require(delta >= kRequiredMargin,
            "gain " + std::to_string(delta) + " is below the required margin");
    require(base_mean == kPinnedBase,
            "1-shot mean moved off its pin: " + std::to_string(base_mean));
    require(augmented_mean == kPinnedAugmented,
            "augmented mean moved off its pin: " + std::to_string(augmented_mean));
    require(delta == kPinnedDelta, "gain moved off its pin: " + std::to_string(delta));

    double elapsed = seconds_since(start);
    require(elapsed < 60.0, "took " + std::to_string(elapsed) + "s, limit 60s");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "+%.4f mIoU over 40 episodes, %.2fs < 60s", delta, elapsed);
    note = buf;
}

// 6. Drift audit: the oracle segmenter scores a drift-free mock store at
//    exactly 1.0 everywhere; a floor of 0.5 on {0.2, 0.6, 0.9} keeps exactly
//    two images; the published reference numbers ship as context only.
void criterion_drift(std::string& note) {
    Manifest manifest = load_manifest(condset_manifest());
    DatasetIndex index(manifest);
    SupportLoader loader = [&index](const std::string& id) { return load_support(index, id); };
    FallbackEdgeDetector detector;
    ConditionConfig cfg;
    Palette palette;

    std::vector<GeneratedImage> generated;
    for (int r = 0; r < 3; ++r) {
        SupportSample support = load_support(index, manifest.records[r].id);
        for (ConditionKind kind :
             {ConditionKind::segmap, ConditionKind::hed, ConditionKind::scribble}) {
            GenerationRequest req;
            req.condition = build_condition(support, kind, detector, cfg, palette);
            req.count = 2;
            req.seed = mix_seed(123, support.id + "#" + to_string(kind));
            MockGenerator backend(loader);
            std::vector<GeneratedImage> out = generate(req, backend);
            generated.insert(generated.end(), out.begin(), out.end());
        }
    }

    OracleSegmenter oracle;
    DriftReport report = audit(generated, loader, oracle);
    require(report.records.size() == 18, "expected 18 audited images");
    for (const DriftRecord& rec : report.records)
        require(!rec.failed && rec.iou == 1.0, "oracle audit not exactly 1.0 on " + rec.generated_id);
    require(report.overall_mean == 1.0, "overall mean not exactly 1.0");
    require(report.per_guidance_mean.size() == 3, "expected three guidance means");
    for (const auto& [kind, mean] : report.per_guidance_mean)
        require(mean == 1.0, "per-guidance mean for " + kind + " not exactly 1.0");
    for (const auto& [cls, mean] : report.per_class_mean)
        require(mean == 1.0, "per-class mean for class " + std::to_string(cls) + " not 1.0");
    require(report.baseline_mean == 1.0, "baseline mean not exactly 1.0");

    // Floor filter on a hand-built report.
    std::vector<GeneratedImage> trio;
    DriftReport fixture;
    const double ious[] = {0.2, 0.6, 0.9};
    for (int i = 0; i < 3; ++i) {
        GeneratedImage g;
        g.image = ColorImage(4, 4);
        g.provenance.backend = "mock";
        g.provenance.kind = ConditionKind::segmap;
        g.provenance.source_id = "src" + std::to_string(i);
        g.provenance.index_k = 1;
        DriftRecord rec;
        rec.generated_id = g.provenance.id();
        rec.source_id = g.provenance.source_id;
        rec.iou = ious[i];
        fixture.records.push_back(rec);
        trio.push_back(std::move(g));
    }
    std::vector<GeneratedImage> kept = filter_drifted(trio, fixture, 0.5);
    require(kept.size() == 2, "floor 0.5 on {0.2, 0.6, 0.9} must keep exactly 2");
    require(kept[0].provenance.source_id == "src1" && kept[1].provenance.source_id == "src2",
            "floor filter kept the wrong images");

    DriftReferenceContext context;
    require(context.segmap_miou_pct == 51.34 && context.hed_miou_pct == 56.39 &&
                context.scribble_miou_pct == 51.56 && context.original_miou_pct == 71.41,
            "published reference context changed");
    note = "18 oracle audits all exactly 1.0";
}

// 7. Prototype analysis: the pipeline equals its composed stages to 1e-12,
//    consistency hits exactly 1.0 on duplicates and 0.0 on orthogonal
//    prototypes, and the PCA export is byte-stable across rebuilds.
void criterion_proto(std::string& note) {
    Manifest manifest = load_manifest(condset_manifest());
    DatasetIndex index(manifest);
    HandcraftedExtractor extractor;

    auto make_samples = [&]() {
        std::vector<ProtoSample> samples;
        for (const ManifestRecord& rec : manifest.records) {
            SupportSample s = load_support(index, rec.id);
            ProtoSample ps;
            ps.image = std::move(s.image);
            ps.mask = std::move(s.mask);
            ps.class_index = s.class_index;
            ps.origin = Origin::raw;
            ps.id = s.id;
            samples.push_back(std::move(ps));
        }
        return samples;
    };

    std::vector<ProtoSample> samples = make_samples();
    PrototypeSet set = prototype_set(samples, extractor);
    require(set.entries.size() == samples.size(), "prototype count mismatch");
    require(set.skipped_empty_masks == 0, "fixture masks must not be empty");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        Prototype expect = l2_normalize(
            masked_average_pool(extractor.extract(samples[i].image), samples[i].mask));
        const PrototypeEntry& entry = set.entries[i];
        require(entry.sample_id == samples[i].id, "entry order changed");
        require(entry.prototype.vector.size() == expect.vector.size(), "channel count mismatch");
        for (std::size_t c = 0; c < expect.vector.size(); ++c)
            require(std::abs(entry.prototype.vector[c] - expect.vector[c]) <= 1e-12,
                    "pipeline differs from composed stages on " + samples[i].id);
    }

    auto anchor = [](int cls, Origin origin, std::vector<double> v, const char* id) {
        PrototypeEntry e;
        e.class_index = cls;
        e.origin = origin;
        e.prototype.vector = std::move(v);
        e.prototype.norm_kind = Prototype::Norm::l2;
        e.sample_id = id;
        return e;
    };
    PrototypeSet anchors;
    anchors.entries.push_back(anchor(3, Origin::raw, {1.0, 0.0, 0.0}, "dup_raw"));
    anchors.entries.push_back(anchor(3, Origin::generated, {1.0, 0.0, 0.0}, "dup_gen"));
    anchors.entries.push_back(anchor(4, Origin::raw, {0.0, 1.0, 0.0}, "orth_raw"));
    anchors.entries.push_back(anchor(4, Origin::generated, {0.0, 0.0, 1.0}, "orth_gen"));
    std::map<int, double> scores = consistency_score(anchors);
    require(scores.at(3) == 1.0, "duplicated prototype must score exactly 1.0");
    require(scores.at(4) == 0.0, "orthogonal prototype must score exactly 0.0");

    EmbeddingExport first = embed2d(set, Reducer::pca, 0);
    PrototypeSet rebuilt = prototype_set(make_samples(), extractor);
    EmbeddingExport second = embed2d(rebuilt, Reducer::pca, 0);
    require(embedding_to_csv(first) == embedding_to_csv(second), "PCA CSV not byte-stable");
    require(embedding_to_svg(first) == embedding_to_svg(second), "PCA SVG not byte-stable");
    note = "12 prototypes vs composed stages, exports byte-stable";
}

// 8. Stratified reduction: per-(class, bucket) counts stay within one image
//    of round(ratio * count) on a uniform and a skewed synthetic manifest,
//    the draw is seed-deterministic, and the full-scale counts are metadata.
void criterion_minicoco(std::string& note) {
    auto record = [](int cls, const std::string& bucket, int i) {
        ManifestRecord r;
        char id[32];
        std::snprintf(id, sizeof(id), "c%02d_%s_%03d", cls, bucket.c_str(), i);
        r.id = id;
        r.image_path = "images/" + r.id + ".png";
        r.class_indices = {cls};
        r.class_names = {"class" + std::to_string(cls)};
        r.size_buckets = {bucket};
        return r;
    };
    auto val_fixture = [&](int classes) {
        Manifest val;
        val.root = "mem";
        for (int cls = 1; cls <= classes; ++cls)
            for (int i = 0; i < 6; ++i) val.records.push_back(record(cls, "val", i));
        return val;
    };
    auto ids_of = [](const Manifest& m) {
        std::vector<std::string> ids;
        for (const ManifestRecord& r : m.records) ids.push_back(r.id);
        return ids;
    };
    auto check_strata = [&](const MiniCocoResult& result,
                            const std::map<std::string, int>& stratum_sizes, double ratio) {
        std::map<std::string, int> recount;
        for (const ManifestRecord& r : result.train.records)
            ++recount[std::to_string(r.class_indices[0]) + ":" + r.size_buckets[0]];
        require(recount == result.train_stratum_counts, "stratum counts disagree with records");
        for (const auto& [key, total] : stratum_sizes) {
            long long target = std::llround(ratio * total);
            auto it = result.train_stratum_counts.find(key);
            long long got = it == result.train_stratum_counts.end() ? 0 : it->second;
            require(std::llabs(got - target) <= 1,
                    "stratum " + key + ": kept " + std::to_string(got) + ", target " +
                        std::to_string(target));
        }
    };

    // Uniform: 10 classes x (40 small + 40 medium + 20 large).
    Manifest uniform;
    uniform.root = "mem";
    std::map<std::string, int> uniform_sizes;
    for (int cls = 1; cls <= 10; ++cls) {
        struct {
            const char* bucket;
            int count;
        } strata[] = {{"small", 40}, {"medium", 40}, {"large", 20}};
        for (const auto& s : strata) {
            for (int i = 0; i < s.count; ++i) uniform.records.push_back(record(cls, s.bucket, i));
            uniform_sizes[std::to_string(cls) + ":" + s.bucket] = s.count;
        }
    }
    Manifest val = val_fixture(10);

    MiniCocoConfig cfg;
    cfg.ratio = 0.10;
    cfg.seed = 5;
    MiniCocoResult first = build_minicoco(uniform, {val, val}, val, cfg);
    check_strata(first, uniform_sizes, cfg.ratio);
    require(first.topped_up_classes == 0, "no top-up expected");
    require(first.val.records.size() == 60, "val must be the 6-per-class intersection");

    MiniCocoResult again = build_minicoco(uniform, {val, val}, val, cfg);
    require(ids_of(first.train) == ids_of(again.train) && ids_of(first.val) == ids_of(again.val),
            "same seed must reproduce the same manifests");

    MiniCocoConfig other = cfg;
    other.seed = 6;
    MiniCocoResult different = build_minicoco(uniform, {val, val}, val, other);
    require(ids_of(different.train).size() == ids_of(first.train).size(),
            "rounding must not depend on the seed");
    require(ids_of(different.train) != ids_of(first.train),
            "a different seed must draw a different membership");

    // Skewed: 6 classes, stratum sizes vary per class.
    Manifest skewed;
    skewed.root = "mem";
    std::map<std::string, int> skewed_sizes;
    for (int cls = 1; cls <= 6; ++cls) {
        struct {
            const char* bucket;
            int count;
        } strata[] = {{"small", 14 + 3 * cls}, {"medium", 9}, {"large", 33 - 2 * cls}};
        for (const auto& s : strata) {
            for (int i = 0; i < s.count; ++i) skewed.records.push_back(record(cls, s.bucket, i));
            skewed_sizes[std::to_string(cls) + ":" + s.bucket] = s.count;
        }
    }
    Manifest skew_val = val_fixture(6);
    MiniCocoResult skew = build_minicoco(skewed, {skew_val, skew_val}, skew_val, cfg);
    check_strata(skew, skewed_sizes, cfg.ratio);

    require(kMiniCocoReferenceTrainImages == 8200 && kMiniCocoReferenceValImages == 4953 &&
                kMiniCocoClassCount == 80,
            "full-scale reference counts changed");
    note = "uniform + skewed strata within 1 of round(ratio * count)";
}

// 9. End to end: conditions -> generate (mock) -> evaluate, run twice,
//    produces byte-identical reports.
void criterion_end_to_end(std::string& note) {
    testutil::TempDir work("acceptance_e2e");
    fs::path base = work;
    std::string manifest = condset_manifest().string();
    fs::path store = base / "store";

    require(run_cli({"conditions", "-m", manifest, "-o", (base / "conds").string(), "--guidance",
                     "all"}) == 0,
            "conditions step failed");
    require(run_cli({"generate", "-m", manifest, "-o", store.string(), "--guidance", "segmap",
                     "--n-aux", "2", "--seed", "5"}) == 0,
            "generate step failed");
    for (const char* run : {"e1", "e2"})
        require(run_cli({"evaluate", "-m", manifest, "-o", (base / run).string(), "--episodes",
                         "10", "--seed", "3", "--n-aux", "2", "--guidance", "segmap", "--store",
                         store.string()}) == 0,
                std::string("evaluate run ") + run + " failed");
    for (const char* file : {"report.json", "report.txt", "report.csv"})
        require(read_binary_file(base / "e1" / file) == read_binary_file(base / "e2" / file),
                std::string(file) + " differs between identical runs");
    note = "two full runs, reports byte-identical";
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        void (*body)(std::string&);
    };
    const Criterion criteria[] = {
        {1, "control conditions: goldens, scribble range, composition law", criterion_conditions},
        {2, "metric oracle: brute force, streaming, shifted block", criterion_metrics},
        {3, "episode extension: masks, K, provenance", criterion_extension},
        {4, "reference model: copy extension, permutation invariance", criterion_reference_model},
        {5, "directional trend on the texture dataset", criterion_trend},
        {6, "drift audit: oracle, floor filter, reference context", criterion_drift},
        {7, "prototype analysis: composition, consistency, stable exports", criterion_proto},
        {8, "stratified reduction: counts, determinism, metadata", criterion_minicoco},
        {9, "end to end: byte-identical repeat runs", criterion_end_to_end},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        std::string detail;
        try {
            c.body(detail);
            std::printf("PASS  %d. %s%s%s\n", c.number, c.name, detail.empty() ? "" : " -- ",
                        detail.c_str());
        } catch (const std::exception& e) {
            ++failures;
            std::printf("FAIL  %d. %s -- %s\n", c.number, c.name, e.what());
        }
        std::fflush(stdout);
    }
    std::printf("%d of 9 criteria passed\n", 9 - failures);
    return failures;
}
