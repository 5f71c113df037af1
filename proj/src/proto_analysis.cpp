#include "diffss/proto_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "diffss/common.hpp"

namespace diffss {

const char* to_string(Origin origin) {
    switch (origin) {
        case Origin::raw: return "raw";
        case Origin::generated: return "generated";
    }
    throw std::invalid_argument("unknown origin value");
}

Origin origin_from_string(const std::string& s) {
    if (s == "raw") return Origin::raw;
    if (s == "generated") return Origin::generated;
    throw std::invalid_argument("unknown origin: " + s);
}

PrototypeSet prototype_set(const std::vector<ProtoSample>& samples,
                           const FeatureExtractor& extractor) {
    PrototypeSet set;
    for (const ProtoSample& s : samples) {
        require_same_dims(s.image.width, s.image.height, s.mask.width, s.mask.height,
                          ("prototype_set sample " + s.id).c_str());
        if (s.mask.foreground_count() == 0) {
            ++set.skipped_empty_masks;
            continue;
        }
        PrototypeEntry entry;
        entry.class_index = s.class_index;
        entry.origin = s.origin;
        entry.prototype = l2_normalize(masked_average_pool(extractor.extract(s.image), s.mask));
        entry.sample_id = s.id;
        set.entries.push_back(std::move(entry));
    }
    return set;
}

Reducer reducer_from_string(const std::string& s) {
    if (s == "pca") return Reducer::pca;
    if (s == "tsne") return Reducer::tsne;
    throw std::invalid_argument("unknown reducer: " + s);
}

namespace {

Eigen::MatrixXd entries_matrix(const PrototypeSet& prototypes) {
    std::size_t n = prototypes.entries.size();
    if (n < 2) throw std::invalid_argument("embed2d: need at least 2 prototypes");
    std::size_t d = prototypes.entries[0].prototype.vector.size();
    Eigen::MatrixXd x(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double>& v = prototypes.entries[i].prototype.vector;
        if (v.size() != d) throw std::invalid_argument("embed2d: prototype dimension mismatch");
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j)) = v[j];
    }
    return x;
}

// Flip so the largest-magnitude coordinate is positive (smallest index wins
// ties), which pins the otherwise arbitrary eigenvector sign.
Eigen::VectorXd fix_sign(Eigen::VectorXd v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (std::abs(v(i)) > std::abs(v(best))) best = i;
    if (v(best) < 0.0) v = -v;
    return v;
}

std::vector<EmbeddingPoint> pca2d(const PrototypeSet& prototypes) {
    Eigen::MatrixXd x = entries_matrix(prototypes);
    Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mean;
    Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(x.rows());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("embed2d: eigendecomposition failed");
    Eigen::Index d = cov.rows();
    if (solver.eigenvalues()(d - 1) <= 1e-18)
        throw std::invalid_argument(
            "embed2d: degenerate covariance, all prototypes are identical");

    Eigen::VectorXd c1 = fix_sign(solver.eigenvectors().col(d - 1));
    Eigen::VectorXd c2 = d >= 2 ? fix_sign(solver.eigenvectors().col(d - 2))
                                : Eigen::VectorXd::Zero(d);
    std::vector<EmbeddingPoint> points(prototypes.entries.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        Eigen::Index r = static_cast<Eigen::Index>(i);
        points[i].x = centered.row(r).dot(c1);
        points[i].y = d >= 2 ? centered.row(r).dot(c2) : 0.0;
        points[i].class_index = prototypes.entries[i].class_index;
        points[i].origin = prototypes.entries[i].origin;
    }
    return points;
}

// Exact (O(n^2)) seeded t-SNE; desk-scale sets stay small enough that the
// Barnes-Hut approximation buys nothing.
std::vector<EmbeddingPoint> tsne2d(const PrototypeSet& prototypes, std::uint64_t seed,
                                   const TsneConfig& cfg) {
    Eigen::MatrixXd x = entries_matrix(prototypes);
    Eigen::Index n = x.rows();

    Eigen::MatrixXd dist2(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) dist2(i, j) = (x.row(i) - x.row(j)).squaredNorm();

    double perplexity = std::min(cfg.perplexity, static_cast<double>(n - 1) / 3.0);
    perplexity = std::max(perplexity, 1.0);
    double target_entropy = std::log(perplexity);

    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        Eigen::VectorXd row(n);
        for (int it = 0; it < 64; ++it) {
            double sum = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                row(j) = j == i ? 0.0 : std::exp(-dist2(i, j) * beta);
                sum += row(j);
            }
            if (sum <= 0.0) sum = 1e-300;
            double entropy = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                double pj = row(j) / sum;
                if (pj > 1e-12) entropy -= pj * std::log(pj);
            }
            row /= sum;
            double diff = entropy - target_entropy;
            if (std::abs(diff) < 1e-7) break;
            if (diff > 0.0) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
            } else {
                beta_hi = beta;
                beta = (beta + beta_lo) / 2.0;
            }
        }
        p.row(i) = row.transpose();
    }
    Eigen::MatrixXd pj = (p + p.transpose()) / (2.0 * static_cast<double>(n));
    pj = pj.cwiseMax(1e-12);

    Rng rng(mix_seed(seed, "tsne"));
    auto gaussian = [&rng]() {
        double u1 = 1.0 - rng.next_double();
        double u2 = rng.next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };
    Eigen::MatrixXd y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < 2; ++c) y(i, c) = 1e-4 * gaussian();

    Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        double exaggeration = iter < cfg.early_exaggeration_iters ? cfg.early_exaggeration : 1.0;
        double momentum = iter < cfg.early_exaggeration_iters ? 0.5 : 0.8;

        Eigen::MatrixXd num(n, n);
        double num_sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) {
                    num(i, j) = 0.0;
                    continue;
                }
                num(i, j) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
                num_sum += num(i, j);
            }
        }
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                double q = std::max(num(i, j) / num_sum, 1e-12);
                double coeff = 4.0 * (exaggeration * pj(i, j) - q) * num(i, j);
                grad.row(i) += coeff * (y.row(i) - y.row(j));
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index c = 0; c < 2; ++c) {
                bool same_sign = (grad(i, c) > 0.0) == (velocity(i, c) > 0.0);
                gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
                velocity(i, c) =
                    momentum * velocity(i, c) - cfg.learning_rate * gains(i, c) * grad(i, c);
                y(i, c) += velocity(i, c);
            }
        }
        y.rowwise() -= y.colwise().mean();
    }

    std::vector<EmbeddingPoint> points(prototypes.entries.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        Eigen::Index r = static_cast<Eigen::Index>(i);
        points[i].x = y(r, 0);
        points[i].y = y(r, 1);
        points[i].class_index = prototypes.entries[i].class_index;
        points[i].origin = prototypes.entries[i].origin;
    }
    return points;
}

}  // namespace

EmbeddingExport embed2d(const PrototypeSet& prototypes, Reducer reducer, std::uint64_t seed) {
    EmbeddingExport out;
    out.seed = seed;
    if (reducer == Reducer::pca) {
        out.reducer_id = "pca";
        out.points = pca2d(prototypes);
    } else {
        out.reducer_id = "tsne";
        out.points = tsne2d(prototypes, seed, TsneConfig{});
    }
    for (const EmbeddingPoint& p : out.points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw std::runtime_error("embed2d: non-finite coordinates");
    return out;
}

std::map<int, double> consistency_score(const PrototypeSet& prototypes) {
    std::map<int, std::vector<const PrototypeEntry*>> raw, generated;
    for (const PrototypeEntry& e : prototypes.entries)
        (e.origin == Origin::raw ? raw : generated)[e.class_index].push_back(&e);

    std::map<int, double> scores;
    for (const auto& [cls, raws] : raw) {
        auto it = generated.find(cls);
        if (it == generated.end())
            throw std::invalid_argument("consistency_score: class " + std::to_string(cls) +
                                        " has no generated prototypes");
        std::size_t d = raws[0]->prototype.vector.size();
        std::vector<double> centroid(d, 0.0);
        for (const PrototypeEntry* e : raws)
            for (std::size_t j = 0; j < d; ++j) centroid[j] += e->prototype.vector[j];
        for (double& v : centroid) v /= static_cast<double>(raws.size());
        Prototype c;
        c.vector = std::move(centroid);
        Prototype unit = l2_normalize(c);

        double sum = 0.0;
        for (const PrototypeEntry* e : it->second) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += e->prototype.vector[j] * unit.vector[j];
            sum += dot;
        }
        scores[cls] = sum / static_cast<double>(it->second.size());
    }
    for (const auto& [cls, _] : generated)
        if (!raw.count(cls))
            throw std::invalid_argument("consistency_score: class " + std::to_string(cls) +
                                        " has no raw prototypes");
    return scores;
}

std::string embedding_to_csv(const EmbeddingExport& embedding) {
    std::ostringstream out;
    out << "x,y,class,origin\n";
    char buf[128];
    for (const EmbeddingPoint& p : embedding.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%s\n", p.x, p.y, p.class_index,
                      to_string(p.origin));
        out << buf;
    }
    return out.str();
}

std::string embedding_to_svg(const EmbeddingExport& embedding) {
    const int size = 640;
    const double margin = 48.0;
    double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
    if (!embedding.points.empty()) {
        min_x = max_x = embedding.points[0].x;
        min_y = max_y = embedding.points[0].y;
        for (const EmbeddingPoint& p : embedding.points) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
    }
    double span_x = std::max(max_x - min_x, 1e-12);
    double span_y = std::max(max_y - min_y, 1e-12);
    auto sx = [&](double x) { return margin + (x - min_x) / span_x * (size - 2 * margin); };
    auto sy = [&](double y) { return size - margin - (y - min_y) / span_y * (size - 2 * margin); };

    static const char* kColors[] = {"#4363d8", "#e6194b", "#3cb44b", "#f58231", "#911eb4",
                                    "#46f0f0", "#f032e6", "#808000", "#9a6324", "#000075"};
    const int n_colors = static_cast<int>(sizeof(kColors) / sizeof(kColors[0]));

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
        << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
    out << "<rect width=\"" << size << "\" height=\"" << size
        << "\" fill=\"white\" stroke=\"#cccccc\"/>\n";
    out << "<text x=\"12\" y=\"24\" font-family=\"monospace\" font-size=\"13\">reducer="
        << embedding.reducer_id << " seed=" << embedding.seed
        << " (filled=raw, hollow=generated)</text>\n";
    char buf[256];
    for (const EmbeddingPoint& p : embedding.points) {
        const char* color = kColors[((p.class_index % n_colors) + n_colors) % n_colors];
        if (p.origin == Origin::raw)
            std::snprintf(buf, sizeof(buf),
                          "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\"/>\n", sx(p.x),
                          sy(p.y), color);
        else
            std::snprintf(buf, sizeof(buf),
                          "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"none\" stroke=\"%s\" "
                          "stroke-width=\"1.5\"/>\n",
                          sx(p.x), sy(p.y), color);
        out << buf;
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace diffss
