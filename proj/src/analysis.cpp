#include "edgeprobe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "edgeprobe/error.hpp"

namespace edgeprobe {

std::string_view to_string(PositionRole role) {
    switch (role) {
    case PositionRole::src: return "src";
    case PositionRole::tgt: return "tgt";
    case PositionRole::unary: return "unary";
    }
    return "?";
}

PositionRole parse_position_role(std::string_view text) {
    if (text == "src") return PositionRole::src;
    if (text == "tgt") return PositionRole::tgt;
    if (text == "unary") return PositionRole::unary;
    throw ValidationError("unknown position role '" + std::string(text) + "'");
}

std::vector<PositionRole> roles_for(Arity arity) {
    if (arity == Arity::binary) return {PositionRole::src, PositionRole::tgt};
    return {PositionRole::unary};
}

double center_of_gravity(std::span<const double> p) {
    double cog = 0.0;
    for (std::size_t l = 0; l < p.size(); ++l) cog += static_cast<double>(l) * p[l];
    return cog;
}

MixDistribution MixDistribution::from_weights(std::string task, PositionRole role, std::vector<double> p) {
    if (p.empty()) throw ShapeError("mix distribution over zero layers");
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("mix distribution with a negative or non-finite weight");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) throw ValidationError("mix distribution does not sum to 1");
    MixDistribution d;
    d.task = std::move(task);
    d.role = role;
    d.cog = center_of_gravity(p);
    d.p = std::move(p);
    return d;
}

std::string MixDistribution::label() const { return task + " " + std::string(to_string(role)); }

MixDistribution mix_distribution(const TrainedProbe& probe, PositionRole role) {
    const bool binary = probe.params.binary();
    if (binary && role == PositionRole::unary) {
        throw ValidationError("probe '" + probe.spec.name + "' is binary; ask for src or tgt");
    }
    if (!binary && role != PositionRole::unary) {
        throw ValidationError("probe '" + probe.spec.name + "' has a single mix; " + std::string(to_string(role)) +
                              " is not available");
    }
    const ScalarMix& mix = role == PositionRole::tgt ? *probe.params.mix_tgt : probe.params.mix_src;
    return MixDistribution::from_weights(probe.spec.name, role, mix.weights());
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw ShapeError("KL divergence over " + std::to_string(p.size()) + " vs " + std::to_string(q.size()) + " layers");
    }
    double kl = 0.0;
    for (std::size_t l = 0; l < p.size(); ++l) {
        if (p[l] == 0.0) continue;
        if (q[l] == 0.0) return std::numeric_limits<double>::infinity();
        kl += p[l] * std::log(p[l] / q[l]);
    }
    // Rounding can leave a tiny negative residue for near-identical inputs.
    return std::max(kl, 0.0);
}

AnchorMatrix anchor_matrix(std::span<const MixDistribution> targets, std::span<const MixDistribution> anchors) {
    AnchorMatrix m;
    std::size_t n_layers = 0;
    auto check = [&](const MixDistribution& d) {
        if (n_layers == 0) n_layers = d.n_layers();
        if (d.n_layers() != n_layers) {
            throw ShapeError("'" + d.label() + "' has " + std::to_string(d.n_layers()) + " layers, expected " +
                             std::to_string(n_layers));
        }
    };
    for (const auto& t : targets) {
        check(t);
        m.targets.push_back(t.label());
    }
    for (const auto& a : anchors) {
        check(a);
        m.anchors.push_back(a.label());
    }
    m.kl.reserve(targets.size() * anchors.size());
    for (const auto& t : targets) {
        for (const auto& a : anchors) m.kl.push_back(kl_divergence(t.p, a.p));
    }
    return m;
}

bool SimilarityMatrices::has_zero_norm() const {
    return std::any_of(zero_norm.begin(), zero_norm.end(),
                       [](const auto& layer) { return std::find(layer.begin(), layer.end(), true) != layer.end(); });
}

SimilarityMatrices intra_sentence_similarity(const LayeredSentenceEmbedding& emb) {
    if (emb.n_wordpieces < 1) throw ShapeError("sentence '" + emb.sentence_id + "' has no wordpieces");
    SimilarityMatrices out;
    out.sentence_id = emb.sentence_id;
    out.n_layers = emb.n_layers;
    out.n_words = emb.n_words();
    const std::size_t n = out.n_words;

    for (std::uint32_t l = 0; l < emb.n_layers; ++l) {
        std::vector<double> norms(n);
        std::vector<bool> zero(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = emb.vector(l, emb.word_to_first_wp[i]);
            double sq = 0.0;
            for (float x : v) sq += double(x) * double(x);
            norms[i] = std::sqrt(sq);
            zero[i] = norms[i] == 0.0;
        }
        std::vector<double> sim(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            sim[i * n + i] = 1.0;
            const auto vi = emb.vector(l, emb.word_to_first_wp[i]);
            for (std::size_t j = i + 1; j < n; ++j) {
                double c = 0.0;
                if (!zero[i] && !zero[j]) {
                    const auto vj = emb.vector(l, emb.word_to_first_wp[j]);
                    double dot = 0.0;
                    for (std::size_t d = 0; d < vi.size(); ++d) dot += double(vi[d]) * double(vj[d]);
                    c = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
                }
                sim[i * n + j] = c;
                sim[j * n + i] = c;
            }
        }
        out.layers.push_back(std::move(sim));
        out.zero_norm.push_back(std::move(zero));
    }
    return out;
}

}  // namespace edgeprobe
