#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgeprobe/lef.hpp"
#include "edgeprobe/trainer.hpp"

namespace edgeprobe {

enum class PositionRole { src, tgt, unary };

std::string_view to_string(PositionRole role);
PositionRole parse_position_role(std::string_view text);

// Roles a probe of the given arity exposes: {unary} or {src, tgt}.
std::vector<PositionRole> roles_for(Arity arity);

// Expected layer index under p.
double center_of_gravity(std::span<const double> p);

struct MixDistribution {
    std::string task;
    PositionRole role = PositionRole::unary;
    std::vector<double> p;
    double cog = 0.0;

    static MixDistribution from_weights(std::string task, PositionRole role, std::vector<double> p);

    std::size_t n_layers() const noexcept { return p.size(); }
    std::string label() const;  // "<task> <role>"
};

// softmax of the probe's (best-epoch) mixing logits for one position role.
MixDistribution mix_distribution(const TrainedProbe& probe, PositionRole role);

// D(p || q) in nats; terms with p_l = 0 contribute nothing.
double kl_divergence(std::span<const double> p, std::span<const double> q);

struct AnchorMatrix {
    std::vector<std::string> targets;
    std::vector<std::string> anchors;
    std::vector<double> kl;  // targets x anchors, row-major, D(target || anchor)

    double at(std::size_t target, std::size_t anchor) const { return kl[target * anchors.size() + anchor]; }
};

AnchorMatrix anchor_matrix(std::span<const MixDistribution> targets, std::span<const MixDistribution> anchors);

// Per-layer cosine similarity between the words (first wordpieces) of one sentence.
struct SimilarityMatrices {
    std::string sentence_id;
    std::size_t n_layers = 0;
    std::size_t n_words = 0;
    std::vector<std::vector<double>> layers;       // n_words x n_words per layer
    std::vector<std::vector<bool>> zero_norm;      // per layer, per word
    bool has_zero_norm() const;

    double at(std::size_t layer, std::size_t i, std::size_t j) const { return layers[layer][i * n_words + j]; }
};

// Pairs involving a zero vector get similarity 0 and are flagged; the diagonal is always 1.
SimilarityMatrices intra_sentence_similarity(const LayeredSentenceEmbedding& emb);

}  // namespace edgeprobe
