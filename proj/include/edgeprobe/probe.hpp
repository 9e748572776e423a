#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "edgeprobe/task.hpp"

namespace edgeprobe {

// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> logits);

// Learned convex combination over encoder layers: gamma * sum_l softmax(a)_l * e^l.
struct ScalarMix {
    std::vector<double> logits;
    double gamma = 1.0;

    static ScalarMix uniform(std::size_t n_layers) { return ScalarMix{std::vector<double>(n_layers, 0.0), 1.0}; }

    std::size_t n_layers() const noexcept { return logits.size(); }
    std::vector<double> weights() const { return softmax(logits); }
    bool operator==(const ScalarMix&) const = default;
};

// One position's representation across all layers: n_layers x dim, layer-major.
struct LayerStack {
    std::span<const float> values;
    std::size_t n_layers = 0;
    std::size_t dim = 0;

    std::span<const float> layer(std::size_t l) const { return values.subspan(l * dim, dim); }
};

std::vector<double> mix_forward(const ScalarMix& mix, const LayerStack& layered);

// Flat probe: one scalar mix per position role feeding a single linear map.
// Binary tasks concatenate [mixed src ; mixed tgt] as the head input.
struct ProbeParams {
    ScalarMix mix_src;
    std::optional<ScalarMix> mix_tgt;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::vector<double> weight;  // output_dim x input_dim, row-major
    std::vector<double> bias;    // output_dim

    // a = 0, gamma = 1, W = 0, b = 0.
    static ProbeParams initial(std::size_t n_layers, std::size_t dim, std::size_t output_dim, bool binary);

    std::size_t n_layers() const noexcept { return mix_src.n_layers(); }
    std::size_t dim() const noexcept { return mix_tgt ? input_dim / 2 : input_dim; }
    bool binary() const noexcept { return mix_tgt.has_value(); }

    // Flat order: a_src, gamma_src, [a_tgt, gamma_tgt], W, b.
    std::size_t parameter_count() const;
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);
    ProbeParams zeros_like() const;

    void validate() const;
    bool operator==(const ProbeParams&) const = default;
};

struct ProbeInput {
    LayerStack src;
    std::optional<LayerStack> tgt;
};

// Class index for classification, target value for regression.
using Target = std::variant<std::size_t, double>;

struct ProbeExample {
    ProbeInput input;
    Target target;
};

// Logits (classification) or a single prediction (regression): W x + b.
std::vector<double> probe_forward(const ProbeParams& params, const ProbeInput& input);

// Softmax cross-entropy in nats, or squared error.
double loss(TaskKind kind, std::span<const double> prediction, const Target& target);

// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);

struct BackwardResult {
    ProbeParams gradients;  // same shape as the parameters
    double mean_loss = 0.0;
};

// Mean per-example gradients over a nonempty minibatch, by the chain rule
// through the head and both scalar mixes.
BackwardResult backward(const ProbeParams& params, TaskKind kind, std::span<const ProbeExample> batch);

}  // namespace edgeprobe
