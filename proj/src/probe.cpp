#include "edgeprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "edgeprobe/error.hpp"

namespace edgeprobe {

namespace {

void check_stack(const ScalarMix& mix, const LayerStack& layered, const char* role) {
    if (layered.n_layers != mix.n_layers()) {
        throw ShapeError(std::string(role) + " input has " + std::to_string(layered.n_layers) + " layers, mix has " +
                         std::to_string(mix.n_layers()));
    }
    if (layered.values.size() != layered.n_layers * layered.dim) {
        throw ShapeError(std::string(role) + " input payload does not match its n_layers x dim shape");
    }
}

// sum_l p_l e^l, without gamma.
std::vector<double> weighted_sum(std::span<const double> p, const LayerStack& layered) {
    std::vector<double> out(layered.dim, 0.0);
    for (std::size_t l = 0; l < layered.n_layers; ++l) {
        const auto e = layered.layer(l);
        for (std::size_t d = 0; d < layered.dim; ++d) out[d] += p[l] * e[d];
    }
    return out;
}

void check_arity(const ProbeParams& params, const ProbeInput& input) {
    if (params.binary() != input.tgt.has_value()) {
        throw ShapeError(params.binary() ? "binary probe requires a tgt input" : "unary probe given a tgt input");
    }
}

struct MixedSegment {
    std::vector<double> p;    // softmax(a)
    std::vector<double> sum;  // sum_l p_l e^l
};

MixedSegment mix_segment(const ScalarMix& mix, const LayerStack& layered, const char* role) {
    check_stack(mix, layered, role);
    MixedSegment seg;
    seg.p = mix.weights();
    seg.sum = weighted_sum(seg.p, layered);
    return seg;
}

std::vector<double> head(const ProbeParams& params, std::span<const double> x) {
    std::vector<double> z(params.bias);
    for (std::size_t o = 0; o < params.output_dim; ++o) {
        const double* w = params.weight.data() + o * params.input_dim;
        double acc = 0.0;
        for (std::size_t i = 0; i < params.input_dim; ++i) acc += w[i] * x[i];
        z[o] += acc;
    }
    return z;
}

// Accumulates gradients of one scalar mix given dL/d(mixed vector).
void accumulate_mix_gradient(const ScalarMix& mix, const MixedSegment& seg, const LayerStack& layered,
                             std::span<const double> d_mixed, ScalarMix& grad) {
    double d_gamma = 0.0;
    for (std::size_t d = 0; d < layered.dim; ++d) d_gamma += d_mixed[d] * seg.sum[d];
    grad.gamma += d_gamma;

    // dL/dp_l = gamma * <d_mixed, e^l>; dL/da_k = p_k (g_k - sum_l p_l g_l)
    std::vector<double> g(layered.n_layers, 0.0);
    double expected = 0.0;
    for (std::size_t l = 0; l < layered.n_layers; ++l) {
        const auto e = layered.layer(l);
        double acc = 0.0;
        for (std::size_t d = 0; d < layered.dim; ++d) acc += d_mixed[d] * e[d];
        g[l] = mix.gamma * acc;
        expected += seg.p[l] * g[l];
    }
    for (std::size_t l = 0; l < layered.n_layers; ++l) grad.logits[l] += seg.p[l] * (g[l] - expected);
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) return {};
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        total += out[i];
    }
    for (auto& v : out) v /= total;
    return out;
}

std::vector<double> mix_forward(const ScalarMix& mix, const LayerStack& layered) {
    check_stack(mix, layered, "mix");
    auto out = weighted_sum(mix.weights(), layered);
    for (auto& v : out) v *= mix.gamma;
    return out;
}

//
// ProbeParams
//

ProbeParams ProbeParams::initial(std::size_t n_layers, std::size_t dim, std::size_t output_dim, bool binary) {
    ProbeParams p;
    p.mix_src = ScalarMix::uniform(n_layers);
    if (binary) p.mix_tgt = ScalarMix::uniform(n_layers);
    p.input_dim = binary ? 2 * dim : dim;
    p.output_dim = output_dim;
    p.weight.assign(p.output_dim * p.input_dim, 0.0);
    p.bias.assign(p.output_dim, 0.0);
    return p;
}

std::size_t ProbeParams::parameter_count() const {
    std::size_t n = mix_src.n_layers() + 1;
    if (mix_tgt) n += mix_tgt->n_layers() + 1;
    return n + weight.size() + bias.size();
}

std::vector<double> ProbeParams::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    out.insert(out.end(), mix_src.logits.begin(), mix_src.logits.end());
    out.push_back(mix_src.gamma);
    if (mix_tgt) {
        out.insert(out.end(), mix_tgt->logits.begin(), mix_tgt->logits.end());
        out.push_back(mix_tgt->gamma);
    }
    out.insert(out.end(), weight.begin(), weight.end());
    out.insert(out.end(), bias.begin(), bias.end());
    return out;
}

void ProbeParams::assign(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw ShapeError("parameter vector has " + std::to_string(flat.size()) + " values, probe needs " +
                         std::to_string(parameter_count()));
    }
    auto it = flat.begin();
    auto take = [&](std::vector<double>& dst) {
        std::copy_n(it, dst.size(), dst.begin());
        it += static_cast<std::ptrdiff_t>(dst.size());
    };
    take(mix_src.logits);
    mix_src.gamma = *it++;
    if (mix_tgt) {
        take(mix_tgt->logits);
        mix_tgt->gamma = *it++;
    }
    take(weight);
    take(bias);
}

ProbeParams ProbeParams::zeros_like() const {
    ProbeParams z = *this;
    std::fill(z.mix_src.logits.begin(), z.mix_src.logits.end(), 0.0);
    z.mix_src.gamma = 0.0;
    if (z.mix_tgt) {
        std::fill(z.mix_tgt->logits.begin(), z.mix_tgt->logits.end(), 0.0);
        z.mix_tgt->gamma = 0.0;
    }
    std::fill(z.weight.begin(), z.weight.end(), 0.0);
    std::fill(z.bias.begin(), z.bias.end(), 0.0);
    return z;
}

void ProbeParams::validate() const {
    if (mix_src.n_layers() == 0) throw ShapeError("probe mix has no layers");
    if (mix_tgt && mix_tgt->n_layers() != mix_src.n_layers()) throw ShapeError("src and tgt mixes differ in layer count");
    if (mix_tgt && input_dim % 2 != 0) throw ShapeError("binary probe input dim must be even");
    if (weight.size() != output_dim * input_dim) throw ShapeError("weight matrix does not match output_dim x input_dim");
    if (bias.size() != output_dim) throw ShapeError("bias does not match output_dim");
    const auto flat = flatten();
    if (!std::all_of(flat.begin(), flat.end(), [](double v) { return std::isfinite(v); })) {
        throw ShapeError("probe parameters contain non-finite values");
    }
}

//
// forward / loss / backward
//

std::vector<double> probe_forward(const ProbeParams& params, const ProbeInput& input) {
    check_arity(params, input);
    std::vector<double> x = mix_forward(params.mix_src, input.src);
    if (params.mix_tgt) {
        const auto t = mix_forward(*params.mix_tgt, *input.tgt);
        x.insert(x.end(), t.begin(), t.end());
    }
    if (x.size() != params.input_dim) {
        throw ShapeError("head expects " + std::to_string(params.input_dim) + " inputs, got " + std::to_string(x.size()));
    }
    return head(params, x);
}

double loss(TaskKind kind, std::span<const double> prediction, const Target& target) {
    if (kind == TaskKind::classification) {
        const auto* cls = std::get_if<std::size_t>(&target);
        if (!cls) throw ShapeError("classification loss needs a class index");
        if (*cls >= prediction.size()) {
            throw ShapeError("label index " + std::to_string(*cls) + " outside " + std::to_string(prediction.size()) +
                             " classes");
        }
        const double m = *std::max_element(prediction.begin(), prediction.end());
        double total = 0.0;
        for (double z : prediction) total += std::exp(z - m);
        return m + std::log(total) - prediction[*cls];
    }
    const auto* y = std::get_if<double>(&target);
    if (!y) throw ShapeError("regression loss needs a real-valued target");
    if (prediction.size() != 1) throw ShapeError("regression prediction must be a scalar");
    const double r = prediction[0] - *y;
    return r * r;
}

std::size_t argmax(std::span<const double> values) {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

BackwardResult backward(const ProbeParams& params, TaskKind kind, std::span<const ProbeExample> batch) {
    if (batch.empty()) throw ShapeError("backward on an empty minibatch");
    if (kind == TaskKind::regression && params.output_dim != 1) throw ShapeError("regression probe must have one output");

    BackwardResult result{params.zeros_like(), 0.0};
    ProbeParams& grad = result.gradients;
    const std::size_t dim = params.dim();

    for (const auto& ex : batch) {
        check_arity(params, ex.input);
        const auto src = mix_segment(params.mix_src, ex.input.src, "src");
        std::optional<MixedSegment> tgt;
        if (params.mix_tgt) tgt = mix_segment(*params.mix_tgt, *ex.input.tgt, "tgt");
        if (ex.input.src.dim != dim || (tgt && ex.input.tgt->dim != dim)) {
            throw ShapeError("input dim does not match the probe head");
        }

        std::vector<double> x(params.input_dim);
        for (std::size_t d = 0; d < dim; ++d) x[d] = params.mix_src.gamma * src.sum[d];
        if (tgt) {
            for (std::size_t d = 0; d < dim; ++d) x[dim + d] = params.mix_tgt->gamma * tgt->sum[d];
        }
        const auto z = head(params, x);
        result.mean_loss += loss(kind, z, ex.target);

        std::vector<double> dz;
        if (kind == TaskKind::classification) {
            dz = softmax(z);
            dz[std::get<std::size_t>(ex.target)] -= 1.0;
        } else {
            dz = {2.0 * (z[0] - std::get<double>(ex.target))};
        }

        std::vector<double> dx(params.input_dim, 0.0);
        for (std::size_t o = 0; o < params.output_dim; ++o) {
            grad.bias[o] += dz[o];
            const double* w = params.weight.data() + o * params.input_dim;
            double* gw = grad.weight.data() + o * params.input_dim;
            for (std::size_t i = 0; i < params.input_dim; ++i) {
                gw[i] += dz[o] * x[i];
                dx[i] += w[i] * dz[o];
            }
        }

        const std::span<const double> dx_all(dx);
        accumulate_mix_gradient(params.mix_src, src, ex.input.src, dx_all.first(dim), grad.mix_src);
        if (tgt) accumulate_mix_gradient(*params.mix_tgt, *tgt, *ex.input.tgt, dx_all.subspan(dim, dim), *grad.mix_tgt);
    }

    const double scale = 1.0 / static_cast<double>(batch.size());
    auto flat = grad.flatten();
    for (auto& g : flat) g *= scale;
    grad.assign(flat);
    result.mean_loss *= scale;
    return result;
}

}  // namespace edgeprobe
