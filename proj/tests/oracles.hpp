#pragma once

// Reference computations written independently of the library code paths
// they check. Shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "edgeprobe/probe.hpp"
#include "edgeprobe/task.hpp"

namespace oracle {

// Naive softmax (no max shift) for small logits.
inline std::vector<double> softmax(const std::vector<double>& a) {
    double z = 0.0;
    for (double x : a) z += std::exp(x);
    std::vector<double> p;
    for (double x : a) p.push_back(std::exp(x) / z);
    return p;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
    }
    return d;
}

// Forward pass written out per component.
inline std::vector<double> forward(const edgeprobe::ProbeParams& P, const edgeprobe::ProbeInput& in) {
    auto mix = [](const edgeprobe::ScalarMix& m, const edgeprobe::LayerStack& s) {
        const auto p = softmax(m.logits);
        std::vector<double> out(s.dim, 0.0);
        for (std::size_t l = 0; l < s.n_layers; ++l) {
            for (std::size_t d = 0; d < s.dim; ++d) out[d] += m.gamma * p[l] * double(s.values[l * s.dim + d]);
        }
        return out;
    };
    auto x = mix(P.mix_src, in.src);
    if (P.mix_tgt) {
        const auto t = mix(*P.mix_tgt, *in.tgt);
        x.insert(x.end(), t.begin(), t.end());
    }
    std::vector<double> z(P.output_dim);
    for (std::size_t o = 0; o < P.output_dim; ++o) {
        z[o] = P.bias[o];
        for (std::size_t i = 0; i < P.input_dim; ++i) z[o] += P.weight[o * P.input_dim + i] * x[i];
    }
    return z;
}

inline double example_loss(edgeprobe::TaskKind kind, const std::vector<double>& z, const edgeprobe::Target& t) {
    if (kind == edgeprobe::TaskKind::regression) {
        const double r = z[0] - std::get<double>(t);
        return r * r;
    }
    double zmax = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - zmax);
    return zmax + std::log(s) - z[std::get<std::size_t>(t)];
}

inline double batch_loss(const edgeprobe::ProbeParams& P, edgeprobe::TaskKind kind,
                         const std::vector<edgeprobe::ProbeExample>& batch) {
    double total = 0.0;
    for (const auto& ex : batch) total += example_loss(kind, forward(P, ex.input), ex.target);
    return total / static_cast<double>(batch.size());
}

// Random probe instance with its own backing storage for the layer stacks.
struct Instance {
    edgeprobe::TaskKind kind;
    bool binary;
    edgeprobe::ProbeParams params;
    std::vector<std::vector<float>> storage;
    std::vector<edgeprobe::ProbeExample> batch;
};

inline Instance random_instance(std::mt19937_64& rng, edgeprobe::TaskKind kind, bool binary, std::size_t n_layers = 13,
                                std::size_t dim = 8, std::size_t batch = 4, std::size_t classes = 5) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::uniform_real_distribution<float> uf(-1.0f, 1.0f);
    Instance inst{kind, binary, {}, {}, {}};
    const std::size_t out = kind == edgeprobe::TaskKind::regression ? 1 : classes;
    auto& P = inst.params = edgeprobe::ProbeParams::initial(n_layers, dim, out, binary);
    for (auto& a : P.mix_src.logits) a = n01(rng);
    P.mix_src.gamma = u(rng);
    if (P.mix_tgt) {
        for (auto& a : P.mix_tgt->logits) a = n01(rng);
        P.mix_tgt->gamma = u(rng);
    }
    for (auto& w : P.weight) w = 0.5 * n01(rng);
    for (auto& b : P.bias) b = 0.5 * n01(rng);

    inst.storage.reserve(2 * batch);
    for (std::size_t i = 0; i < batch; ++i) {
        for (int k = 0; k < (binary ? 2 : 1); ++k) {
            std::vector<float> v(n_layers * dim);
            for (auto& x : v) x = uf(rng);
            inst.storage.push_back(std::move(v));
        }
    }
    std::size_t s = 0;
    for (std::size_t i = 0; i < batch; ++i) {
        edgeprobe::ProbeExample ex;
        ex.input.src = {inst.storage[s++], n_layers, dim};
        if (binary) ex.input.tgt = edgeprobe::LayerStack{inst.storage[s++], n_layers, dim};
        if (kind == edgeprobe::TaskKind::regression) {
            ex.target = 1.0 + 4.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        } else {
            ex.target = static_cast<std::size_t>(rng() % out);
        }
        inst.batch.push_back(ex);
    }
    return inst;
}

struct GradientCheck {
    double max_rel_error = 0.0;
    std::string worst;  // parameter group of the worst component
};

// Central differences on the flat parameter vector against the analytic
// gradients, component-wise relative error |a - f| / max(|a|, |f|).
inline GradientCheck check_gradients(const Instance& inst, double step = 1e-5) {
    const auto analytic = edgeprobe::backward(inst.params, inst.kind, inst.batch).gradients.flatten();
    auto flat = inst.params.flatten();
    const std::size_t L = inst.params.n_layers();
    auto group = [&](std::size_t i) -> std::string {
        if (i < L) return "a_src";
        if (i == L) return "gamma_src";
        std::size_t off = L + 1;
        if (inst.params.binary()) {
            if (i < off + L) return "a_tgt";
            if (i == off + L) return "gamma_tgt";
            off += L + 1;
        }
        return i < off + inst.params.weight.size() ? "W" : "b";
    };
    GradientCheck res;
    edgeprobe::ProbeParams probe = inst.params;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double keep = flat[i];
        flat[i] = keep + step;
        probe.assign(flat);
        const double up = batch_loss(probe, inst.kind, inst.batch);
        flat[i] = keep - step;
        probe.assign(flat);
        const double down = batch_loss(probe, inst.kind, inst.batch);
        flat[i] = keep;
        const double fd = (up - down) / (2.0 * step);
        const double denom = std::max(std::abs(fd), std::abs(analytic[i]));
        const double rel = denom == 0.0 ? 0.0 : std::abs(fd - analytic[i]) / denom;
        if (rel > res.max_rel_error) {
            res.max_rel_error = rel;
            res.worst = group(i);
        }
    }
    return res;
}

}  // namespace oracle
