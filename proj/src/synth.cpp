#include "edgeprobe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "edgeprobe/analysis.hpp"
#include "edgeprobe/error.hpp"
#include "edgeprobe/report.hpp"

namespace edgeprobe {

namespace {

// Portable draws from mt19937_64 (the engine output is fully specified).
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

    double normal() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

// Gram-Schmidt on Gaussian draws; falls back to plain normalization once the
// requested count exceeds the dimension.
std::vector<std::vector<double>> directions(std::size_t count, std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> out;
    while (out.size() < count) {
        std::vector<double> v(dim);
        for (auto& x : v) x = rng.normal();
        if (out.size() < dim) {
            for (const auto& u : out) {
                const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
                for (std::size_t d = 0; d < dim; ++d) v[d] -= dot * u[d];
            }
        }
        const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm < 1e-6) continue;
        for (auto& x : v) x /= norm;
        out.push_back(std::move(v));
    }
    return out;
}

void add_scaled(std::span<float> dst, const std::vector<double>& dir, double scale) {
    for (std::size_t d = 0; d < dst.size(); ++d) dst[d] = static_cast<float>(double(dst[d]) + scale * dir[d]);
}

}  // namespace

void PlantSpec::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("plant spec: " + what); };
    if (n_layers == 0 || dim == 0) fail("n_layers and dim must be positive");
    if (plant_src_layer >= n_layers) fail("plant_src_layer " + std::to_string(plant_src_layer) + " >= n_layers " + std::to_string(n_layers));
    if (plant_tgt_layer && *plant_tgt_layer >= n_layers) {
        fail("plant_tgt_layer " + std::to_string(*plant_tgt_layer) + " >= n_layers " + std::to_string(n_layers));
    }
    if (plant_tgt_layer && arity != Arity::binary) fail("plant_tgt_layer requires a binary task");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) fail("noise_sigma must be finite and >= 0");
    if (n_sentences == 0 || examples_per_sentence == 0) fail("need at least one sentence and one example per sentence");
    const std::uint32_t words_needed = arity == Arity::binary ? 2 * examples_per_sentence : examples_per_sentence;
    if (arity == Arity::sentence && examples_per_sentence != 1) fail("sentence-arity plants use one example per sentence");
    if (arity != Arity::sentence && words_per_sentence < words_needed) {
        fail("words_per_sentence " + std::to_string(words_per_sentence) + " too small for " +
             std::to_string(examples_per_sentence) + " examples");
    }
    if (kind == TaskKind::classification && n_classes < 2) fail("n_classes must be at least 2");
    if (kind == TaskKind::regression && !(value_max > value_min)) fail("value_max must exceed value_min");
    if (dev_fraction <= 0.0 || test_fraction < 0.0 || dev_fraction + test_fraction >= 1.0) {
        fail("split fractions must leave room for train and dev");
    }
    if (task_name.empty()) fail("task_name is empty");
}

PlantedData generate_planted(const PlantSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t n_dirs = spec.kind == TaskKind::classification ? spec.n_classes : 1;
    const auto src_dirs = directions(n_dirs, spec.dim, rng);
    const auto tgt_dirs = directions(n_dirs, spec.dim, rng);
    const double mid = 0.5 * (spec.value_min + spec.value_max);

    PlantedData out;
    Dataset& ds = out.dataset;
    ds.spec.name = spec.task_name;
    ds.spec.kind = spec.kind;
    ds.spec.arity = spec.arity;
    ds.spec.metric = metric_for(spec.kind);
    if (spec.kind == TaskKind::classification) {
        std::vector<std::string> labels;
        for (std::uint32_t c = 0; c < spec.n_classes; ++c) labels.push_back("c" + std::to_string(c));
        ds.spec.labels = LabelVocab(std::move(labels), false);
    }

    const auto n_dev = static_cast<std::uint32_t>(std::lround(spec.dev_fraction * spec.n_sentences));
    const auto n_test = static_cast<std::uint32_t>(std::lround(spec.test_fraction * spec.n_sentences));
    const std::uint32_t n_train = spec.n_sentences - n_dev - n_test;

    for (std::uint32_t s = 0; s < spec.n_sentences; ++s) {
        LayeredSentenceEmbedding emb;
        emb.sentence_id = spec.task_name + "-" + std::to_string(s + 1);
        emb.n_layers = spec.n_layers;
        emb.dim = spec.dim;
        const std::uint32_t n_words = spec.arity == Arity::sentence ? 0 : spec.words_per_sentence;
        std::uint32_t wp = 1;
        for (std::uint32_t i = 0; i < n_words; ++i) {
            emb.word_to_first_wp.push_back(wp);
            wp += 1 + static_cast<std::uint32_t>(rng.below(2));  // one or two wordpieces per word
        }
        emb.n_wordpieces = wp;
        emb.data.resize(std::size_t(emb.n_layers) * emb.n_wordpieces * emb.dim);
        for (auto& x : emb.data) x = static_cast<float>(spec.noise_sigma * rng.normal());

        const Split split = s < n_train ? Split::train : (s < n_train + n_dev ? Split::dev : Split::test);

        std::vector<std::uint32_t> words(n_words);
        std::iota(words.begin(), words.end(), 0u);
        for (std::size_t i = words.size(); i > 1; --i) std::swap(words[i - 1], words[rng.below(i)]);

        for (std::uint32_t e = 0; e < spec.examples_per_sentence; ++e) {
            ExampleRecord ex;
            ex.sentence_id = emb.sentence_id;
            ex.split = split;

            std::size_t cls = 0;
            double amplitude = 1.0;
            if (spec.kind == TaskKind::classification) {
                cls = rng.below(spec.n_classes);
                ex.label = ds.spec.labels.labels()[cls];
            } else {
                const double y = spec.value_min + (spec.value_max - spec.value_min) * rng.uniform();
                ex.label = y;
                amplitude = y - mid;
            }

            if (spec.arity == Arity::sentence) {
                ex.src = 0;
                add_scaled(emb.vector(spec.plant_src_layer, 0), src_dirs[cls], amplitude);
            } else if (spec.arity == Arity::unary) {
                ex.src = words[e];
                add_scaled(emb.vector(spec.plant_src_layer, emb.word_to_first_wp[ex.src]), src_dirs[cls], amplitude);
            } else {
                ex.src = words[2 * e];
                ex.tgt = words[2 * e + 1];
                add_scaled(emb.vector(spec.plant_src_layer, emb.word_to_first_wp[ex.src]), src_dirs[cls], amplitude);
                if (spec.plant_tgt_layer) {
                    add_scaled(emb.vector(*spec.plant_tgt_layer, emb.word_to_first_wp[*ex.tgt]), tgt_dirs[cls], amplitude);
                }
            }
            ds.examples.push_back(std::move(ex));
        }
        out.embeddings.push_back(std::move(emb));
    }
    ds.validate();
    return out;
}

bool Verdict::passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

Verdict verify_localization(const TrainedProbe& probe, const PlantSpec& spec, const LocalizationThresholds& thresholds) {
    if (probe.params.n_layers() != spec.n_layers || probe.params.dim() != spec.dim) {
        throw ValidationError("probe geometry does not match the plant spec");
    }
    if (probe.spec.arity != spec.arity || probe.spec.kind != spec.kind) {
        throw ValidationError("probe task shape does not match the plant spec");
    }

    Verdict v;
    auto check_role = [&](PositionRole role, std::uint32_t planted) {
        const auto d = mix_distribution(probe, role);
        const auto top = argmax(d.p);
        const std::string r(to_string(role));
        v.checks.push_back({r + "_argmax", top == planted,
                            "argmax layer " + std::to_string(top) + ", planted " + std::to_string(planted)});
        const double gap = std::abs(d.cog - static_cast<double>(planted));
        v.checks.push_back({r + "_cog", gap <= thresholds.cog_tolerance,
                            "cog " + format_number(d.cog) + ", |cog - planted| " + format_number(gap) + " vs tolerance " +
                                format_number(thresholds.cog_tolerance)});
    };
    check_role(spec.arity == Arity::binary ? PositionRole::src : PositionRole::unary, spec.plant_src_layer);
    if (spec.plant_tgt_layer) check_role(PositionRole::tgt, *spec.plant_tgt_layer);

    const double dev = probe.best_dev_metric();
    if (spec.kind == TaskKind::classification) {
        v.checks.push_back({"dev_accuracy", dev >= thresholds.min_accuracy,
                            "dev accuracy " + format_number(dev) + " vs minimum " + format_number(thresholds.min_accuracy)});
    } else {
        v.checks.push_back({"dev_mse", dev <= thresholds.max_mse,
                            "dev MSE " + format_number(dev) + " vs maximum " + format_number(thresholds.max_mse)});
    }
    return v;
}

}  // namespace edgeprobe
