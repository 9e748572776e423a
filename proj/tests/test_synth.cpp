#include <doctest.h>

#include <cmath>
#include <numeric>

#include "edgeprobe/analysis.hpp"
#include "edgeprobe/error.hpp"
#include "edgeprobe/synth.hpp"
#include "helpers.hpp"

using namespace edgeprobe;

namespace {

double norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += double(x) * x;
    return std::sqrt(s);
}

PlantSpec clean(std::uint32_t layer) {
    PlantSpec s;
    s.n_sentences = 20;
    s.dim = 8;
    s.noise_sigma = 0.0;
    s.plant_src_layer = layer;
    s.seed = layer;
    return s;
}

}  // namespace

TEST_CASE("noise-free plants live in exactly one layer") {
    for (std::uint32_t k = 0; k < 13; ++k) {
        const auto data = generate_planted(clean(k));
        CHECK(data.dataset.examples.size() == 80);
        for (const auto& ex : data.dataset.examples) {
            const auto& emb = data.embeddings[std::stoul(ex.sentence_id.substr(6)) - 1];
            REQUIRE(emb.sentence_id == ex.sentence_id);
            const auto wp = emb.word_to_first_wp[ex.src];
            for (std::uint32_t l = 0; l < 13; ++l) {
                if (l == k) {
                    CHECK(norm(emb.vector(l, wp)) == doctest::Approx(1.0).epsilon(1e-6));
                } else {
                    CHECK(norm(emb.vector(l, wp)) == 0.0);
                }
            }
        }
    }
}

TEST_CASE("noise-free classes are separable by their directions") {
    const auto data = generate_planted(clean(4));
    // same class -> same vector, different class -> orthogonal
    std::map<std::string, std::vector<float>> seen;
    for (const auto& ex : data.dataset.examples) {
        const auto& emb = data.embeddings[std::stoul(ex.sentence_id.substr(6)) - 1];
        const auto v = emb.vector(4, emb.word_to_first_wp[ex.src]);
        const std::vector<float> vec(v.begin(), v.end());
        auto [it, fresh] = seen.emplace(ex.class_label(), vec);
        if (!fresh) CHECK(it->second == vec);
    }
    CHECK(seen.size() == 4);
    for (const auto& [a, va] : seen) {
        for (const auto& [b, vb] : seen) {
            if (a == b) continue;
            double dot = 0.0;
            for (std::size_t d = 0; d < va.size(); ++d) dot += double(va[d]) * vb[d];
            CHECK(std::abs(dot) < 1e-6);
        }
    }
}

TEST_CASE("binary plants write src and tgt into their own layers") {
    auto spec = clean(3);
    spec.arity = Arity::binary;
    spec.plant_tgt_layer = 9;
    const auto data = generate_planted(spec);
    for (const auto& ex : data.dataset.examples) {
        REQUIRE(ex.tgt);
        const auto& emb = data.embeddings[std::stoul(ex.sentence_id.substr(6)) - 1];
        const auto s = emb.word_to_first_wp[ex.src];
        const auto t = emb.word_to_first_wp[*ex.tgt];
        CHECK(norm(emb.vector(3, s)) > 0.99);
        CHECK(norm(emb.vector(9, s)) == 0.0);
        CHECK(norm(emb.vector(9, t)) > 0.99);
        CHECK(norm(emb.vector(3, t)) == 0.0);
    }
}

TEST_CASE("regression amplitude tracks the target") {
    auto spec = clean(2);
    spec.kind = TaskKind::regression;
    const auto data = generate_planted(spec);
    for (const auto& ex : data.dataset.examples) {
        const auto& emb = data.embeddings[std::stoul(ex.sentence_id.substr(6)) - 1];
        CHECK(ex.value() >= 1.0);
        CHECK(ex.value() <= 5.0);
        CHECK(norm(emb.vector(2, emb.word_to_first_wp[ex.src])) == doctest::Approx(std::abs(ex.value() - 3.0)).epsilon(1e-5));
    }
}

TEST_CASE("generation is seeded and split by sentence") {
    PlantSpec spec;
    spec.n_sentences = 30;
    spec.dim = 4;
    const auto a = generate_planted(spec);
    const auto b = generate_planted(spec);
    CHECK(a.embeddings == b.embeddings);
    CHECK(a.dataset.examples == b.dataset.examples);
    const auto counts = a.dataset.counts();
    CHECK(counts.train == 24 * 4);
    CHECK(counts.dev == 3 * 4);
    CHECK(counts.test == 3 * 4);
    spec.seed = 1;
    CHECK(generate_planted(spec).embeddings != a.embeddings);
}

TEST_CASE("invalid plant specs") {
    PlantSpec s;
    s.plant_src_layer = 13;
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("plant_src_layer 13"), ValidationError);
    s = PlantSpec{};
    s.plant_tgt_layer = 2;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = PlantSpec{};
    s.noise_sigma = -1;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = PlantSpec{};
    s.words_per_sentence = 3;
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = PlantSpec{};
    s.n_classes = 1;
    CHECK_THROWS_AS(generate_planted(s), ValidationError);
}

TEST_CASE("an untrained probe fails localization") {
    PlantSpec spec;
    spec.plant_src_layer = 2;
    TrainedProbe untrained;
    untrained.spec = {"synth", TaskKind::classification, Arity::unary, LabelVocab({"c0", "c1", "c2", "c3"}, false), Metric::accuracy};
    untrained.params = ProbeParams::initial(13, 32, 4, false);
    untrained.history = {{1, 1.386, 0.25, 1.386}};
    untrained.best_epoch = 1;
    const auto v = verify_localization(untrained, spec, {});
    CHECK_FALSE(v.passed());
    REQUIRE(v.checks.size() == 3);
    CHECK(v.checks[0].name == "unary_argmax");
    CHECK_FALSE(v.checks[0].passed);  // uniform ties resolve to layer 0
    CHECK_FALSE(v.checks[1].passed);  // cog 6
    CHECK_FALSE(v.checks[2].passed);

    untrained.params.mix_src.logits[2] = 30.0;
    untrained.history[0].dev_metric = 1.0;
    CHECK(verify_localization(untrained, spec, {}).passed());

    spec.dim = 16;
    CHECK_THROWS_AS(verify_localization(untrained, spec, {}), ValidationError);
    CHECK_FALSE(Verdict{}.passed());
}
