#include <doctest.h>

#include <cmath>
#include <numeric>

#include "edgeprobe/analysis.hpp"
#include "edgeprobe/error.hpp"
#include "oracles.hpp"

using namespace edgeprobe;

namespace {

TrainedProbe probe_with(std::vector<double> src, std::optional<std::vector<double>> tgt = {}) {
    TrainedProbe p;
    p.spec = {"t", TaskKind::classification, tgt ? Arity::binary : Arity::unary, LabelVocab({"x", "y"}, false), Metric::accuracy};
    p.params = ProbeParams::initial(src.size(), 2, 2, tgt.has_value());
    p.params.mix_src.logits = std::move(src);
    if (tgt) p.params.mix_tgt->logits = std::move(*tgt);
    return p;
}

}  // namespace

TEST_CASE("center of gravity") {
    const auto uniform = mix_distribution(probe_with(std::vector<double>(13, 0.0)), PositionRole::unary);
    CHECK(uniform.cog == 6.0);
    CHECK(uniform.label() == "t unary");

    std::vector<double> ends(13, 0.0);
    ends.front() = ends.back() = 0.5;
    CHECK(center_of_gravity(ends) == 6.0);

    std::vector<double> logits(13, 0.0);
    logits[3] = 40.0;
    CHECK(mix_distribution(probe_with(logits), PositionRole::unary).cog == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("cog is permutation-equivariant on the support") {
    std::mt19937_64 rng(1);
    for (int round = 0; round < 20; ++round) {
        std::vector<double> p(13, 0.0);
        const std::size_t a = rng() % 13;
        const std::size_t b = rng() % 13;
        p[a] += 0.3;
        p[b] += 0.7;
        std::vector<double> reflected(13);
        for (std::size_t l = 0; l < 13; ++l) reflected[12 - l] = p[l];
        CHECK(center_of_gravity(reflected) == doctest::Approx(12.0 - center_of_gravity(p)));
        CHECK(center_of_gravity(p) == doctest::Approx(0.3 * a + 0.7 * b));
    }
}

TEST_CASE("mix distributions per role") {
    const auto bin = probe_with({0.0, 1.0, 2.0}, std::vector<double>{2.0, 1.0, 0.0});
    const auto s = mix_distribution(bin, PositionRole::src);
    const auto t = mix_distribution(bin, PositionRole::tgt);
    CHECK(s.p == softmax(std::vector<double>{0.0, 1.0, 2.0}));
    CHECK(t.cog == doctest::Approx(2.0 - s.cog));
    CHECK_THROWS_AS(mix_distribution(bin, PositionRole::unary), ValidationError);
    CHECK_THROWS_AS(mix_distribution(probe_with({0.0, 0.0}), PositionRole::tgt), ValidationError);
    CHECK_THROWS_AS(MixDistribution::from_weights("x", PositionRole::unary, {0.5, 0.6}), ValidationError);
    CHECK_THROWS_AS(MixDistribution::from_weights("x", PositionRole::unary, {1.5, -0.5}), ValidationError);
}

TEST_CASE("KL divergence values") {
    const std::vector<double> half{0.5, 0.5};
    CHECK(kl_divergence(half, half) == 0.0);
    CHECK(kl_divergence(std::vector<double>{1.0, 0.0}, half) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(std::abs(kl_divergence(std::vector<double>{1.0, 0.0}, half) - std::log(2.0)) <= 1e-9);
    const double d = kl_divergence(half, std::vector<double>{0.25, 0.75});
    CHECK(std::abs(d - 0.143841) <= 1e-6);
    CHECK(d == doctest::Approx(oracle::kl({0.5, 0.5}, {0.25, 0.75})).epsilon(1e-14));
    // asymmetric
    CHECK(kl_divergence(std::vector<double>{0.25, 0.75}, half) != doctest::Approx(d));
    CHECK_THROWS_AS(kl_divergence(half, std::vector<double>{1.0}), ShapeError);
    CHECK(std::isinf(kl_divergence(half, std::vector<double>{1.0, 0.0})));
}

TEST_CASE("KL is non-negative and zero only on identical inputs") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 2.0);
    for (int round = 0; round < 100; ++round) {
        std::vector<double> a(13), b(13);
        for (auto& x : a) x = n(rng);
        for (auto& x : b) x = n(rng);
        const auto p = softmax(a);
        const auto q = softmax(b);
        CHECK(kl_divergence(p, q) > 0.0);
        CHECK(kl_divergence(p, p) == 0.0);
        CHECK(kl_divergence(p, q) == doctest::Approx(oracle::kl(p, q)).epsilon(1e-10));
    }
}

TEST_CASE("anchor matrix") {
    std::vector<MixDistribution> ds;
    const std::vector<std::vector<double>> logits{{0, 0, 0}, {1, 0, 0}, {0, 0, 3}};
    for (std::size_t i = 0; i < logits.size(); ++i) {
        ds.push_back(MixDistribution::from_weights("t" + std::to_string(i), PositionRole::unary, softmax(logits[i])));
    }
    const auto self = anchor_matrix(ds, ds);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(self.at(i, i) == 0.0);
        for (std::size_t j = 0; j < 3; ++j) CHECK(self.at(i, j) == doctest::Approx(oracle::kl(ds[i].p, ds[j].p)));
    }
    CHECK(self.targets == std::vector<std::string>{"t0 unary", "t1 unary", "t2 unary"});

    const auto row = anchor_matrix(std::span(ds).first(1), std::span(ds).first(2));
    CHECK(row.at(0, 0) == 0.0);
    CHECK(row.at(0, 1) > 0.0);

    std::vector<MixDistribution> six, four;
    for (int i = 0; i < 6; ++i) six.push_back(ds[i % 3]);
    for (int i = 0; i < 4; ++i) four.push_back(ds[i % 3]);
    const auto m = anchor_matrix(six, four);
    CHECK(m.kl.size() == 24);

    const std::vector<MixDistribution> other{MixDistribution::from_weights("x", PositionRole::unary, {0.5, 0.5})};
    CHECK_THROWS_AS(anchor_matrix(ds, other), ShapeError);
}

TEST_CASE("intra-sentence similarity") {
    LayeredSentenceEmbedding e;
    e.sentence_id = "s";
    e.n_layers = 2;
    e.dim = 3;
    e.n_wordpieces = 4;
    e.word_to_first_wp = {1, 2, 3};
    e.data.assign(2 * 4 * 3, 0.0f);
    // layer 0: orthogonal axes; layer 1: identical vectors
    for (std::uint32_t w = 0; w < 3; ++w) {
        e.vector(0, w + 1)[w] = 2.0f;
        auto v = e.vector(1, w + 1);
        v[0] = 1.0f;
        v[1] = 2.0f;
        v[2] = -1.0f;
    }
    const auto s = intra_sentence_similarity(e);
    CHECK(s.n_layers == 2);
    CHECK(s.n_words == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(s.at(0, i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
            CHECK(s.at(1, i, j) == doctest::Approx(1.0));
        }
    }
    CHECK_FALSE(s.has_zero_norm());

    e.vector(1, 2)[0] = e.vector(1, 2)[1] = e.vector(1, 2)[2] = 0.0f;
    const auto z = intra_sentence_similarity(e);
    CHECK(z.has_zero_norm());
    CHECK(z.zero_norm[1][1]);
    CHECK(z.at(1, 1, 0) == 0.0);
    CHECK(z.at(1, 1, 1) == 1.0);
}

TEST_CASE("similarity matrices are symmetric with unit diagonal") {
    std::mt19937_64 rng(12);
    std::normal_distribution<float> n(0.0f, 1.0f);
    for (int round = 0; round < 10; ++round) {
        LayeredSentenceEmbedding e;
        e.sentence_id = "r";
        e.n_layers = 4;
        e.dim = 5;
        const std::uint32_t words = 1 + rng() % 8;
        e.n_wordpieces = words + 1;
        for (std::uint32_t w = 0; w < words; ++w) e.word_to_first_wp.push_back(w + 1);
        e.data.resize(std::size_t(4) * e.n_wordpieces * 5);
        for (auto& x : e.data) x = n(rng);
        const auto s = intra_sentence_similarity(e);
        for (std::size_t l = 0; l < 4; ++l) {
            for (std::size_t i = 0; i < words; ++i) {
                CHECK(std::abs(s.at(l, i, i) - 1.0) <= 1e-6);
                for (std::size_t j = 0; j < words; ++j) CHECK(s.at(l, i, j) == s.at(l, j, i));
            }
        }
    }
}
