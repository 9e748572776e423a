#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>

#include "edgeprobe/error.hpp"
#include "edgeprobe/probe.hpp"
#include "oracles.hpp"

using namespace edgeprobe;

namespace {

const std::vector<float> kTwoLayers = {1.0f, 0.0f, 0.0f, 1.0f};  // e0 = (1,0), e1 = (0,1)

LayerStack two_layers() { return {kTwoLayers, 2, 2}; }

}  // namespace

TEST_CASE("mix_forward worked examples") {
    CHECK(mix_forward(ScalarMix{{0.0, 0.0}, 1.0}, two_layers()) == std::vector<double>{0.5, 0.5});
    CHECK(mix_forward(ScalarMix{{0.0, 0.0}, 2.0}, two_layers()) == std::vector<double>{1.0, 1.0});
    const auto r = mix_forward(ScalarMix{{std::log(3.0), 0.0}, 1.0}, two_layers());
    CHECK(r[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS(mix_forward(ScalarMix{{0.0, 0.0, 0.0}, 1.0}, two_layers()), ShapeError);
}

TEST_CASE("mix_forward is linear in gamma and in each layer") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int round = 0; round < 20; ++round) {
        ScalarMix m{std::vector<double>(5), 1.0 + n(rng)};
        for (auto& a : m.logits) a = n(rng);
        std::vector<float> e(5 * 3), e2(5 * 3), sum(5 * 3);
        for (std::size_t i = 0; i < e.size(); ++i) {
            e[i] = static_cast<float>(n(rng));
            e2[i] = static_cast<float>(n(rng));
            sum[i] = e[i] + e2[i];
        }
        const auto base = mix_forward(m, {e, 5, 3});
        ScalarMix twice = m;
        twice.gamma *= 2.0;
        const auto scaled = mix_forward(twice, {e, 5, 3});
        const auto other = mix_forward(m, {e2, 5, 3});
        const auto both = mix_forward(m, {sum, 5, 3});
        for (std::size_t d = 0; d < 3; ++d) {
            CHECK(scaled[d] == doctest::Approx(2.0 * base[d]).epsilon(1e-12));
            CHECK(both[d] == doctest::Approx(base[d] + other[d]).epsilon(1e-6));
        }
    }
}

TEST_CASE("softmax shift invariance is bitwise for exact shifts") {
    // Dyadic logits in [-3.3, 0.7) keep a + 7.3 exactly representable, so the
    // shifted vector is the exact translate and the max-subtracted softmax
    // sees identical differences.
    std::mt19937_64 rng(9);
    for (int round = 0; round < 50; ++round) {
        std::vector<double> a(13), shifted(13);
        for (std::size_t l = 0; l < a.size(); ++l) {
            a[l] = -3.3 + static_cast<double>(rng() % 4096) / 1024.0;
            shifted[l] = a[l] + 7.3;
            REQUIRE(shifted[l] - 7.3 == a[l]);
        }
        const auto p = softmax(a);
        const auto q = softmax(shifted);
        CHECK(std::memcmp(p.data(), q.data(), p.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("softmax sums to one and is stable for large logits") {
    const auto p = softmax(std::vector<double>{1000.0, 1000.0, -1000.0});
    CHECK(p[0] == 0.5);
    CHECK(p[2] == 0.0);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 5.0);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> a(13);
        for (auto& x : a) x = n(rng);
        double s = 0.0;
        for (double x : softmax(a)) s += x;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("probe_forward matches the component-wise oracle") {
    std::mt19937_64 rng(4);
    for (auto kind : {TaskKind::classification, TaskKind::regression}) {
        for (bool binary : {false, true}) {
            const auto inst = oracle::random_instance(rng, kind, binary);
            for (const auto& ex : inst.batch) {
                const auto z = probe_forward(inst.params, ex.input);
                const auto ref = oracle::forward(inst.params, ex.input);
                REQUIRE(z.size() == ref.size());
                for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == doctest::Approx(ref[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("zero head gives uniform predictions") {
    std::vector<float> e(13 * 4, 0.7f);
    const LayerStack s{e, 13, 4};
    auto P = ProbeParams::initial(13, 4, 4, false);
    const auto z = probe_forward(P, {s, std::nullopt});
    CHECK(loss(TaskKind::classification, z, std::size_t{2}) == doctest::Approx(std::log(4.0)).epsilon(1e-15));

    auto R = ProbeParams::initial(13, 4, 1, false);
    R.bias[0] = 3.0;
    CHECK(probe_forward(R, {s, std::nullopt}) == std::vector<double>{3.0});
}

TEST_CASE("arity and shape contracts") {
    std::vector<float> e(3 * 4, 1.0f);
    const LayerStack s{e, 3, 4};
    const auto B = ProbeParams::initial(3, 4, 2, true);
    CHECK(B.input_dim == 8);
    CHECK(B.weight.size() == 2 * 8);
    CHECK_THROWS_AS(probe_forward(B, {s, std::nullopt}), ShapeError);
    const auto U = ProbeParams::initial(3, 4, 2, false);
    CHECK_FALSE(U.mix_tgt);
    CHECK_THROWS_AS(probe_forward(U, {s, s}), ShapeError);
    std::vector<float> narrow(3 * 3, 1.0f);
    CHECK_THROWS_AS(probe_forward(U, {LayerStack{narrow, 3, 3}, std::nullopt}), ShapeError);
}

TEST_CASE("loss values") {
    CHECK(loss(TaskKind::classification, std::vector<double>{0, 0, 0, 0}, std::size_t{0}) ==
          doctest::Approx(1.3862943611198906).epsilon(1e-15));
    CHECK(loss(TaskKind::regression, std::vector<double>{2.0}, 2.0) == 0.0);
    CHECK(loss(TaskKind::regression, std::vector<double>{1.0}, 3.0) == 4.0);
    CHECK_THROWS_AS(loss(TaskKind::classification, std::vector<double>{0, 0}, std::size_t{2}), ShapeError);
    CHECK(loss(TaskKind::classification, std::vector<double>{800.0, 0.0}, std::size_t{1}) == doctest::Approx(800.0));
}

TEST_CASE("argmax ties go to the lowest index") {
    CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
    CHECK(argmax(std::vector<double>{2.0, 2.0}) == 0);
}

TEST_CASE("analytic gradients agree with central differences") {
    std::mt19937_64 rng(20240601);
    for (auto kind : {TaskKind::classification, TaskKind::regression}) {
        for (bool binary : {false, true}) {
            for (int round = 0; round < 5; ++round) {
                const auto inst = oracle::random_instance(rng, kind, binary);
                const auto check = oracle::check_gradients(inst);
                INFO("kind ", to_string(kind), " binary ", binary, " worst group ", check.worst);
                CHECK(check.max_rel_error <= 1e-4);
            }
        }
    }
}

TEST_CASE("bias gradient at zero weights is the mean of softmax minus one-hot") {
    std::vector<float> e(13 * 2, 0.25f);
    const LayerStack s{e, 13, 2};
    const auto P = ProbeParams::initial(13, 2, 2, false);
    const std::vector<ProbeExample> batch{{{s, std::nullopt}, std::size_t{0}},
                                          {{s, std::nullopt}, std::size_t{1}},
                                          {{s, std::nullopt}, std::size_t{1}},
                                          {{s, std::nullopt}, std::size_t{0}}};
    const auto g = backward(P, TaskKind::classification, batch);
    CHECK(g.gradients.bias[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(g.gradients.bias[1] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(g.mean_loss == doctest::Approx(std::log(2.0)));

    const std::vector<ProbeExample> skewed{{{s, std::nullopt}, std::size_t{0}}, {{s, std::nullopt}, std::size_t{0}},
                                           {{s, std::nullopt}, std::size_t{0}}, {{s, std::nullopt}, std::size_t{1}}};
    const auto h = backward(P, TaskKind::classification, skewed);
    CHECK(h.gradients.bias[0] == doctest::Approx(0.5 - 0.75));
    CHECK(h.gradients.bias[1] == doctest::Approx(0.5 - 0.25));
    // a and gamma see no signal through a zero head
    for (double a : h.gradients.mix_src.logits) CHECK(a == 0.0);
    CHECK(h.gradients.mix_src.gamma == 0.0);
}

TEST_CASE("gamma gradient follows the hand chain rule") {
    // one regression example, uniform mix over 2 layers, dim 1
    const std::vector<float> e = {2.0f, 4.0f};
    const LayerStack s{e, 2, 1};
    auto P = ProbeParams::initial(2, 1, 1, false);
    P.mix_src.gamma = 1.5;
    P.weight[0] = 0.5;
    P.bias[0] = 0.25;
    const std::vector<ProbeExample> batch{{{s, std::nullopt}, 1.0}};
    // ebar = 1.5 * 3 = 4.5; z = 2.5; dL/dz = 2 (z - y) = 3; dL/debar = 1.5; ebar / gamma = 3
    const auto g = backward(P, TaskKind::regression, batch).gradients;
    CHECK(g.mix_src.gamma == doctest::Approx(1.5 * 3.0).epsilon(1e-15));
    CHECK(g.weight[0] == doctest::Approx(3.0 * 4.5).epsilon(1e-15));
    CHECK(g.bias[0] == doctest::Approx(3.0).epsilon(1e-15));
    // da_k = p_k (g_k - sum p g) with g_l = gamma * 1.5 * e_l
    CHECK(g.mix_src.logits[0] == doctest::Approx(0.5 * (1.5 * 1.5 * 2.0 - 1.5 * 1.5 * 3.0)).epsilon(1e-15));
    CHECK(g.mix_src.logits[1] == doctest::Approx(0.5 * (1.5 * 1.5 * 4.0 - 1.5 * 1.5 * 3.0)).epsilon(1e-15));
}

TEST_CASE("unary probes carry no tgt gradient") {
    std::mt19937_64 rng(6);
    const auto inst = oracle::random_instance(rng, TaskKind::classification, false);
    const auto g = backward(inst.params, inst.kind, inst.batch);
    CHECK_FALSE(g.gradients.mix_tgt);
    CHECK(g.gradients.parameter_count() == inst.params.parameter_count());
    CHECK_THROWS_AS(backward(inst.params, inst.kind, std::span<const ProbeExample>{}), Error);
}

TEST_CASE("flatten and assign are inverse") {
    std::mt19937_64 rng(7);
    const auto inst = oracle::random_instance(rng, TaskKind::classification, true);
    const auto flat = inst.params.flatten();
    CHECK(flat.size() == inst.params.parameter_count());
    CHECK(flat.size() == 13 + 1 + 13 + 1 + 5 * 16 + 5);
    auto copy = inst.params.zeros_like();
    copy.assign(flat);
    CHECK(copy == inst.params);
    CHECK_THROWS_AS(copy.assign(std::vector<double>(3)), ShapeError);
}
