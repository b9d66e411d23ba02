#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <tuple>

#include "dmnet/ops.hpp"
#include "dmnet/tensor.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dmnet;
using testutil::gradient_check;
using testutil::random_param;
using testutil::random_tensor;
using testutil::random_values;

TEST_CASE("matmul matches the loop reference") {
    Rng rng(11);
    for (int rep = 0; rep < 5; ++rep) {
        const Tensor a = random_tensor(rng, {3, 4});
        const Tensor b = random_tensor(rng, {4, 5});
        const Tensor c = ops::matmul(a, b);
        const oracle::Mat ref = oracle::matmul({3, 4, a.values()}, {4, 5, b.values()});
        CHECK(testutil::max_abs_diff(c.values(), ref.v) < 1e-12);
    }
}

TEST_CASE("matmul gradients match finite differences") {
    Rng rng(12);
    Tensor a = random_param(rng, {3, 4});
    Tensor b = random_param(rng, {4, 2});
    const auto loss = [&] { return ops::sum_all(ops::matmul(a, b)); };
    CHECK(gradient_check(a, loss) < 1e-6);
    CHECK(gradient_check(b, loss) < 1e-6);
}

TEST_CASE("transpose and reshape round-trip") {
    Rng rng(13);
    const Tensor a = random_tensor(rng, {3, 5});
    const Tensor back = ops::transpose(ops::transpose(a));
    CHECK(testutil::max_abs_diff(a.values(), back.values()) == 0.0);
    const Tensor r = ops::reshape(a, {5, 3});
    CHECK(r.dim(0) == 5);
    CHECK(testutil::max_abs_diff(a.values(), r.values()) == 0.0);
    CHECK_THROWS_AS(ops::reshape(a, {4, 4}), ShapeError);
}

TEST_CASE("softmax rows and columns normalize") {
    Rng rng(14);
    const Tensor a = random_tensor(rng, {4, 6}, -3.0, 3.0);
    const Tensor rows = ops::softmax_rows(a);
    for (int i = 0; i < 4; ++i) {
        double s = 0.0;
        for (int j = 0; j < 6; ++j) s += rows.values()[i * 6 + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    const Tensor cols = ops::softmax_cols(a);
    for (int j = 0; j < 6; ++j) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += cols.values()[i * 6 + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    const Tensor uniform = ops::softmax_rows(Tensor::zeros({2, 8}));
    for (double v : uniform.values()) CHECK(v == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("softmax value of a two-logit pair is the closed form") {
    const Tensor a = Tensor::constant({1, 2}, {10.0, 0.0});
    const Tensor s = ops::softmax_rows(a);
    CHECK(s.values()[0] == doctest::Approx(0.9999546021312976).epsilon(1e-12));
    CHECK(s.values()[1] == doctest::Approx(4.5397868702434395e-05).epsilon(1e-9));
}

TEST_CASE("softmax gradients") {
    Rng rng(15);
    Tensor a = random_param(rng, {3, 4}, -2.0, 2.0);
    Tensor w = random_tensor(rng, {3, 4});
    const auto weighted = [&](const Tensor& s) { return ops::sum_all(ops::mul(s, w)); };
    CHECK(gradient_check(a, [&] { return weighted(ops::softmax_rows(a)); }) < 1e-6);
    CHECK(gradient_check(a, [&] { return weighted(ops::softmax_cols(a)); }) < 1e-6);
    Tensor v = random_param(rng, {5}, -2.0, 2.0);
    Tensor wv = random_tensor(rng, {5});
    CHECK(gradient_check(v, [&] { return ops::sum_all(ops::mul(ops::softmax_vec(v), wv)); }) <
          1e-6);
}

TEST_CASE("softmax over axis 0 normalizes per position") {
    Rng rng(16);
    Tensor a = random_param(rng, {3, 2, 2}, -2.0, 2.0);
    const Tensor s = ops::softmax_axis0(a);
    for (int i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (int k = 0; k < 3; ++k) sum += s.values()[k * 4 + i];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    Tensor w = random_tensor(rng, {3, 2, 2});
    CHECK(gradient_check(a, [&] { return ops::sum_all(ops::mul(ops::softmax_axis0(a), w)); }) <
          1e-6);
}

TEST_CASE("minmax_norm maps extremes to 0 and 1") {
    const Tensor a = Tensor::constant({2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor n = ops::minmax_norm(a);
    CHECK(n.values()[0] == 0.0);
    CHECK(n.values()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(n.values()[3] == 1.0);

    const Tensor flat = ops::minmax_norm(Tensor::full({2, 2}, 7.0), 0.5);
    for (double v : flat.values()) CHECK(v == 0.5);

    Rng rng(17);
    Tensor x = random_param(rng, {3, 3}, -2.0, 2.0);
    Tensor w = random_tensor(rng, {3, 3});
    CHECK(gradient_check(x, [&] { return ops::sum_all(ops::mul(ops::minmax_norm(x), w)); }) <
          1e-5);
}

TEST_CASE("reductions") {
    const Tensor a = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor rm = ops::row_mean(a);
    CHECK(rm.values() == std::vector<double>{2.0, 5.0});
    CHECK(ops::mean_all(a).item() == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(ops::sum_all(a).item() == doctest::Approx(21.0).epsilon(1e-12));

    Rng rng(18);
    Tensor x = random_param(rng, {4, 3});
    Tensor w = random_tensor(rng, {4});
    CHECK(gradient_check(x, [&] { return ops::sum_all(ops::mul(ops::row_mean(x), w)); }) < 1e-6);
}

TEST_CASE("elementwise ops and their gradients") {
    Rng rng(19);
    Tensor a = random_param(rng, {2, 3}, 0.2, 2.0);  // away from the relu kink
    Tensor b = random_param(rng, {2, 3}, 0.2, 2.0);
    CHECK(gradient_check(a, [&] { return ops::sum_all(ops::mul(a, b)); }) < 1e-6);
    CHECK(gradient_check(b, [&] { return ops::sum_all(ops::mul(a, b)); }) < 1e-6);
    CHECK(gradient_check(a, [&] { return ops::sum_all(ops::sub(a, b)); }) < 1e-6);
    CHECK(gradient_check(a, [&] { return ops::sum_all(ops::relu(a)); }) < 1e-6);
    CHECK(gradient_check(a, [&] { return ops::sum_all(ops::scale(a, 2.5)); }) < 1e-6);

    Tensor s = Tensor::param({1}, {0.7});
    CHECK(gradient_check(s, [&] { return ops::sum_all(ops::scale_by(s, a)); }) < 1e-6);
    CHECK(gradient_check(a, [&] { return ops::sum_all(ops::scale_by(s, a)); }) < 1e-6);

    const Tensor neg = Tensor::constant({1, 2}, {-1.0, 3.0});
    CHECK(ops::relu(neg).values() == std::vector<double>{0.0, 3.0});
}

TEST_CASE("stack, channel select, concat, broadcast, lincomb") {
    const Tensor a = Tensor::constant({2, 2}, {1, 2, 3, 4});
    const Tensor b = Tensor::constant({2, 2}, {5, 6, 7, 8});
    const Tensor st = ops::stack0({a, b});
    CHECK(st.shape() == Shape{2, 2, 2});
    CHECK(ops::channel(st, 1).values() == b.values());

    const Tensor c3 = ops::concat_ch({st, ops::stack0({a})});
    CHECK(c3.shape() == Shape{3, 2, 2});
    CHECK(ops::channel(c3, 2).values() == a.values());

    const Tensor v = Tensor::constant({3}, {1, 2, 3});
    const Tensor bc = ops::broadcast_vec(v, 2, 2);
    CHECK(bc.shape() == Shape{3, 2, 2});
    CHECK(bc.values()[0] == 1.0);
    CHECK(bc.values()[11] == 3.0);

    Rng rng(20);
    Tensor x0 = random_param(rng, {4});
    Tensor x1 = random_param(rng, {4});
    Tensor w = Tensor::param({2}, {0.3, 0.7});
    const auto loss = [&] {
        return ops::sum_all(ops::mul(ops::lincomb({x0, x1}, w), ops::lincomb({x0, x1}, w)));
    };
    CHECK(gradient_check(x0, loss) < 1e-6);
    CHECK(gradient_check(w, loss) < 1e-6);
}

TEST_CASE("masked average pooling") {
    const Tensor f = Tensor::constant({1, 2, 2}, {1, 2, 3, 4});
    const std::vector<double> diag{1, 0, 0, 1};
    CHECK(ops::masked_avg_pool(f, diag).values()[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK_THROWS_AS(ops::masked_avg_pool(f, {0, 0, 0, 0}), EmptyMaskError);

    Rng rng(21);
    Tensor x = random_param(rng, {3, 2, 2});
    const std::vector<double> m{1, 0, 1, 1};
    Tensor w = random_tensor(rng, {3});
    CHECK(gradient_check(x, [&] { return ops::sum_all(ops::mul(ops::masked_avg_pool(x, m), w)); }) <
          1e-6);

    // matches the loop oracle
    const auto ref = oracle::map_prototype(x.values(), 3, 4, m);
    CHECK(testutil::max_abs_diff(ops::masked_avg_pool(x, m).values(), ref) < 1e-12);
}

TEST_CASE("mul_mask") {
    Rng rng(22);
    const Tensor f = random_tensor(rng, {2, 2, 2});
    const std::vector<double> ones(4, 1.0), zeros(4, 0.0);
    CHECK(ops::mul_mask(f, ones).values() == f.values());
    const Tensor all_masked = ops::mul_mask(f, zeros);
    for (double v : all_masked.values()) CHECK(v == 0.0);
    std::vector<double> single(4, 0.0);
    single[2] = 1.0;
    const Tensor masked = ops::mul_mask(f, single);
    CHECK(masked.values()[2] == f.values()[2]);
    CHECK(masked.values()[3] == 0.0);
    CHECK(masked.values()[6] == f.values()[6]);
}

TEST_CASE("cosine map properties and gradient") {
    const Tensor f = Tensor::constant({2, 1, 2}, {1.0, 0.0, 0.0, 1.0});  // columns e1, e2
    const Tensor p = Tensor::constant({2}, {1.0, 0.0});
    const Tensor cm = ops::cosine_map(f, p);
    CHECK(cm.values()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cm.values()[1] == doctest::Approx(0.0).epsilon(1e-12));

    // zero prototype and zero feature columns give 0
    CHECK(ops::cosine_map(f, Tensor::zeros({2})).values()[0] == 0.0);
    const Tensor fz = Tensor::constant({2, 1, 2}, {0.0, 3.0, 0.0, 4.0});
    CHECK(ops::cosine_map(fz, p).values()[0] == 0.0);

    Rng rng(23);
    Tensor x = random_param(rng, {3, 2, 2}, 0.3, 1.5);
    Tensor proto = random_param(rng, {3}, 0.3, 1.5);
    // scale invariance
    const Tensor c1 = ops::cosine_map(x, proto);
    const Tensor c2 = ops::cosine_map(ops::scale(x, 3.0), ops::scale(proto, 0.25));
    CHECK(testutil::max_abs_diff(c1.values(), c2.values()) < 1e-12);

    const auto ref = oracle::cosine_map(x.values(), 3, 4, proto.values());
    CHECK(testutil::max_abs_diff(c1.values(), ref) < 1e-12);

    Tensor w = random_tensor(rng, {2, 2});
    const auto loss = [&] { return ops::sum_all(ops::mul(ops::cosine_map(x, proto), w)); };
    CHECK(gradient_check(x, loss) < 1e-5);
    CHECK(gradient_check(proto, loss) < 1e-5);
}

TEST_CASE("conv2d matches the loop reference") {
    Rng rng(24);
    const std::tuple<int, int, int> cases[] = {{1, 0, 1}, {1, 1, 1}, {2, 1, 1}, {1, 2, 2}};
    for (const auto& [stride, pad, dil] : cases) {
        const Tensor x = random_tensor(rng, {2, 5, 5});
        const Tensor w = random_tensor(rng, {3, 2, 3, 3});
        const Tensor b = random_tensor(rng, {3});
        const Tensor y = ops::conv2d(x, w, b, stride, pad, dil);
        const auto ref =
            oracle::conv2d(x.values(), 2, 5, 5, w.values(), 3, 3, b.values(), stride, pad, dil);
        CHECK(y.values().size() == ref.size());
        CHECK(testutil::max_abs_diff(y.values(), ref) < 1e-12);
    }
    // bias-free path
    const Tensor x = random_tensor(rng, {1, 4, 4});
    const Tensor w = random_tensor(rng, {2, 1, 1, 1});
    const Tensor y = ops::conv2d(x, w, Tensor(), 1, 0, 1);
    const auto ref = oracle::conv2d(x.values(), 1, 4, 4, w.values(), 2, 1, {}, 1, 0, 1);
    CHECK(testutil::max_abs_diff(y.values(), ref) < 1e-12);
}

TEST_CASE("conv2d gradients") {
    Rng rng(25);
    Tensor x = random_param(rng, {2, 4, 4});
    Tensor w = random_param(rng, {2, 2, 3, 3});
    Tensor b = random_param(rng, {2});
    const auto loss = [&] {
        const Tensor y = ops::conv2d(x, w, b, 1, 1, 1);
        return ops::sum_all(ops::mul(y, y));
    };
    CHECK(gradient_check(x, loss) < 1e-5);
    CHECK(gradient_check(w, loss) < 1e-5);
    CHECK(gradient_check(b, loss) < 1e-5);
}

TEST_CASE("bilinear upsampling") {
    Rng rng(26);
    const Tensor x = random_tensor(rng, {2, 3, 3});
    const Tensor same = ops::upsample_bilinear(x, 3, 3);
    CHECK(testutil::max_abs_diff(same.values(), x.values()) < 1e-12);

    const Tensor up = ops::upsample_bilinear(x, 7, 5);
    const auto ref = oracle::upsample_bilinear(x.values(), 2, 3, 3, 7, 5);
    CHECK(testutil::max_abs_diff(up.values(), ref) < 1e-12);

    Tensor p = random_param(rng, {1, 2, 2});
    Tensor w = random_tensor(rng, {1, 4, 4});
    CHECK(gradient_check(p, [&] {
              return ops::sum_all(ops::mul(ops::upsample_bilinear(p, 4, 4), w));
          }) < 1e-6);
}

TEST_CASE("adaptive column pooling") {
    // multiple of the output width: plain block averages
    const Tensor a = Tensor::constant({1, 6}, {1, 2, 3, 4, 5, 6});
    const Tensor p = ops::adaptive_pool_cols(a, 3);
    CHECK(p.values() == std::vector<double>{1.5, 3.5, 5.5});

    // fewer columns than bins: every bin still non-empty
    const Tensor b = Tensor::constant({1, 3}, {1, 2, 3});
    const Tensor q = ops::adaptive_pool_cols(b, 5);
    CHECK(q.numel() == 5);
    const auto ref = oracle::pool_cols({1, 3, b.values()}, 5);
    CHECK(testutil::max_abs_diff(q.values(), ref.v) < 1e-12);

    Rng rng(27);
    const Tensor c = random_tensor(rng, {3, 7});
    const auto ref2 = oracle::pool_cols({3, 7, c.values()}, 4);
    CHECK(testutil::max_abs_diff(ops::adaptive_pool_cols(c, 4).values(), ref2.v) < 1e-12);

    Tensor x = random_param(rng, {2, 5});
    Tensor w = random_tensor(rng, {2, 3});
    CHECK(gradient_check(x, [&] {
              return ops::sum_all(ops::mul(ops::adaptive_pool_cols(x, 3), w));
          }) < 1e-6);
}

TEST_CASE("binary cross entropy on foreground probabilities") {
    const Tensor half = Tensor::full({2, 2}, 0.5);
    const std::vector<double> target{1, 0, 1, 0};
    CHECK(ops::bce_fg(half, target).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    const Tensor perfect = Tensor::constant({1, 2}, {1.0, 0.0});
    CHECK(ops::bce_fg(perfect, {1.0, 0.0}).item() < 1e-5);

    CHECK_THROWS_AS(ops::bce_fg(half, {0.5, 0, 1, 0}), DataError);

    Rng rng(28);
    Tensor p = Tensor::param({2, 2}, {0.3, 0.6, 0.2, 0.9});
    CHECK(gradient_check(p, [&] { return ops::bce_fg(p, target); }) < 1e-6);
}

TEST_CASE("backward accumulates through shared subgraphs") {
    Tensor x = Tensor::param({1}, {3.0});
    const Tensor sq = ops::mul(x, x);
    const Tensor z = ops::add(sq, sq);  // 2x^2
    z.backward();
    CHECK(z.item() == doctest::Approx(18.0).epsilon(1e-12));
    CHECK(x.grad()[0] == doctest::Approx(12.0).epsilon(1e-12));  // 4x
}

TEST_CASE("parameter grads accumulate until zeroed, constants stay clean") {
    Tensor x = Tensor::param({1}, {2.0});
    const auto run = [&] { ops::scale(x, 5.0).backward(); };
    run();
    CHECK(x.grad()[0] == doctest::Approx(5.0).epsilon(1e-12));
    run();
    CHECK(x.grad()[0] == doctest::Approx(10.0).epsilon(1e-12));
    x.zero_grad();
    run();
    CHECK(x.grad()[0] == doctest::Approx(5.0).epsilon(1e-12));

    const Tensor c = Tensor::constant({1}, {4.0});
    ops::mul(x, c).backward();
    CHECK(c.grad().empty());
}

TEST_CASE("add_n sums many terms") {
    Tensor a = Tensor::param({2}, {1.0, 2.0});
    const Tensor s = ops::add_n({a, a, a});
    CHECK(s.values() == std::vector<double>{3.0, 6.0});
    CHECK(gradient_check(a, [&] { return ops::sum_all(ops::add_n({a, a, a})); }) < 1e-6);
}
