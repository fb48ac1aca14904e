#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>

#include "../support/grad_points.hpp"
#include "gocom/gradcheck.hpp"
#include "gocom/ops.hpp"
#include "gocom/optim.hpp"
#include "gocom/params.hpp"
#include "gocom/tape.hpp"

using namespace gocom;

namespace {

double dot(const Tensor& a, const Tensor& b) {
    return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
}

}  // namespace

TEST_CASE("tensor construction validates shape") {
    CHECK_THROWS_AS(Tensor({2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), std::invalid_argument);
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK(t[5] == 1.5);
    CHECK(Tensor::scalar(4.0).item() == 4.0);
    CHECK_THROWS(t.item());
}

TEST_CASE("reshape round trip preserves data") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x = randn({2, 3, 4}, rng);
        Tape tape;
        Var v = tape.input(x);
        Var r = reshape(reshape(v, {6, 4}), {2, 3, 4});
        CHECK(bit_equal(r.value(), x));
        tape.backward(mean(r));
        for (double g : tape.grad(v).data()) CHECK(g == doctest::Approx(1.0 / 24.0));
    }
    Tape tape;
    CHECK_THROWS_AS(reshape(tape.constant(Tensor({2, 3})), {4, 2}), ShapeError);
}

TEST_CASE("shape errors name the primitive") {
    Tape tape;
    Var a = tape.constant(Tensor({2, 3}));
    Var b = tape.constant(Tensor({4, 2}));
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(e.primitive() == "matmul");
        CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    }
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(conv2d(tape.constant(Tensor({1, 2, 4, 4})), tape.constant(Tensor({1, 3, 3, 3})), {}), ShapeError);
}

TEST_CASE("backward needs a scalar root") {
    Tape tape;
    Var x = tape.input(Tensor({2, 2}, 1.0));
    CHECK_THROWS_AS(tape.backward(scale(x, 2.0)), ShapeError);
}

TEST_CASE("matmul forward matches hand computation") {
    Tape tape;
    Var a = tape.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Var b = tape.constant(Tensor({2, 1}, {5, 6}));
    CHECK(matmul(a, b).value().vec() == std::vector<double>{17, 39});
}

TEST_CASE("large matmul and its gradients match a naive oracle") {
    Rng rng(13);
    const std::size_t m = 32, k = 768, n = 256;
    Tensor a = randn({m, k}, rng), b = randn({k, n}, rng), g = randn({m, n}, rng);
    Tape tape;
    Var va = tape.input(a), vb = tape.input(b);
    Var c = matmul(va, vb);
    tape.backward(mean(mul(c, tape.constant(g))));
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
            worst = std::max(worst, std::abs(s - c.value()[i * n + j]));
        }
    }
    CHECK(worst < 1e-10);
    // dL/dA = G B^T / (m n), dL/dB = A^T G / (m n)
    const double scale_mn = 1.0 / static_cast<double>(m * n);
    worst = 0.0;
    for (std::size_t i = 0; i < m; i += 3) {
        for (std::size_t l = 0; l < k; l += 5) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * b[l * n + j];
            worst = std::max(worst, std::abs(s * scale_mn - tape.grad(va)[i * k + l]));
        }
    }
    for (std::size_t l = 0; l < k; l += 5) {
        for (std::size_t j = 0; j < n; j += 3) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += a[i * k + l] * g[i * n + j];
            worst = std::max(worst, std::abs(s * scale_mn - tape.grad(vb)[l * n + j]));
        }
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("conv2d of ones sums windows") {
    Tape tape;
    Var x = tape.constant(Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
    Var w = tape.constant(Tensor({1, 1, 2, 2}, 1.0));
    auto y = conv2d(x, w, {}).value();
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    CHECK(y.vec() == std::vector<double>{12, 16, 24, 28});
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
    Rng rng(11);
    for (std::size_t stride : {1u, 2u, 4u}) {
        for (std::size_t pad : {0u, 1u}) {
            Tensor x = randn({2, 3, 8, 8}, rng);
            Tensor w = randn({4, 3, 3, 3}, rng);
            Tape t1;
            Tensor y = conv2d(t1.constant(x), t1.constant(w), {stride, pad, 0}).value();
            Tensor u = randn(y.shape(), rng);
            // Choose output_padding so the transposed output matches x.
            const std::size_t base = (y.dim(2) - 1) * stride + 3 - 2 * pad;
            const std::size_t op = 8 - base;
            REQUIRE(op < stride);
            Tape t2;
            Tensor xt = conv2d_transpose(t2.constant(u), t2.constant(w), {stride, pad, op}).value();
            REQUIRE(xt.shape() == x.shape());
            CHECK(dot(y, u) == doctest::Approx(dot(x, xt)).epsilon(1e-12));
        }
    }
}

TEST_CASE("every primitive passes a finite-difference check") {
    Rng rng(2024);
    for (Prim p : all_prims()) {
        CAPTURE(prim_name(p));
        for (int i = 0; i < 20; ++i) {
            auto c = testing::random_case(p, rng);
            CHECK(finite_diff_check(p, c.point, c.attrs) < 1e-6);
        }
    }
}

TEST_CASE("gradients accumulate linearly over fan-out") {
    Rng rng(3);
    Tensor x0 = randn({3, 4}, rng);
    Tensor w0 = randn({4, 2}, rng);

    auto grad_of = [&](auto build) {
        Tape tape;
        Var x = tape.input(x0);
        Var w = tape.constant(w0);
        tape.backward(build(x, w));
        return tape.grad(x);
    };
    const Tensor gf = grad_of([](Var x, Var w) { return mean(matmul(x, w)); });
    const Tensor gg = grad_of([](Var x, Var) { return mse(x, scale(x, 0.5)); });
    const Tensor gsum = grad_of([](Var x, Var w) { return add(mean(matmul(x, w)), mse(x, scale(x, 0.5))); });
    for (std::size_t i = 0; i < gsum.size(); ++i) CHECK(gsum[i] == doctest::Approx(gf[i] + gg[i]).epsilon(1e-12));

    // x used twice: d/dx mean(x * x) = 2x / n.
    Tape tape;
    Var x = tape.input(x0);
    tape.backward(mean(mul(x, x)));
    for (std::size_t i = 0; i < x0.size(); ++i) {
        CHECK(tape.grad(x)[i] == doctest::Approx(2.0 * x0[i] / 12.0).epsilon(1e-12));
    }
}

TEST_CASE("parameter gradients land in the ParamSet") {
    ParamSet ps;
    ps.add("w", Tensor({2, 1}, {1.0, -2.0}));
    CHECK_THROWS(ps.add("w", Tensor({1})));
    Tape tape;
    Var x = tape.constant(Tensor({1, 2}, {3.0, 4.0}));
    tape.backward(mean(matmul(x, tape.param(ps, "w"))));
    CHECK(ps.at("w").grad.vec() == std::vector<double>{3.0, 4.0});

    // Frozen parameters get nothing.
    ps.zero_grad();
    Tape t2;
    t2.backward(mean(matmul(t2.constant(Tensor({1, 2}, 1.0)), t2.param(ps, "w", false))));
    CHECK(ps.at("w").grad.vec() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("numerically stable sigmoid and cross entropy") {
    Tape tape;
    Var s = sigmoid(tape.constant(Tensor({1, 2}, {-1000.0, 1000.0})));
    CHECK(s.value()[0] == 0.0);
    CHECK(s.value()[1] == 1.0);
    const std::size_t labels[] = {0};
    Var l = softmax_cross_entropy(tape.constant(Tensor({1, 3}, {1000.0, 0.0, -1000.0})), labels);
    CHECK(std::isfinite(l.value().item()));
    CHECK(l.value().item() == doctest::Approx(0.0));
}

TEST_CASE("normalize_power rejects an all-zero row") {
    Tape tape;
    CHECK_THROWS_AS(normalize_power(tape.constant(Tensor({1, 4}, 0.0))), std::domain_error);
    Rng rng(5);
    auto z = normalize_power(tape.constant(randn({3, 8}, rng))).value();
    for (std::size_t r = 0; r < 3; ++r) {
        double p = 0.0;
        for (std::size_t i = 0; i < 8; ++i) p += z[r * 8 + i] * z[r * 8 + i];
        CHECK(p / 4.0 == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("finite checking catches overflow") {
    Tape tape;
    tape.set_check_finite(true);
    Var big = tape.constant(Tensor({1}, 1e300));
    CHECK_THROWS_AS(mul(big, big), std::domain_error);
    CHECK_THROWS_AS(tape.constant(Tensor({1}, std::numeric_limits<double>::quiet_NaN())), std::domain_error);
}

TEST_CASE("sgd and adam updates") {
    ParamSet ps;
    ps.add("p", Tensor({2}, {1.0, 1.0}));
    ps.at("p").grad = Tensor({2}, {0.5, -2.0});
    opt_step(ps, {OptRule::sgd, 0.1});
    CHECK(ps.at("p").value.vec() == std::vector<double>{1.0 - 0.05, 1.0 + 0.2});
    CHECK(ps.at("p").grad.vec() == std::vector<double>{0.0, 0.0});

    ParamSet qs;
    qs.add("q", Tensor({2}, {0.0, 0.0}));
    qs.at("q").grad = Tensor({2}, {3.0, -1e-3});
    opt_step(qs, {OptRule::adam, 0.01});
    // First bias-corrected Adam step moves each coordinate by ~lr * sign(g).
    CHECK(qs.at("q").value[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(qs.at("q").value[1] == doctest::Approx(0.01).epsilon(1e-4));
    CHECK(qs.adam_steps() == 1);

    CHECK_THROWS_AS(opt_step(qs, {OptRule::adam, 0.0}), std::invalid_argument);
    CHECK(parse_opt_rule("sgd") == OptRule::sgd);
    CHECK_THROWS(parse_opt_rule("rmsprop"));
}

TEST_CASE("seeded randomness is reproducible") {
    Rng a(42), b(42);
    CHECK(bit_equal(randn({10}, a), randn({10}, b)));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}

TEST_CASE("param value hash tracks changes") {
    ParamSet ps;
    ps.add("a", Tensor({2}, 1.0));
    const auto h = ps.value_hash();
    ps.at("a").value[0] = 2.0;
    CHECK(ps.value_hash() != h);
    ParamSet copy = ps;
    CHECK(copy.values_bit_equal(ps));
}
