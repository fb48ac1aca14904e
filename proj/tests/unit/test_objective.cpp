#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gocom/objective.hpp"

using namespace gocom;
using namespace gocom::objective;

TEST_CASE("combined loss weights task against communication") {
    CHECK(combined_loss(2.0, 4.0, 0.25) == 2.5);
    CHECK(combined_loss(2.0, 4.0, 0.0) == 2.0);
    CHECK(combined_loss(2.0, 4.0, 1.0) == 4.0);
    CHECK_THROWS_AS(combined_loss(1.0, 1.0, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(combined_loss(1.0, 1.0, 1.5), std::invalid_argument);

    Tape tape;
    Var lt = tape.input(Tensor::scalar(2.0));
    Var lc = tape.input(Tensor::scalar(4.0));
    Var l = combined_loss(lt, lc, 0.25);
    CHECK(l.value().item() == 2.5);
    tape.backward(l);
    CHECK(tape.grad(lt).item() == 0.75);
    CHECK(tape.grad(lc).item() == 0.25);
}

TEST_CASE("communication loss is the mean squared error") {
    Tensor x({2, 2}, {0.0, 1.0, 0.5, 0.5});
    Tensor w({2, 2}, {0.0, 0.0, 0.5, 1.0});
    CHECK(comm_loss(x, w) == doctest::Approx(0.3125));
    CHECK(comm_loss(x, x) == 0.0);
    CHECK_THROWS_AS(comm_loss(x, Tensor({4})), ShapeError);
}

TEST_CASE("psnr") {
    CHECK(psnr_from_mse(0.01, 1.0) == doctest::Approx(20.0));
    CHECK(psnr_from_mse(1.0, 255.0) == doctest::Approx(20.0 * std::log10(255.0)));
    Tensor x({4}, 0.5);
    Tensor y({4}, {0.6, 0.4, 0.6, 0.4});
    CHECK(psnr(x, y, 1.0) == doctest::Approx(20.0));
    try {
        psnr(x, x, 1.0);
        FAIL("expected infinite PSNR");
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()) == "infinite PSNR");
    }
}

TEST_CASE("modified reward") {
    Tensor x({3}, {0.0, 1.0, 0.0});
    Tensor w({3}, {0.3, 0.9, 0.1});
    const double l = comm_loss(x, w);
    // alpha = 0 is the raw reward, bit for bit.
    CHECK(modified_reward(0.7, x, w, 0.0) == 0.7);
    CHECK(modified_reward(0.7, x, w, 1.0) == -l);
    CHECK(modified_reward(1.0, x, w, 0.2) == doctest::Approx(0.8 - 0.2 * l));
    // Maximization form is the negated loss-convention objective.
    for (double a : {0.0, 0.1, 0.5, 1.0}) {
        CHECK(modified_reward_from_loss(0.7, l, a) == -step_objective(0.7, l, a));
        CHECK(modified_reward(0.7, x, w, a) == modified_reward_from_loss(0.7, l, a));
    }
}

TEST_CASE("discounted return") {
    const double r[] = {1.0, 1.0, 1.0};
    CHECK(discounted_return(r, 0.5) == 1.75);
    CHECK(discounted_return(r, 0.0) == 1.0);
    CHECK(discounted_return(r, 1.0) == 3.0);
    CHECK_THROWS(discounted_return(r, 1.1));
}

TEST_CASE("argmax breaks ties toward the lowest index") {
    const double a[] = {0.1, 0.9, 0.3};
    const double b[] = {0.5, 0.5, 0.1};
    const double c[] = {-1.0, 2.0, 2.0};
    CHECK(argmax(a) == 1);
    CHECK(argmax(b) == 0);
    CHECK(argmax(c) == 1);
    CHECK_THROWS(argmax(std::span<const double>{}));
}

TEST_CASE("accuracy") {
    Tensor logits({3, 2}, {1.0, 0.0, 0.0, 1.0, 0.5, 0.5});
    const std::size_t labels[] = {0, 1, 1};
    CHECK(accuracy(logits, labels) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS(accuracy(logits, std::span<const std::size_t>{}));
}
