#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gocom/gradcheck.hpp"
#include "gocom/models.hpp"
#include "gocom/objective.hpp"

using namespace gocom;
using namespace gocom::models;

namespace {

double row_power(const Tensor& z, std::size_t row) {
    const std::size_t w = z.dim(1);
    double p = 0.0;
    for (std::size_t i = 0; i < w; ++i) p += z[row * w + i] * z[row * w + i];
    return p / static_cast<double>(w / 2);
}

}  // namespace

TEST_CASE("rate parsing and symbol counts") {
    CHECK(symbols_for_rate(768, Rate::parse("1/6")) == 128);
    CHECK(symbols_for_rate(3072, Rate::parse("1/6")) == 512);
    CHECK(symbols_for_rate(784, Rate::parse("1/6")) == 131);
    CHECK(symbols_for_rate(64, Rate::parse("1/6")) == 11);
    CHECK(symbols_for_rate(10, Rate::parse("0.01")) == 1);
    const Rate half = Rate::parse("0.5");
    CHECK(half.num == 1);
    CHECK(half.den == 2);
    CHECK(Rate::parse("2/12").den == 6);
    CHECK_THROWS(Rate::parse("0"));
    CHECK_THROWS(Rate::parse("3/2"));
    CHECK_THROWS(Rate::parse("1/0"));
    CHECK_THROWS(Rate::parse("abc"));
}

TEST_CASE("snr feature clamps and maps the sentinel") {
    CHECK(snr_feature(channel::Snr::db(0.0)) == 0.0);
    CHECK(snr_feature(channel::Snr::db(35.0)) == 2.0);
    CHECK(snr_feature(channel::Snr::db(-30.0)) == -1.0);
    CHECK(snr_feature(channel::Snr::noiseless()) == 2.0);
}

TEST_CASE("conv encoder emits unit-power symbol blocks") {
    Rng rng(1);
    const Shape in{3, 8, 8};
    auto goe = make_conv_goe(in, symbols_for_rate(numel(in), {1, 6}), true, rng);
    Tape tape;
    auto z = goe.encode(tape, tape.constant(rand_uniform({5, 3, 8, 8}, rng, 0.0, 1.0)), channel::Snr::db(3.0), false);
    REQUIRE(z.shape() == Shape{5, 2 * goe.symbols});
    for (std::size_t r = 0; r < 5; ++r) CHECK(row_power(z.value(), r) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("demapper output lives in the source space") {
    Rng rng(2);
    const Shape in{1, 8, 8};
    auto dem = make_conv_demapper(in, 11, true, rng);
    Tape tape;
    auto w = dem.demap(tape, tape.constant(randn({4, 22}, rng)), channel::Snr::db(0.0), false);
    REQUIRE(w.shape() == Shape{4, 1, 8, 8});
    for (double v : w.value().data()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    auto dd = make_dense_demapper({3, 16, 16}, 32, 128, false, rng);
    Tape t2;
    CHECK(dd.demap(t2, t2.constant(randn({2, 256}, rng)), channel::Snr::db(0.0), false).shape() == Shape{2, 3, 16, 16});
}

TEST_CASE("snr gate makes the encoder snr-dependent") {
    Rng rng(3);
    const Shape in{1, 8, 8};
    auto with = make_conv_goe(in, 11, true, rng);
    auto without = make_conv_goe(in, 11, false, rng);
    Tensor x = rand_uniform({2, 1, 8, 8}, rng, 0.0, 1.0);
    auto enc = [&](GoeModel& g, double db) {
        Tape t;
        return g.encode(t, t.constant(x), channel::Snr::db(db), false).value();
    };
    CHECK_FALSE(bit_equal(enc(with, 0.0), enc(with, 20.0)));
    CHECK(bit_equal(enc(without, 0.0), enc(without, 20.0)));
    CHECK(with.net.has_snr_gate());
    CHECK_FALSE(without.net.has_snr_gate());
    CHECK(with.net.params().contains("l02.gate_out.bias"));
}

TEST_CASE("identity head returns its input") {
    auto id = make_identity_task({1, 4, 4});
    Rng rng(4);
    Tensor w = randn({2, 1, 4, 4}, rng);
    Tape tape;
    CHECK(bit_equal(id.forward(tape, tape.constant(w), true).value(), w));
    CHECK(id.net.params().size() == 0);
}

TEST_CASE("frozen task head receives no gradient") {
    Rng rng(5);
    auto task = make_conv_classifier({1, 8, 8}, 4, rng);
    task.frozen = true;
    Tape tape;
    const std::size_t labels[] = {0, 1};
    auto logits = task.forward(tape, tape.input(rand_uniform({2, 1, 8, 8}, rng, 0.0, 1.0)), true);
    tape.backward(softmax_cross_entropy(logits, labels));
    for (const auto& [name, p] : task.net.params()) {
        for (double g : p.grad.data()) CHECK(g == 0.0);
    }
}

TEST_CASE("compose draws one realization per sample") {
    Rng rng(6);
    const Shape in{1, 8, 8};
    auto goe = make_conv_goe(in, 11, true, rng);
    auto dem = make_conv_demapper(in, 11, true, rng);
    auto task = make_conv_classifier(in, 3, rng);
    Tape tape;
    auto c = compose(tape, goe, channel::Kind::slow_fading, channel::Snr::db(10.0), dem, task,
                     tape.constant(rand_uniform({7, 1, 8, 8}, rng, 0.0, 1.0)), rng, true);
    CHECK(c.realizations.size() == 7);
    CHECK(c.y_hat.shape() == Shape{7, 3});
    CHECK(c.w.shape() == Shape{7, 1, 8, 8});

    auto other = make_conv_classifier({1, 4, 4}, 3, rng);
    Tape t2;
    CHECK_THROWS_AS(compose(t2, goe, channel::Kind::awgn, channel::Snr::db(0.0), dem, other,
                            t2.constant(Tensor({1, 1, 8, 8})), rng, true),
                    ShapeError);
}

TEST_CASE("end-to-end input gradient with frozen channel") {
    Rng rng(7);
    const Shape in{1, 8, 8};
    auto goe = make_conv_goe(in, 11, true, rng);
    auto dem = make_conv_demapper(in, 11, true, rng);
    auto task = make_conv_classifier(in, 3, rng);
    const auto snr = channel::Snr::db(5.0);
    std::vector<channel::Realization> rs;
    for (int i = 0; i < 2; ++i) rs.push_back(channel::sample_realization(channel::Kind::slow_fading, snr.noise_power(), 11, rng));
    const std::vector<std::size_t> labels{0, 2};
    auto fn = [&](Tape& t, std::span<const Var> v) {
        Var z = goe.encode(t, v[0], snr, false);
        Var w = dem.demap(t, channel::apply(z, rs), snr, false);
        Var l_task = softmax_cross_entropy(task.forward(t, w, false), labels);
        return objective::combined_loss(l_task, objective::comm_loss(v[0], w), 0.1);
    };
    const Tensor x = rand_uniform({2, 1, 8, 8}, rng, 0.1, 0.9);
    CHECK(finite_diff_check(fn, std::span<const Tensor>(&x, 1)) < 1e-5);
}

TEST_CASE("jscc copy shares architecture but not values") {
    Rng rng(8);
    auto goe = make_dense_goe({1, 8, 8}, 16, 11, false, rng);
    auto dem = make_dense_demapper({1, 8, 8}, 16, 11, false, rng);
    auto j = make_jscc_like(goe, dem, rng);
    CHECK(j.encoder.net.params().names() == goe.net.params().names());
    CHECK_FALSE(j.encoder.net.params().values_bit_equal(goe.net.params()));
    CHECK(j.decoder.symbols == 11);
}
