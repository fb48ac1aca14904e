#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gocom/supervised.hpp"

using namespace gocom;
using namespace gocom::train;

namespace {

data::Dataset tiny_synth(std::size_t n, std::uint64_t seed, data::Split split = data::Split::train) {
    data::SynthConfig cfg;
    cfg.n = n;
    cfg.classes = 4;
    cfg.noise = 0.1;
    cfg.seed = seed;
    return data::gen_synth(cfg, split);
}

}  // namespace

TEST_CASE("snr policy") {
    Rng a(1), b(1);
    auto fixed = SnrPolicy::at(channel::Snr::db(7.0));
    CHECK(fixed.sample(a).value_db() == 7.0);
    CHECK(a() == b());  // nothing consumed
    CHECK(fixed.str() == "7");
    CHECK(SnrPolicy::at(channel::Snr::noiseless()).str() == "inf");

    auto range = SnrPolicy::range(-2.0, 20.0);
    CHECK(range.str() == "-2:20");
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 2000; ++i) {
        const double v = range.sample(a).value_db();
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= -2.0);
    CHECK(hi <= 20.0);
    CHECK(hi - lo > 20.0);
    CHECK_THROWS(SnrPolicy::range(5.0, 1.0));
}

TEST_CASE("reconstruction-only gocom matches jscc bit for bit") {
    const Shape in{1, 8, 8};
    Rng rng(5);
    auto goe = models::make_conv_goe(in, 11, true, rng);
    auto dem = models::make_conv_demapper(in, 11, true, rng);
    auto id = models::make_identity_task(in);
    models::JsccModel jscc{goe, dem};

    auto train = tiny_synth(96, 3);
    TrainConfig cfg;
    cfg.alpha = 1.0;
    cfg.batch = 16;
    cfg.epochs = 1;
    cfg.seed = 9;
    cfg.opt = {OptRule::adam, 1e-3};
    cfg.channel = channel::Kind::slow_fading;

    auto lg = train_gocom(goe, dem, id, train, cfg, 5);
    auto lj = train_jscc(jscc, train, cfg, 5);
    CHECK(lg.step_loss.size() == 5);
    CHECK(lg.step_loss == lj.step_loss);
    CHECK(goe.net.params().values_bit_equal(jscc.encoder.net.params()));
    CHECK(dem.net.params().values_bit_equal(jscc.decoder.net.params()));
}

TEST_CASE("pretraining and freezing the task head") {
    Rng rng(6);
    const Shape in{1, 8, 8};
    auto train = tiny_synth(400, 4);
    auto test = tiny_synth(200, 4, data::Split::test);
    auto task = models::make_conv_classifier(in, 4, rng);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto h0 = task.net.params().value_hash();
    pretrain_task(task, train, cfg);
    CHECK(task.net.params().value_hash() == h0);

    cfg.epochs = 5;
    cfg.batch = 32;
    cfg.opt = {OptRule::adam, 1e-3};
    const ParamSet pre = pretrain_task(task, train, cfg);
    CHECK(pre.values_bit_equal(task.net.params()));
    CHECK(task_accuracy(task, test) > 0.9);

    auto goe = models::make_conv_goe(in, 11, true, rng);
    auto dem = models::make_conv_demapper(in, 11, true, rng);
    cfg.epochs = 1;
    cfg.alpha = 0.1;
    cfg.freeze_task = true;
    train_gocom(goe, dem, task, train, cfg, 3);
    CHECK(task.net.params().values_bit_equal(pre));
    cfg.freeze_task = false;
    task.frozen = false;
    train_gocom(goe, dem, task, train, cfg, 3);
    CHECK_FALSE(task.net.params().values_bit_equal(pre));
}

TEST_CASE("sweep rows") {
    Rng rng(7);
    const Shape in{1, 8, 8};
    auto test = tiny_synth(60, 4, data::Split::test);
    auto goe = models::make_conv_goe(in, 11, true, rng);
    auto dem = models::make_conv_demapper(in, 11, true, rng);
    auto task = models::make_conv_classifier(in, 4, rng);
    models::JsccModel jscc{goe, dem};

    SweepConfig sc;
    sc.grid = {channel::Snr::db(-2.0), channel::Snr::db(0.0), channel::Snr::db(10.0), channel::Snr::noiseless()};
    sc.repeats = 3;
    sc.eval_batch = 25;
    RowContext ctx{"r", 0.1, "-2:20"};

    auto g = evaluate_sweep(System::gocom, {&goe, &dem, &task, nullptr}, test, sc, ctx);
    REQUIRE(g.size() == 4);
    CHECK(g[0].test_snr_db == "-2");
    CHECK(g[3].test_snr_db == "inf");
    for (const auto& r : g) {
        CHECK(r.metric == "accuracy");
        CHECK(r.repeats == 3);
        CHECK(r.system == "gocom");
        CHECK(r.channel == "awgn");
        CHECK((r.value >= 0.0 && r.value <= 1.0));
    }
    // Noiseless repeats are identical.
    CHECK(g[3].std == 0.0);

    auto j = evaluate_sweep(System::jscc_task, {nullptr, nullptr, &task, &jscc}, test, sc, ctx);
    CHECK(j.size() == 8);
    std::size_t psnr_rows = 0;
    for (const auto& r : j) psnr_rows += r.metric == "psnr_db";
    CHECK(psnr_rows == 4);

    auto u = evaluate_sweep(System::upper, {nullptr, nullptr, &task, nullptr}, test, sc, ctx);
    REQUIRE(u.size() == 4);
    for (const auto& r : u) {
        CHECK(r.value == u[0].value);
        CHECK(r.std == 0.0);
        CHECK(r.channel == "none");
    }
    CHECK(u[0].value == task_accuracy(task, test));

    // Same seed, same rows.
    auto g2 = evaluate_sweep(System::gocom, {&goe, &dem, &task, nullptr}, test, sc, ctx);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i].value == g2[i].value);

    CHECK_THROWS(evaluate_sweep(System::gocom, {nullptr, nullptr, &task, nullptr}, test, sc, ctx));
    sc.repeats = 0;
    CHECK_THROWS(evaluate_sweep(System::upper, {nullptr, nullptr, &task, nullptr}, test, sc, ctx));
}
