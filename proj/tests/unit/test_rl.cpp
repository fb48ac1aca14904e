#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gocom/objective.hpp"
#include "gocom/rl.hpp"

using namespace gocom;
using namespace gocom::rl;

namespace {

Transition make_transition(double tag, bool done = false) {
    Transition t;
    t.x = Tensor({1, 2, 2}, tag);
    t.next_x = Tensor({1, 2, 2}, tag + 0.5);
    t.w = Tensor({1, 2, 2}, tag * 0.25);
    t.action = static_cast<std::size_t>(tag) % 3;
    t.raw_reward = tag;
    t.reward = tag;
    t.done = done;
    return t;
}

// Upper 1% points of the chi-square distribution.
constexpr double kChi2Df2 = 9.2103;
constexpr double kChi2Df99 = 134.642;

double chi_square(const std::vector<double>& counts, double expected) {
    double s = 0.0;
    for (double c : counts) s += (c - expected) * (c - expected) / expected;
    return s;
}

Agent small_agent(const Shape& obs, std::uint64_t seed, bool with_channel = true) {
    Rng rng(seed);
    Agent a{std::nullopt, std::nullopt, models::make_dense_qnet(obs, 8, 3, rng)};
    if (with_channel) {
        a.goe = models::make_dense_goe(obs, 8, 4, false, rng);
        a.demapper = models::make_dense_demapper(obs, 8, 4, false, rng);
    }
    return a;
}

}  // namespace

TEST_CASE("replay buffer evicts the oldest transition") {
    ReplayBuffer buf(2);
    buf.push(make_transition(1));
    buf.push(make_transition(2));
    buf.push(make_transition(3));
    REQUIRE(buf.size() == 2);
    CHECK(buf.at(0).raw_reward == 2.0);
    CHECK(buf.at(1).raw_reward == 3.0);
    CHECK(bit_equal(buf.at(1).next_x, Tensor({1, 2, 2}, 3.5)));
    CHECK_THROWS(buf.at(2));
    CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
}

TEST_CASE("replay buffer round trips transitions") {
    ReplayBuffer buf(4);
    Transition t = make_transition(2, true);
    t.w = Tensor({1, 2, 2}, {0.1, 0.2, 0.3, 1.0 / 3.0});
    t.reward = -0.125;
    buf.push(t);
    auto back = buf.at(0);
    CHECK(bit_equal(back.x, t.x));
    CHECK(bit_equal(back.w, t.w));
    CHECK(back.reward == t.reward);
    CHECK(back.done);

    const std::size_t idx[] = {0, 0};
    auto b = buf.gather(idx);
    CHECK(b.x.shape() == Shape{2, 1, 2, 2});
    CHECK(b.done == std::vector<double>{1.0, 1.0});
    CHECK(b.actions == std::vector<std::size_t>{2, 2});

    Transition bad = make_transition(1);
    bad.x = Tensor({4}, 1.0);
    CHECK_THROWS(buf.push(bad));
    Rng rng(1);
    CHECK_THROWS_AS(buf.sample_indices(2, rng), std::logic_error);
}

TEST_CASE("replay sampling is uniform") {
    ReplayBuffer buf(100);
    for (int i = 0; i < 100; ++i) buf.push(make_transition(i));
    Rng rng(123);
    std::vector<double> counts(100, 0.0);
    const std::size_t n = 100000;
    for (std::size_t k = 0; k < n / 100; ++k) {
        for (std::size_t i : buf.sample_indices(100, rng)) ++counts[i];
    }
    CHECK(chi_square(counts, n / 100.0) < kChi2Df99);
}

TEST_CASE("epsilon greedy") {
    const double q[] = {0.1, 0.7, 0.7};
    Rng rng(9);
    CHECK(epsilon_greedy(q, 0.0, rng) == 1);
    std::vector<double> counts(3, 0.0);
    const int n = 30000;
    for (int i = 0; i < n; ++i) ++counts[epsilon_greedy(q, 1.0, rng)];
    CHECK(chi_square(counts, n / 3.0) < kChi2Df2);
    CHECK_THROWS(epsilon_greedy(q, 1.5, rng));

    DqnConfig cfg;
    cfg.eps_start = 1.0;
    cfg.eps_end = 0.1;
    cfg.eps_decay_steps = 100;
    CHECK(epsilon_at(cfg, 0) == 1.0);
    CHECK(epsilon_at(cfg, 50) == doctest::Approx(0.55));
    CHECK(epsilon_at(cfg, 100) == doctest::Approx(0.1));
    CHECK(epsilon_at(cfg, 10000) == 0.1);
}

TEST_CASE("td targets") {
    Tensor q_next({3, 2}, {1.0, 3.0, -2.0, -1.0, 5.0, 0.0});
    const double r[] = {1.0, 0.5, 2.0};
    const double done[] = {0.0, 0.0, 1.0};
    auto y = td_targets(q_next, r, done, 0.5);
    CHECK(y == std::vector<double>{2.5, 0.0, 2.0});
    auto y0 = td_targets(q_next, r, done, 0.0);
    CHECK(y0 == std::vector<double>{1.0, 0.5, 2.0});
}

TEST_CASE("huber td loss gradient reaches the encoder") {
    const Shape obs{1, 4, 4};
    Agent online = small_agent(obs, 1);
    Agent target = small_agent(obs, 2);
    Rng rng(3);
    ReplayBuffer buf(8);
    for (int i = 0; i < 8; ++i) {
        Transition t;
        t.x = rand_uniform(obs, rng, 0.0, 1.0);
        t.next_x = rand_uniform(obs, rng, 0.0, 1.0);
        t.w = t.x;
        t.action = static_cast<std::size_t>(i % 3);
        t.raw_reward = t.reward = static_cast<double>(i % 2) * 3.0;
        t.done = i == 5;
        buf.push(t);
    }
    std::vector<std::size_t> idx(8);
    for (std::size_t i = 0; i < 8; ++i) idx[i] = i;
    const Batch batch = buf.gather(idx);

    DqnConfig cfg;
    cfg.gamma = 0.9;
    cfg.train_snr = channel::Snr::db(10.0);
    cfg.channel = channel::Kind::slow_fading;
    cfg.opt = {OptRule::sgd, 1.0};

    // With plain SGD at unit rate the update is exactly minus the gradient.
    Agent stepped = online;
    Rng r0(77);
    dqn_step(stepped, target, batch, cfg, r0);

    auto loss_at = [&](const Agent& a) {
        Agent copy = a;
        Agent tgt = target;
        DqnConfig c = cfg;
        c.opt = {OptRule::sgd, 1e-300};
        Rng r(77);
        return dqn_step(copy, tgt, batch, c, r);
    };

    const double h = 1e-6;
    double worst = 0.0;
    auto& before = online.goe->net.params();
    auto& after = stepped.goe->net.params();
    for (const auto& name : before.names()) {
        const Tensor& v0 = before.at(name).value;
        for (std::size_t i = 0; i < v0.size(); i += 7) {
            const double analytic = v0[i] - after.at(name).value[i];
            Agent plus = online, minus = online;
            plus.goe->net.params().at(name).value[i] += h;
            minus.goe->net.params().at(name).value[i] -= h;
            const double numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
            const double err = std::abs(analytic - numeric) / std::max(1e-4, std::abs(analytic) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("target sync copies values bit for bit") {
    const Shape obs{1, 4, 4};
    Agent online = small_agent(obs, 4);
    Agent target = small_agent(obs, 5);
    CHECK_FALSE(params_bit_equal(online, target));
    sync_target(online, target);
    CHECK(params_bit_equal(online, target));
    sync_target(online, target);
    CHECK(params_bit_equal(online, target));

    // A learning step moves only the online side.
    Rng rng(6);
    ReplayBuffer buf(4);
    for (int i = 0; i < 4; ++i) {
        Transition t;
        t.x = rand_uniform(obs, rng, 0.0, 1.0);
        t.next_x = rand_uniform(obs, rng, 0.0, 1.0);
        t.w = t.x;
        t.raw_reward = t.reward = 1.0;
        buf.push(t);
    }
    Agent target_before = target;
    DqnConfig cfg;
    cfg.opt = {OptRule::adam, 1e-2};
    dqn_step(online, target, buf.sample(4, rng), cfg, rng);
    CHECK(params_bit_equal(target, target_before));
    CHECK_FALSE(params_bit_equal(online, target));

    Agent plain = small_agent(obs, 7, false);
    CHECK_THROWS(sync_target(online, plain));
}

TEST_CASE("training loop bookkeeping") {
    env::CatchEnv catch_env;
    const Shape obs = catch_env.observation_shape();

    DqnConfig cfg;
    cfg.total_steps = 450;
    cfg.learn_start = 64;
    cfg.batch = 8;
    cfg.capacity = 200;
    cfg.sync_every = 50;
    cfg.eps_decay_steps = 300;
    cfg.opt = {OptRule::adam, 1e-3};
    cfg.seed = 11;

    for (double alpha : {0.0, 0.3}) {
        CAPTURE(alpha);
        cfg.alpha = alpha;
        Agent agent = small_agent(obs, 12);
        std::size_t stored = 0, mismatched = 0, syncs_equal = 0;
        RlHooks hooks;
        hooks.on_store = [&](const Transition& t) {
            ++stored;
            const double expect = objective::modified_reward(t.raw_reward, t.x, t.w, alpha);
            if (alpha == 0.0 ? t.reward != t.raw_reward : t.reward != expect) ++mismatched;
        };
        hooks.on_sync = [&](const Agent& a, const Agent& b, std::size_t) { syncs_equal += params_bit_equal(a, b); };
        auto log = train_rl(agent, catch_env, cfg, hooks);
        CHECK(stored == cfg.total_steps);
        CHECK(mismatched == 0);
        CHECK(log.syncs == cfg.total_steps / cfg.sync_every);
        CHECK(syncs_equal == log.syncs);
        CHECK(log.updates == cfg.total_steps - cfg.learn_start + 1);
        CHECK(log.episode_raw_reward.size() == 3);
        for (double l : log.td_loss) CHECK(std::isfinite(l));
    }
}

TEST_CASE("seeded training reproduces the reward trace") {
    env::CatchEnv e1, e2;
    DqnConfig cfg;
    cfg.total_steps = 300;
    cfg.learn_start = 32;
    cfg.batch = 8;
    cfg.sync_every = 40;
    cfg.seed = 21;
    cfg.alpha = 0.1;
    Agent a = small_agent(e1.observation_shape(), 3);
    Agent b = small_agent(e2.observation_shape(), 3);
    std::vector<double> ra, rb;
    RlHooks ha, hb;
    ha.on_store = [&](const Transition& t) { ra.push_back(t.reward); };
    hb.on_store = [&](const Transition& t) { rb.push_back(t.reward); };
    train_rl(a, e1, cfg, ha);
    train_rl(b, e2, cfg, hb);
    CHECK(ra == rb);
    CHECK(params_bit_equal(a, b));
}

TEST_CASE("warm start touches only the codec") {
    env::CatchEnv e;
    Agent a = small_agent(e.observation_shape(), 8);
    const auto qnet_before = a.qnet.net.params().value_hash();
    const auto goe_before = a.goe->net.params().value_hash();
    WarmStartConfig ws;
    ws.steps = 20;
    ws.observations = 200;
    auto losses = warm_start_codec(a, e, ws, channel::Kind::awgn, channel::Snr::db(20.0));
    CHECK(losses.size() == 20);
    CHECK(a.qnet.net.params().value_hash() == qnet_before);
    CHECK(a.goe->net.params().value_hash() != goe_before);
    Agent plain = small_agent(e.observation_shape(), 8, false);
    CHECK_THROWS_AS(warm_start_codec(plain, e, ws, channel::Kind::awgn, channel::Snr::db(20.0)), std::logic_error);
}

TEST_CASE("reference policies") {
    env::CatchEnv e;
    auto scripted = eval_scripted(e, 20, 1);
    CHECK(scripted.mean == 10.0);
    CHECK(scripted.std == 0.0);
    auto random = eval_random(e, 1000, 2);
    CHECK(random.rewards.size() == 1000);
    CHECK(random.mean == doctest::Approx(1.9).epsilon(0.3 / 1.9));
}
