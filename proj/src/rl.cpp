#include "gocom/rl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gocom/metrics.hpp"
#include "gocom/objective.hpp"

namespace gocom::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be >= 1");
}

void ReplayBuffer::push(const Transition& t) {
    if (t.x.shape() != t.next_x.shape()) throw ShapeError("replay", "x and next_x shapes differ");
    if (size_ == 0 && slots_.empty()) {
        obs_shape_ = t.x.shape();
        w_shape_ = t.w.shape();
    } else if (t.x.shape() != obs_shape_ || t.w.shape() != w_shape_) {
        throw ShapeError("replay", "transition shape changed: " + shape_str(t.x.shape()));
    }
    Slot s;
    s.x.assign(t.x.data().begin(), t.x.data().end());
    s.next_x.assign(t.next_x.data().begin(), t.next_x.data().end());
    s.w.assign(t.w.data().begin(), t.w.data().end());
    s.action = t.action;
    s.raw_reward = t.raw_reward;
    s.reward = t.reward;
    s.done = t.done;
    if (slots_.size() < capacity_) {
        slots_.push_back(std::move(s));
    } else {
        slots_[cursor_] = std::move(s);
    }
    cursor_ = (cursor_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::at(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("replay index out of range");
    const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
    const Slot& s = slots_[(oldest + i) % capacity_];
    Transition t;
    t.x = Tensor(obs_shape_, std::vector<double>(s.x.begin(), s.x.end()));
    t.next_x = Tensor(obs_shape_, std::vector<double>(s.next_x.begin(), s.next_x.end()));
    t.w = Tensor(w_shape_, s.w);
    t.action = s.action;
    t.raw_reward = s.raw_reward;
    t.reward = s.reward;
    t.done = s.done;
    return t;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t m, Rng& rng) const {
    if (m == 0) throw std::invalid_argument("replay sample size must be >= 1");
    if (size_ < m) throw std::logic_error("replay holds fewer transitions than the batch size");
    std::uniform_int_distribution<std::size_t> d(0, size_ - 1);
    std::vector<std::size_t> idx(m);
    for (auto& i : idx) i = d(rng);
    return idx;
}

Batch ReplayBuffer::gather(std::span<const std::size_t> indices) const {
    if (indices.empty()) throw std::invalid_argument("replay gather needs indices");
    const std::size_t per = numel(obs_shape_);
    Shape bs{indices.size()};
    bs.insert(bs.end(), obs_shape_.begin(), obs_shape_.end());
    Batch b;
    b.x = Tensor(bs);
    b.next_x = Tensor(bs);
    auto xd = b.x.data();
    auto nd = b.next_x.data();
    const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        if (indices[k] >= size_) throw std::out_of_range("replay index out of range");
        const Slot& s = slots_[(oldest + indices[k]) % capacity_];
        std::copy(s.x.begin(), s.x.end(), xd.begin() + k * per);
        std::copy(s.next_x.begin(), s.next_x.end(), nd.begin() + k * per);
        b.actions.push_back(s.action);
        b.rewards.push_back(s.reward);
        b.done.push_back(s.done ? 1.0 : 0.0);
    }
    return b;
}

Agent::Output Agent::forward(Tape& tape, Var x, channel::Kind kind, const channel::Snr& snr, Rng& rng,
                             bool trainable) {
    if (!has_channel()) return {qnet.forward(tape, x, trainable), x};
    if (!demapper) throw std::logic_error("agent has an encoder but no demapper");
    auto c = models::compose(tape, *goe, kind, snr, *demapper, qnet, x, rng, trainable);
    return {c.y_hat, c.w};
}

double epsilon_at(const DqnConfig& cfg, std::size_t step) {
    if (cfg.eps_decay_steps == 0 || step >= cfg.eps_decay_steps) return cfg.eps_end;
    const double f = static_cast<double>(step) / static_cast<double>(cfg.eps_decay_steps);
    return cfg.eps_start + f * (cfg.eps_end - cfg.eps_start);
}

std::size_t epsilon_greedy(std::span<const double> q, double eps, Rng& rng) {
    if (q.empty()) throw std::invalid_argument("epsilon_greedy: no actions");
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < eps) {
        std::uniform_int_distribution<std::size_t> d(0, q.size() - 1);
        return d(rng);
    }
    return objective::argmax(q);
}

ActionChoice select_action(Agent& agent, const Tensor& obs, double eps, channel::Kind kind,
                           const channel::Snr& snr, Rng& rng) {
    Shape bs{1};
    bs.insert(bs.end(), obs.shape().begin(), obs.shape().end());
    Tape tape;
    auto out = agent.forward(tape, tape.constant(obs.reshaped(bs)), kind, snr, rng, false);
    ActionChoice c;
    c.q = out.q.value().reshaped({out.q.value().size()});
    c.w = out.w.value().reshaped(obs.shape());
    c.action = epsilon_greedy(c.q.data(), eps, rng);
    return c;
}

std::vector<double> td_targets(const Tensor& q_next, std::span<const double> rewards,
                               std::span<const double> done, double gamma) {
    if (q_next.rank() != 2 || q_next.dim(0) != rewards.size() || rewards.size() != done.size()) {
        throw ShapeError("td_targets", shape_str(q_next.shape()) + " with " +
                                           std::to_string(rewards.size()) + " rewards");
    }
    const std::size_t a = q_next.dim(1);
    auto qd = q_next.data();
    std::vector<double> y(rewards.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double best = *std::max_element(qd.begin() + i * a, qd.begin() + (i + 1) * a);
        y[i] = rewards[i] + gamma * best * (1.0 - done[i]);
    }
    return y;
}

namespace {

std::vector<ParamSet*> param_sets(Agent& a) {
    std::vector<ParamSet*> out;
    if (a.goe) out.push_back(&a.goe->net.params());
    if (a.demapper) out.push_back(&a.demapper->net.params());
    out.push_back(&a.qnet.net.params());
    return out;
}

std::vector<const ParamSet*> param_sets(const Agent& a) {
    std::vector<const ParamSet*> out;
    if (a.goe) out.push_back(&a.goe->net.params());
    if (a.demapper) out.push_back(&a.demapper->net.params());
    out.push_back(&a.qnet.net.params());
    return out;
}

}  // namespace

double dqn_step(Agent& online, Agent& target, const Batch& batch, const DqnConfig& cfg, Rng& rng) {
    std::vector<double> y;
    {
        Tape tape;
        auto out = target.forward(tape, tape.constant(batch.next_x), cfg.channel, cfg.train_snr, rng, false);
        y = td_targets(out.q.value(), batch.rewards, batch.done, cfg.gamma);
    }
    Tape tape;
    auto out = online.forward(tape, tape.constant(batch.x), cfg.channel, cfg.train_snr, rng, true);
    Var q_sa = gather_cols(out.q, batch.actions);
    const std::size_t m = y.size();
    Var loss = huber(q_sa, tape.constant(Tensor({m}, std::move(y))), cfg.huber_delta);
    tape.backward(loss);
    if (online.goe) opt_step(online.goe->net.params(), cfg.opt);
    if (online.demapper) opt_step(online.demapper->net.params(), cfg.opt);
    if (!online.qnet.frozen) opt_step(online.qnet.net.params(), cfg.opt);
    return loss.value().item();
}

void sync_target(const Agent& online, Agent& target) {
    auto src = param_sets(online);
    auto dst = param_sets(target);
    if (src.size() != dst.size()) throw std::logic_error("sync_target: agents differ in structure");
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->assign_values(*src[i]);
}

bool params_bit_equal(const Agent& a, const Agent& b) {
    auto pa = param_sets(a);
    auto pb = param_sets(b);
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!pa[i]->values_bit_equal(*pb[i])) return false;
    }
    return true;
}

RlLog train_rl(Agent& online, env::Environment& env, const DqnConfig& cfg, const RlHooks& hooks) {
    objective::check_alpha(cfg.alpha);
    if (cfg.train_every == 0 || cfg.sync_every == 0) throw std::invalid_argument("train_every and sync_every must be >= 1");
    online.qnet.frozen = online.qnet.frozen || cfg.freeze_task;

    Agent target = online;
    ReplayBuffer replay(cfg.capacity);
    Rng act_rng(derive_seed(cfg.seed, 0xac7));
    Rng learn_rng(derive_seed(cfg.seed, 0x1ea));
    RlLog log;

    std::size_t episode = 0;
    Tensor obs = env.reset(derive_seed(cfg.seed, 0xe9, episode));
    double ep_raw = 0.0, ep_mod = 0.0;
    for (std::size_t step = 0; step < cfg.total_steps; ++step) {
        auto choice = select_action(online, obs, epsilon_at(cfg, step), cfg.channel, cfg.train_snr, act_rng);
        auto res = env.step(choice.action);

        Transition t;
        t.action = choice.action;
        t.raw_reward = res.reward;
        t.reward = objective::modified_reward(res.reward, obs, choice.w, cfg.alpha);
        t.done = res.done;
        t.x = std::move(obs);
        t.w = std::move(choice.w);
        t.next_x = res.observation;
        replay.push(t);
        if (hooks.on_store) hooks.on_store(t);
        ep_raw += t.raw_reward;
        ep_mod += t.reward;

        if (res.done) {
            if (hooks.on_episode) hooks.on_episode(episode, ep_raw, ep_mod);
            log.episode_raw_reward.push_back(ep_raw);
            log.episode_modified_reward.push_back(ep_mod);
            ep_raw = ep_mod = 0.0;
            obs = env.reset(derive_seed(cfg.seed, 0xe9, ++episode));
        } else {
            obs = std::move(res.observation);
        }

        const std::size_t done_steps = step + 1;
        if (done_steps >= cfg.learn_start && replay.size() >= cfg.batch && done_steps % cfg.train_every == 0) {
            log.td_loss.push_back(dqn_step(online, target, replay.sample(cfg.batch, learn_rng), cfg, learn_rng));
            ++log.updates;
        }
        if (done_steps % cfg.sync_every == 0) {
            sync_target(online, target);
            ++log.syncs;
            if (hooks.on_sync) hooks.on_sync(online, target, done_steps);
        }
    }
    return log;
}

std::vector<double> warm_start_codec(Agent& agent, env::Environment& env, const WarmStartConfig& ws,
                                     channel::Kind kind, const channel::Snr& snr) {
    if (!agent.has_channel() || !agent.demapper) throw std::logic_error("warm start needs an encoder and a demapper");
    std::vector<double> losses;
    if (ws.steps == 0) return losses;
    if (ws.observations == 0 || ws.batch == 0) throw std::invalid_argument("warm start needs observations and a batch size");

    Rng rng(derive_seed(ws.seed, 0x3a5));
    std::uniform_int_distribution<std::size_t> act(0, env.action_count() - 1);
    std::vector<Tensor> pool;
    pool.reserve(ws.observations);
    std::size_t episode = 0;
    Tensor obs = env.reset(derive_seed(ws.seed, 0x3a6, episode));
    while (pool.size() < ws.observations) {
        pool.push_back(obs);
        auto res = env.step(act(rng));
        obs = res.done ? env.reset(derive_seed(ws.seed, 0x3a6, ++episode)) : std::move(res.observation);
    }

    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<Tensor> batch(ws.batch);
    for (std::size_t step = 0; step < ws.steps; ++step) {
        for (auto& b : batch) b = pool[pick(rng)];
        Tape tape;
        Var x = tape.constant(stack(batch));
        Var z = agent.goe->encode(tape, x, snr, true);
        Var w = agent.demapper->demap(tape, channel::transmit(z, kind, snr, rng), snr, true);
        Var loss = objective::comm_loss(x, w);
        tape.backward(loss);
        opt_step(agent.goe->net.params(), ws.opt);
        opt_step(agent.demapper->net.params(), ws.opt);
        losses.push_back(loss.value().item());
    }
    return losses;
}

namespace {

EvalResult summarize(std::vector<double> rewards) {
    const auto ms = mean_std(rewards);
    return {ms.mean, ms.std, std::move(rewards)};
}

template <typename Policy>
EvalResult run_episodes(env::Environment& env, std::size_t episodes, std::uint64_t seed, Policy&& policy) {
    if (episodes == 0) throw std::invalid_argument("evaluation needs at least one episode");
    std::vector<double> rewards;
    rewards.reserve(episodes);
    for (std::size_t e = 0; e < episodes; ++e) {
        Tensor obs = env.reset(derive_seed(seed, 0xe7a1, e));
        double total = 0.0;
        for (;;) {
            auto res = env.step(policy(obs));
            total += res.reward;
            if (res.done) break;
            obs = std::move(res.observation);
        }
        rewards.push_back(total);
    }
    return summarize(std::move(rewards));
}

}  // namespace

EvalResult eval_policy(Agent& agent, env::Environment& env, channel::Kind kind, const channel::Snr& snr,
                       std::size_t episodes, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xc4a));
    return run_episodes(env, episodes, seed, [&](const Tensor& obs) {
        return select_action(agent, obs, 0.0, kind, snr, rng).action;
    });
}

EvalResult eval_random(env::Environment& env, std::size_t episodes, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x7a9d));
    std::uniform_int_distribution<std::size_t> d(0, env.action_count() - 1);
    return run_episodes(env, episodes, seed, [&](const Tensor&) { return d(rng); });
}

EvalResult eval_scripted(env::CatchEnv& env, std::size_t episodes, std::uint64_t seed) {
    return run_episodes(env, episodes, seed, [&](const Tensor&) { return env::scripted_action(env); });
}

}  // namespace gocom::rl
