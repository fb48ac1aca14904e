#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gocom/catch_env.hpp"
#include "gocom/models.hpp"
#include "gocom/optim.hpp"

namespace gocom::rl {

/// Experience record extended with the demapper output seen when acting.
/// `reward` is the modified reward actually learned from; `raw_reward` is
/// the environment's reward, kept for logging and auditing.
struct Transition {
    Tensor x;
    std::size_t action = 0;
    Tensor w;
    double raw_reward = 0.0;
    double reward = 0.0;
    Tensor next_x;
    bool done = false;
};

/// Stacked minibatch drawn from a ReplayBuffer.
struct Batch {
    Tensor x;       // [m, obs...]
    Tensor next_x;  // [m, obs...]
    std::vector<std::size_t> actions;
    std::vector<double> rewards;
    std::vector<double> done;  // 1.0 for terminal transitions
};

/// Fixed-capacity FIFO ring of transitions with uniform sampling.
/// Observations are held in single precision (Catch frames are binary, so
/// this is exact); w is held in double so stored rewards can be re-derived
/// bit for bit.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(const Transition& t);
    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return capacity_; }

    /// i-th transition counting from the oldest.
    Transition at(std::size_t i) const;

    /// m indices drawn uniformly with replacement, in storage order.
    /// Throws std::logic_error while fewer than m transitions are stored.
    std::vector<std::size_t> sample_indices(std::size_t m, Rng& rng) const;
    Batch gather(std::span<const std::size_t> indices) const;
    Batch sample(std::size_t m, Rng& rng) const { return gather(sample_indices(m, rng)); }

private:
    struct Slot {
        std::vector<float> x;
        std::vector<float> next_x;
        std::vector<double> w;
        std::size_t action = 0;
        double raw_reward = 0.0;
        double reward = 0.0;
        bool done = false;
    };

    std::size_t capacity_;
    std::size_t size_ = 0;
    std::size_t cursor_ = 0;  // next write slot
    Shape obs_shape_;
    Shape w_shape_;
    std::vector<Slot> slots_;
};

/// Q-function: either the full chain task(demap(channel(encode(x)))) or,
/// without encoder/demapper, the head applied to x directly.
struct Agent {
    std::optional<models::GoeModel> goe;
    std::optional<models::DemapperModel> demapper;
    models::TaskModel qnet;

    bool has_channel() const noexcept { return goe.has_value(); }

    struct Output {
        Var q;  // [N, A]
        Var w;  // [N, obs...]; x itself without a channel
    };

    /// One channel realization per row of x.
    Output forward(Tape& tape, Var x, channel::Kind kind, const channel::Snr& snr, Rng& rng,
                   bool trainable);
};

struct DqnConfig {
    double gamma = 0.99;
    double eps_start = 1.0;
    double eps_end = 0.05;
    std::size_t eps_decay_steps = 50000;
    std::size_t sync_every = 1000;
    std::size_t capacity = 50000;
    std::size_t batch = 32;
    OptimizerConfig opt{OptRule::adam, 1e-4};
    double alpha = 0.0;
    channel::Kind channel = channel::Kind::awgn;
    channel::Snr train_snr = channel::Snr::db(20.0);
    std::size_t total_steps = 200000;
    std::size_t learn_start = 1000;  // env steps before the first update
    std::size_t train_every = 1;     // env steps per gradient update
    double huber_delta = 1.0;
    bool freeze_task = false;
    std::uint64_t seed = 0;
};

/// Linear decay from eps_start to eps_end over eps_decay_steps, then flat.
double epsilon_at(const DqnConfig& cfg, std::size_t step);

struct ActionChoice {
    std::size_t action = 0;
    Tensor q;  // [A]
    Tensor w;  // obs shape
};

/// Computes Q(x, .) through one channel realization, then with probability
/// eps replaces the greedy action by a uniform one. Greedy ties go to the
/// lowest index.
ActionChoice select_action(Agent& agent, const Tensor& obs, double eps, channel::Kind kind,
                           const channel::Snr& snr, Rng& rng);

/// Epsilon-greedy choice from known Q-values.
std::size_t epsilon_greedy(std::span<const double> q, double eps, Rng& rng);

/// TD targets r + gamma * max_a q_next(a) * (1 - done), row-wise.
std::vector<double> td_targets(const Tensor& q_next, std::span<const double> rewards,
                               std::span<const double> done, double gamma);

/// One DQN update of the online agent from a replay minibatch. Target
/// Q-values come from the target agent through its own channel draws; the
/// Huber TD loss is backpropagated through the whole online chain.
double dqn_step(Agent& online, Agent& target, const Batch& batch, const DqnConfig& cfg, Rng& rng);

/// Bitwise copy of every online parameter value into the target.
void sync_target(const Agent& online, Agent& target);
bool params_bit_equal(const Agent& a, const Agent& b);

struct RlHooks {
    std::function<void(const Transition&)> on_store;
    std::function<void(std::size_t episode, double raw_reward, double modified_reward)> on_episode;
    std::function<void(const Agent& online, const Agent& target, std::size_t step)> on_sync;
};

struct RlLog {
    std::vector<double> episode_raw_reward;       // game reward per finished episode
    std::vector<double> episode_modified_reward;  // sum of stored rewards per episode
    std::vector<double> td_loss;
    std::size_t updates = 0;
    std::size_t syncs = 0;
};

/// Interact, store, sample, update, and periodically sync for cfg.total_steps
/// environment steps.
RlLog train_rl(Agent& online, env::Environment& env, const DqnConfig& cfg, const RlHooks& hooks = {});

struct WarmStartConfig {
    std::size_t steps = 0;          // minibatch updates; 0 disables
    std::size_t observations = 5000;  // pool gathered with uniformly random actions
    std::size_t batch = 32;
    OptimizerConfig opt{OptRule::adam, 1e-3};
    std::uint64_t seed = 0;
};

/// Fits the encoder and demapper of `agent` for reconstruction (MSE between
/// w and x) through the channel at the training SNR, using observations from
/// a random policy. The q-network is untouched. Returns the per-step losses.
std::vector<double> warm_start_codec(Agent& agent, env::Environment& env, const WarmStartConfig& ws,
                                     channel::Kind kind, const channel::Snr& snr);

struct EvalResult {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> rewards;
};

/// Greedy (eps = 0) episodes through the channel; raw episode rewards.
EvalResult eval_policy(Agent& agent, env::Environment& env, channel::Kind kind,
                       const channel::Snr& snr, std::size_t episodes, std::uint64_t seed);
/// Uniformly random actions.
EvalResult eval_random(env::Environment& env, std::size_t episodes, std::uint64_t seed);
/// Paddle moves toward the ball every step.
EvalResult eval_scripted(env::CatchEnv& env, std::size_t episodes, std::uint64_t seed);

}  // namespace gocom::rl
