#include "gocom/catch_env.hpp"

#include <algorithm>
#include <stdexcept>

namespace gocom::env {

CatchEnv::CatchEnv(std::uint64_t seed) : rng_(seed) {}

Tensor CatchEnv::reset(std::uint64_t seed) {
    rng_.seed(seed);
    return reset();
}

Tensor CatchEnv::reset() {
    paddle_ = kWidth / 2;
    balls_left_ = kBallsPerEpisode;
    done_ = false;
    for (auto& f : frames_) f.fill(0.0);
    spawn_ball();
    push_frame();
    return observation();
}

void CatchEnv::spawn_ball() {
    std::uniform_int_distribution<std::size_t> col(0, kWidth - 1);
    ball_row_ = 0;
    ball_col_ = col(rng_);
}

void CatchEnv::push_frame() {
    std::rotate(frames_.begin(), frames_.begin() + 1, frames_.end());
    auto& f = frames_.back();
    f.fill(0.0);
    f[ball_row_ * kWidth + ball_col_] = 1.0;
    for (std::size_t c = paddle_ - 1; c <= paddle_ + 1; ++c) f[(kHeight - 1) * kWidth + c] = 1.0;
}

StepResult CatchEnv::step(std::size_t action) {
    if (done_) throw std::logic_error("catch: step after episode end; call reset()");
    if (action >= kActions) throw std::invalid_argument("catch: action out of range");
    if (action == 0 && paddle_ > 1) --paddle_;
    if (action == 2 && paddle_ < kWidth - 2) ++paddle_;

    StepResult r;
    ++ball_row_;
    if (ball_row_ == kHeight - 1) {
        const std::size_t gap = ball_col_ > paddle_ ? ball_col_ - paddle_ : paddle_ - ball_col_;
        r.reward = gap <= 1 ? 1.0 : 0.0;
        if (--balls_left_ == 0) {
            done_ = true;
        } else {
            spawn_ball();
        }
    }
    if (!done_) push_frame();
    r.done = done_;
    r.observation = observation();
    return r;
}

void CatchEnv::set_state(std::size_t ball_row, std::size_t ball_col, std::size_t paddle) {
    if (ball_row >= kHeight - 1 || ball_col >= kWidth) throw std::invalid_argument("catch: bad ball position");
    ball_row_ = ball_row;
    ball_col_ = ball_col;
    paddle_ = std::clamp<std::size_t>(paddle, 1, kWidth - 2);
    done_ = false;
    frames_.back().fill(0.0);
    auto& f = frames_.back();
    f[ball_row_ * kWidth + ball_col_] = 1.0;
    for (std::size_t c = paddle_ - 1; c <= paddle_ + 1; ++c) f[(kHeight - 1) * kWidth + c] = 1.0;
}

Tensor CatchEnv::observation() const {
    std::vector<double> data;
    data.reserve(kFrames * kHeight * kWidth);
    for (const auto& f : frames_) data.insert(data.end(), f.begin(), f.end());
    return Tensor({kFrames, kHeight, kWidth}, std::move(data));
}

std::size_t scripted_action(const CatchEnv& env) {
    const std::size_t target = std::clamp<std::size_t>(env.ball_col(), 1, CatchEnv::kWidth - 2);
    if (env.paddle() > target) return 0;
    if (env.paddle() < target) return 2;
    return 1;
}

}  // namespace gocom::env
