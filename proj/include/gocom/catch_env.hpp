#pragma once

#include <array>
#include <cstdint>

#include "gocom/tensor.hpp"

namespace gocom::env {

struct StepResult {
    Tensor observation;
    double reward = 0.0;
    bool done = false;
};

/// Seedable episodic environment with a discrete action set.
class Environment {
public:
    virtual ~Environment() = default;

    virtual Tensor reset(std::uint64_t seed) = 0;
    /// Throws std::logic_error after the episode has ended.
    virtual StepResult step(std::size_t action) = 0;
    virtual std::size_t action_count() const = 0;
    virtual Shape observation_shape() const = 0;
};

/// Pixel "Catch": a ball falls one row per step from a random column of the
/// top row; a 3-wide paddle on the bottom row moves left, stays, or moves
/// right. Reaching the bottom row pays +1 if the paddle covers the ball's
/// column, then a new ball spawns. An episode is 10 balls.
///
/// Observations stack the 3 most recent binary frames, oldest first, as
/// [3, 16, 16]; frames before the reset frame are zero.
class CatchEnv final : public Environment {
public:
    static constexpr std::size_t kHeight = 16;
    static constexpr std::size_t kWidth = 16;
    static constexpr std::size_t kFrames = 3;
    static constexpr std::size_t kBallsPerEpisode = 10;
    static constexpr std::size_t kActions = 3;  // 0 left, 1 stay, 2 right
    static constexpr std::size_t kFallSteps = kHeight - 1;

    explicit CatchEnv(std::uint64_t seed = 0);

    Tensor reset(std::uint64_t seed) override;
    Tensor reset();  // continues the current rng stream
    StepResult step(std::size_t action) override;
    std::size_t action_count() const override { return kActions; }
    Shape observation_shape() const override { return {kFrames, kHeight, kWidth}; }

    std::size_t ball_row() const noexcept { return ball_row_; }
    std::size_t ball_col() const noexcept { return ball_col_; }
    std::size_t paddle() const noexcept { return paddle_; }
    std::size_t balls_remaining() const noexcept { return balls_left_; }
    bool done() const noexcept { return done_; }

    /// Test hook: place ball and paddle directly. Paddle is clamped to [1, W-2].
    void set_state(std::size_t ball_row, std::size_t ball_col, std::size_t paddle);

    Tensor observation() const;

private:
    void spawn_ball();
    void push_frame();

    Rng rng_;
    std::size_t ball_row_ = 0;
    std::size_t ball_col_ = 0;
    std::size_t paddle_ = kWidth / 2;
    std::size_t balls_left_ = kBallsPerEpisode;
    bool done_ = true;
    std::array<std::array<double, kHeight * kWidth>, kFrames> frames_{};
};

/// Moves the paddle toward the ball's column.
std::size_t scripted_action(const CatchEnv& env);

}  // namespace gocom::env
