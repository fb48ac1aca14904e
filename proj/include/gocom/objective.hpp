#pragma once

#include <cstddef>
#include <span>

#include "gocom/ops.hpp"

namespace gocom::objective {

enum class TaskLoss { cross_entropy, negated_reward };

struct ObjectiveConfig {
    double alpha = 0.1;
    TaskLoss task_loss = TaskLoss::cross_entropy;
};

void check_alpha(double alpha);

/// (1 - alpha) * l_task + alpha * l_comm.
double combined_loss(double l_task, double l_comm, double alpha);
Var combined_loss(Var l_task, Var l_comm, double alpha);

/// Mean squared error between source and demapped signal.
double comm_loss(const Tensor& x, const Tensor& w);
Var comm_loss(Var x, Var w);

/// 10 log10(max^2 / mse). Throws std::domain_error("infinite PSNR") when mse == 0.
double psnr(const Tensor& x, const Tensor& x_hat, double max_val);
double psnr_from_mse(double mse, double max_val);

/// Reward to maximize: (1 - alpha) R - alpha * comm_loss(x, w). This is the
/// negation of the loss-convention per-step objective
/// -(1 - alpha) R + alpha * comm_loss(x, w).
double modified_reward(double reward, const Tensor& x, const Tensor& w, double alpha);
double modified_reward_from_loss(double reward, double l_comm, double alpha);
/// The loss-convention value that modified_reward negates.
double step_objective(double reward, double l_comm, double alpha);

/// sum_t gamma^t r_t.
double discounted_return(std::span<const double> rewards, double gamma);

/// Index of the row maximum; ties go to the lowest index.
std::size_t argmax(std::span<const double> row);

/// Fraction of rows of logits [N,C] whose argmax equals the label.
double accuracy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace gocom::objective
