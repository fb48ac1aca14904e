#include "gocom/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gocom::objective {

void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("alpha must lie in [0,1], got " + std::to_string(alpha));
    }
}

double combined_loss(double l_task, double l_comm, double alpha) {
    check_alpha(alpha);
    return (1.0 - alpha) * l_task + alpha * l_comm;
}

Var combined_loss(Var l_task, Var l_comm, double alpha) {
    check_alpha(alpha);
    return add(scale(l_task, 1.0 - alpha), scale(l_comm, alpha));
}

double comm_loss(const Tensor& x, const Tensor& w) {
    if (x.shape() != w.shape()) {
        throw ShapeError("comm_loss", shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - w[i]) * (x[i] - w[i]);
    return acc / static_cast<double>(x.size());
}

Var comm_loss(Var x, Var w) { return mse(w, x); }

double psnr_from_mse(double mse_value, double max_val) {
    if (mse_value == 0.0) throw std::domain_error("infinite PSNR");
    return 10.0 * std::log10(max_val * max_val / mse_value);
}

double psnr(const Tensor& x, const Tensor& x_hat, double max_val) {
    return psnr_from_mse(comm_loss(x, x_hat), max_val);
}

double modified_reward_from_loss(double reward, double l_comm, double alpha) {
    check_alpha(alpha);
    return (1.0 - alpha) * reward - alpha * l_comm;
}

double modified_reward(double reward, const Tensor& x, const Tensor& w, double alpha) {
    return modified_reward_from_loss(reward, comm_loss(x, w), alpha);
}

double step_objective(double reward, double l_comm, double alpha) {
    check_alpha(alpha);
    return -(1.0 - alpha) * reward + alpha * l_comm;
}

double discounted_return(std::span<const double> rewards, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0,1]");
    double acc = 0.0;
    double w = 1.0;
    for (double r : rewards) {
        acc += w * r;
        w *= gamma;
    }
    return acc;
}

std::size_t argmax(std::span<const double> row) {
    if (row.empty()) throw std::invalid_argument("argmax of empty row");
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

double accuracy(const Tensor& logits, std::span<const std::size_t> labels) {
    if (labels.empty()) throw std::invalid_argument("accuracy of empty batch");
    if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
        throw ShapeError("accuracy", shape_str(logits.shape()) + " with " +
                                         std::to_string(labels.size()) + " labels");
    }
    const std::size_t c = logits.dim(1);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (argmax(logits.data().subspan(r * c, c)) == labels[r]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace gocom::objective
