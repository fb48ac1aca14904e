#pragma once

#include <string_view>

#include "gocom/params.hpp"

namespace gocom {

enum class OptRule { sgd, adam };

OptRule parse_opt_rule(std::string_view s);

struct OptimizerConfig {
    OptRule rule = OptRule::adam;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Applies one update from the populated gradients, then zeroes them.
/// Throws std::invalid_argument when lr <= 0.
void opt_step(ParamSet& params, const OptimizerConfig& cfg);

}  // namespace gocom
