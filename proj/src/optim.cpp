#include "gocom/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gocom {

OptRule parse_opt_rule(std::string_view s) {
    if (s == "sgd") return OptRule::sgd;
    if (s == "adam") return OptRule::adam;
    throw std::invalid_argument("unknown optimizer rule: " + std::string(s));
}

void opt_step(ParamSet& params, const OptimizerConfig& cfg) {
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (cfg.rule == OptRule::sgd) {
        for (auto& [_, p] : params) {
            auto v = p.value.data();
            auto g = p.grad.data();
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= cfg.lr * g[i];
        }
    } else {
        const auto t = params.adam_steps() + 1;
        params.set_adam_steps(t);
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (auto& [_, p] : params) {
            auto v = p.value.data();
            auto g = p.grad.data();
            auto m = p.m.data();
            auto s = p.v.data();
            for (std::size_t i = 0; i < v.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                s[i] = cfg.beta2 * s[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                v[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(s[i] / c2) + cfg.eps);
            }
        }
    }
    params.zero_grad();
}

}  // namespace gocom
