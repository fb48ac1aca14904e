#include "gocom/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gocom {
namespace {

double evaluate(const std::function<Var(Tape&, std::span<const Var>)>& fn,
                std::span<const Tensor> point) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : point) vars.push_back(tape.constant(t));
    return fn(tape, vars).value().item();
}

}  // namespace

double finite_diff_check(const std::function<Var(Tape&, std::span<const Var>)>& fn,
                         std::span<const Tensor> point, double step, std::size_t coords,
                         std::uint64_t seed) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : point) vars.push_back(tape.input(t));
    Var root = fn(tape, vars);
    tape.backward(root);

    std::vector<Tensor> work(point.begin(), point.end());
    Rng rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < work.size(); ++k) {
        const Tensor& analytic = tape.grad(vars[k]);
        std::vector<std::size_t> idx(work[k].size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (coords && coords < idx.size()) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(coords);
        }
        for (auto i : idx) {
            const double orig = work[k][i];
            work[k][i] = orig + step;
            const double up = evaluate(fn, work);
            work[k][i] = orig - step;
            const double down = evaluate(fn, work);
            work[k][i] = orig;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[i];
            worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
        }
    }
    return worst;
}

double finite_diff_check(Prim prim, std::span<const Tensor> point, const PrimAttrs& attrs,
                         double step) {
    // Probe the output shape once to build the projection.
    Tape probe;
    std::vector<Var> pv;
    for (const auto& t : point) pv.push_back(probe.constant(t));
    const Shape out_shape = forward_primitive(prim, pv, attrs).shape();
    Rng rng(0x5eed);
    const Tensor proj = randn(out_shape, rng);
    const bool scalar_out = numel(out_shape) == 1;

    auto fn = [&](Tape& t, std::span<const Var> in) {
        Var out = forward_primitive(prim, in, attrs);
        if (scalar_out) return out;
        return mean(mul(out, t.constant(proj)));
    };
    return finite_diff_check(fn, point, step);
}

}  // namespace gocom
