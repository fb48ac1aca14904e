#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gocom/ops.hpp"

namespace gocom {

/// Max over all coordinates of |analytic - central difference| / max(1, |analytic|)
/// for `fn` evaluated at `point`. `fn` builds a scalar from the given inputs.
/// `coords` limits the checked coordinates per input (0 = all).
double finite_diff_check(const std::function<Var(Tape&, std::span<const Var>)>& fn,
                         std::span<const Tensor> point, double step = 1e-5,
                         std::size_t coords = 0, std::uint64_t seed = 0);

/// Same check for a single primitive. Non-scalar outputs are reduced to
/// mean(out * R) with a fixed random projection R so every output coordinate
/// contributes. Points on kinks (relu, prelu, huber) must be avoided by the caller.
double finite_diff_check(Prim prim, std::span<const Tensor> point, const PrimAttrs& attrs = {},
                         double step = 1e-5);

}  // namespace gocom
