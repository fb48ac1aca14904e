#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "gocom/tape.hpp"

namespace gocom {

// Differentiable primitives. Batched tensors put the sample axis first;
// images are [N, C, H, W].

Var matmul(Var a, Var b);  // [M,K] x [K,N] -> [M,N]

struct ConvAttrs {
    std::size_t stride = 1;  // one of 1, 2, 4
    std::size_t padding = 0;
    std::size_t output_padding = 0;  // transposed conv only, < stride
};

/// x [N,C,H,W], w [O,C,k,k] -> [N,O,Ho,Wo], zero padding.
Var conv2d(Var x, Var w, ConvAttrs attrs);
/// x [N,C,H,W], w [C,O,k,k] -> [N,O,(H-1)s-2p+k+op, ...]. Adjoint of conv2d.
Var conv2d_transpose(Var x, Var w, ConvAttrs attrs);

/// Adds b [C] along axis 1 of x [N,C,...].
Var add_bias(Var x, Var b);
Var relu(Var x);
/// Per-channel leaky slope (axis 1) for negative inputs.
Var prelu(Var x, Var slope);
Var sigmoid(Var x);
Var reshape(Var x, Shape shape);
/// [N, ...] -> [N, prod(...)].
Var flatten(Var x);
/// Mean of all elements -> [1].
Var mean(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double k);

/// Mean over the batch of -log softmax(logits)[label]. logits [N,C].
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);
/// Mean squared error over all elements -> [1].
Var mse(Var a, Var b);
/// Mean Huber loss of (a - b) with threshold delta -> [1].
Var huber(Var a, Var b, double delta);

/// [N,C,H,W] -> [N,C] spatial mean.
Var channel_mean(Var x);
/// [N,p] ++ [N,q] -> [N,p+q].
Var concat_cols(Var a, Var b);
/// x [N,C,...] scaled per (sample, channel) by s [N,C].
Var mul_channel(Var x, Var s);
/// x [N,A] -> [N] picking column idx[n] of each row.
Var gather_cols(Var x, std::span<const std::size_t> idx);
/// Each row of x [N, 2s] divided by sqrt of its mean complex-symbol power.
Var normalize_power(Var x);

// Generic dispatch by primitive id, used by the gradient checker.

enum class Prim {
    matmul,
    conv2d,
    conv2d_transpose,
    add_bias,
    relu,
    prelu,
    sigmoid,
    reshape,
    flatten,
    mean,
    add,
    sub,
    mul,
    scale,
    softmax_cross_entropy,
    mse,
    huber,
    channel_mean,
    concat_cols,
    mul_channel,
    gather_cols,
    normalize_power,
};

std::string_view prim_name(Prim p);
std::span<const Prim> all_prims();

struct PrimAttrs {
    ConvAttrs conv{};
    double factor = 1.0;  // scale
    double delta = 1.0;   // huber
    Shape shape{};        // reshape
    std::vector<std::size_t> indices{};  // labels / gather columns
};

Var forward_primitive(Prim prim, std::span<const Var> inputs, const PrimAttrs& attrs = {});

}  // namespace gocom
