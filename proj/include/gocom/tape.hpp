#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gocom/params.hpp"
#include "gocom/tensor.hpp"

namespace gocom {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// What a primitive's backward rule sees. `in_grads[i]` is null when input i
/// does not require a gradient; otherwise the rule adds into it.
struct BackwardArgs {
    const Tensor& out_value;
    const Tensor& out_grad;
    std::span<const Tensor* const> in_values;
    std::span<Tensor* const> in_grads;
};

using BackwardFn = std::function<void(const BackwardArgs&)>;

/// Linear record of primitive applications for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the node list is already
/// topologically sorted and backward() is a single reverse sweep. A tape is
/// built per forward pass and discarded afterwards.
///
/// Parameter leaves created with param() are bound to a ParamSet entry; after
/// backward() their accumulated gradient is added into that entry's grad slot.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives a gradient.
    Var constant(Tensor value);
    /// Leaf that receives a gradient (read back with grad()).
    Var input(Tensor value);
    /// Parameter leaf. With `trainable` false the value is referenced without
    /// copying and no gradient flows to it.
    Var param(ParamSet& params, const std::string& name, bool trainable = true);
    Var param(const ParamSet& params, const std::string& name);

    /// Appends a primitive result. `backward` may be empty when no input
    /// requires a gradient.
    Var record(std::string_view primitive, Tensor value, std::vector<std::size_t> inputs,
               BackwardFn backward);

    /// Reverse sweep from a scalar root.
    void backward(Var root);

    const Tensor& value(std::size_t id) const;
    /// Gradient of a node after backward(); zeros if it received none.
    const Tensor& grad(Var v);
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    std::string_view primitive(std::size_t id) const { return nodes_.at(id).primitive; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// When on, every recorded value is checked for NaN/Inf.
    void set_check_finite(bool on) noexcept { check_finite_ = on; }

private:
    struct Node {
        std::string_view primitive;
        Tensor value;
        const Tensor* external = nullptr;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
        Param* bound = nullptr;

        const Tensor& val() const { return external ? *external : value; }
    };

    Var push(Node node);
    Tensor& ensure_grad(Node& node);

    std::vector<Node> nodes_;
    bool check_finite_ = false;
};

}  // namespace gocom
