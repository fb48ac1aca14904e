#include "gocom/tape.hpp"

#include <stdexcept>

namespace gocom {

const Tensor& Var::value() const {
    if (!tape) throw std::logic_error("unbound Var");
    return tape->value(id);
}

Var Tape::push(Node node) {
    if (check_finite_ && !node.val().all_finite()) {
        throw std::domain_error("non-finite value produced by " + std::string(node.primitive));
    }
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    Node n;
    n.primitive = "constant";
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::input(Tensor value) {
    Node n;
    n.primitive = "input";
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::param(ParamSet& params, const std::string& name, bool trainable) {
    Param& p = params.at(name);
    Node n;
    n.primitive = "param";
    n.external = &p.value;
    if (trainable) {
        n.requires_grad = true;
        n.bound = &p;
    }
    return push(std::move(n));
}

Var Tape::param(const ParamSet& params, const std::string& name) {
    Node n;
    n.primitive = "param";
    n.external = &params.at(name).value;
    return push(std::move(n));
}

Var Tape::record(std::string_view primitive, Tensor value, std::vector<std::size_t> inputs,
                 BackwardFn backward) {
    Node n;
    n.primitive = primitive;
    n.value = std::move(value);
    for (auto i : inputs) {
        if (i >= nodes_.size()) throw std::logic_error("tape input out of order");
        n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
    }
    n.inputs = std::move(inputs);
    if (n.requires_grad) {
        if (!backward) throw std::logic_error(std::string(primitive) + ": missing backward rule");
        n.backward = std::move(backward);
    }
    return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const { return nodes_.at(id).val(); }

Tensor& Tape::ensure_grad(Node& node) {
    if (node.grad.empty()) node.grad = Tensor(node.val().shape());
    return node.grad;
}

const Tensor& Tape::grad(Var v) { return ensure_grad(nodes_.at(v.id)); }

void Tape::backward(Var root) {
    if (root.tape != this) throw std::logic_error("backward: root belongs to another tape");
    Node& r = nodes_.at(root.id);
    if (r.val().size() != 1) {
        throw ShapeError("backward", "root must be scalar, got " + shape_str(r.val().shape()));
    }
    if (!r.requires_grad) return;
    ensure_grad(r)[0] += 1.0;

    std::vector<const Tensor*> in_values;
    std::vector<Tensor*> in_grads;
    for (std::size_t k = root.id + 1; k-- > 0;) {
        Node& n = nodes_[k];
        if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
        in_values.clear();
        in_grads.clear();
        for (auto i : n.inputs) {
            Node& in = nodes_[i];
            in_values.push_back(&in.val());
            in_grads.push_back(in.requires_grad ? &ensure_grad(in) : nullptr);
        }
        n.backward(BackwardArgs{n.val(), n.grad, in_values, in_grads});
    }

    for (auto& n : nodes_) {
        if (!n.bound || n.grad.empty()) continue;
        auto dst = n.bound->grad.data();
        auto src = n.grad.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
}

}  // namespace gocom
