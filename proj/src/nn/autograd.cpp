#include "redmotion/nn/autograd.hpp"

#include <stdexcept>

namespace redmotion::nn {

Var Tape::constant(Tensor value) { return record(std::move(value), false, {}); }

Var Tape::input(Tensor value)
{
    nodes_.push_back(Node{std::move(value), {}, true, {}});
    return Var{this, nodes_.size() - 1};
}

Var Tape::param(ParamId id)
{
    if (params_ == nullptr) throw std::logic_error("tape: no parameter store attached");
    if (auto it = param_nodes_.find(id.index); it != param_nodes_.end()) return Var{this, it->second};
    nodes_.push_back(Node{params_->value(id), {}, true, {}});
    const std::size_t node = nodes_.size() - 1;
    param_nodes_.emplace(id.index, node);
    return Var{this, node};
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward)
{
    nodes_.push_back(Node{std::move(value), {}, requires_grad, requires_grad ? std::move(backward) : BackwardFn{}});
    return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_ref(Var v)
{
    Node& node = nodes_[v.id];
    if (node.grad.empty() && !node.value.empty()) node.grad = Tensor(node.value.rows, node.value.cols);
    if (node.grad.rows != node.value.rows) node.grad = Tensor(node.value.rows, node.value.cols);
    return node.grad;
}

Tensor Tape::grad(Var v) const
{
    const Node& node = nodes_[v.id];
    if (node.grad.rows == node.value.rows && node.grad.cols == node.value.cols && !node.grad.data.empty()) return node.grad;
    return Tensor(node.value.rows, node.value.cols);
}

void Tape::backward(Var scalar_output)
{
    const Tensor& out = value(scalar_output);
    if (out.rows != 1 || out.cols != 1) {
        throw std::invalid_argument("backward: output must be a scalar, got " + out.shape_string());
    }
    Tensor seed(1, 1, {1.0});
    backward(std::span<const Var>(&scalar_output, 1), std::span<const Tensor>(&seed, 1));
}

void Tape::backward(std::span<const Var> outputs, std::span<const Tensor> seeds)
{
    if (outputs.size() != seeds.size()) throw std::invalid_argument("backward: one seed per output required");
    std::size_t last = 0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (!value(outputs[i]).same_shape(seeds[i])) {
            throw std::invalid_argument("backward: seed shape " + seeds[i].shape_string() + " does not match output " +
                                        value(outputs[i]).shape_string());
        }
        if (!requires_grad(outputs[i])) continue;
        Tensor& g = grad_ref(outputs[i]);
        for (std::size_t k = 0; k < g.size(); ++k) g.data[k] += seeds[i].data[k];
        last = std::max(last, outputs[i].id + 1);
    }
    sweep(last);
}

void Tape::sweep(std::size_t from)
{
    for (std::size_t id = from; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.backward || node.grad.empty()) continue;
        node.backward(*this, node.grad);
    }
}

std::vector<std::pair<ParamId, Tensor>> Tape::param_grads() const
{
    std::vector<std::pair<ParamId, Tensor>> out;
    out.reserve(param_nodes_.size());
    for (const auto& [index, node] : param_nodes_) {
        out.emplace_back(ParamId{index}, grad(Var{const_cast<Tape*>(this), node}));
    }
    return out;
}

}  // namespace redmotion::nn
