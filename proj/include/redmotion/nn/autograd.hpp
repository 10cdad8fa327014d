#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "redmotion/nn/parameters.hpp"
#include "redmotion/nn/tensor.hpp"

namespace redmotion::nn {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    [[nodiscard]] const Tensor& value() const;
    [[nodiscard]] std::size_t rows() const { return value().rows; }
    [[nodiscard]] std::size_t cols() const { return value().cols; }
};

/// Reverse-mode autodiff recorder.
///
/// Nodes are appended in evaluation order, so a reverse sweep over the node
/// list is a valid topological order. Parameters are read from an immutable
/// ParameterStore; their gradients stay on the tape until collected with
/// param_grads(), which lets several tapes share one store across threads.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    explicit Tape(const ParameterStore* params = nullptr) : params_(params) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var input(Tensor value);
    Var param(ParamId id);

    // Internal: record an op result. `requires_grad` nodes need a backward fn.
    Var record(Tensor value, bool requires_grad, BackwardFn backward);

    [[nodiscard]] const Tensor& value(Var v) const { return nodes_[v.id].value; }
    [[nodiscard]] bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    // Gradient accumulator for a node, zero-allocated on first use.
    Tensor& grad_ref(Var v);
    // Copy of the accumulated gradient (zeros if none reached the node).
    [[nodiscard]] Tensor grad(Var v) const;

    void backward(Var scalar_output);
    void backward(std::span<const Var> outputs, std::span<const Tensor> seeds);

    [[nodiscard]] std::vector<std::pair<ParamId, Tensor>> param_grads() const;
    [[nodiscard]] const ParameterStore* params() const noexcept { return params_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    void sweep(std::size_t from);

    const ParameterStore* params_;
    std::deque<Node> nodes_;
    std::map<std::size_t, std::size_t> param_nodes_;  // param index -> node id
};

inline const Tensor& Var::value() const { return tape->value(*this); }

}  // namespace redmotion::nn
