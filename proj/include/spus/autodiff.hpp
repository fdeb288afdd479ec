#pragma once

#include <functional>
#include <vector>

#include "spus/tensor.hpp"

namespace spus {

using NodeId = int;

// Reverse-mode tape over the tensor kernels. Records one topologically
// ordered node per op; backward() walks the record in reverse and
// accumulates gradients into every leaf that requires them.
// Single-owner: a Tape must not be shared across threads.
class Tape {
public:
    NodeId leaf(Tensor4 v, bool requires_grad = false);
    NodeId param(Tensor4 v) { return leaf(std::move(v), true); }

    const Tensor4& value(NodeId id) const { return node(id).value; }
    // Zero tensor if the node never received a gradient.
    Tensor4 grad(NodeId id) const;

    NodeId conv(NodeId x, NodeId weight, NodeId bias, const ConvSpec& spec);
    NodeId conv_transpose(NodeId x, NodeId weight, NodeId bias, const ConvSpec& spec);
    NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, RunningStats& stats, Mode mode);
    NodeId gelu(NodeId x);
    NodeId concat(NodeId a, NodeId b);
    NodeId slice(NodeId x, int c0, int count);
    NodeId add(NodeId a, NodeId b);
    NodeId sum(NodeId x);
    NodeId mse(NodeId pred, NodeId target);

    void backward(NodeId loss);

private:
    struct Node {
        Tensor4 value;
        Tensor4 grad;  // empty until first accumulation
        bool requires_grad = false;
        std::function<void()> back;  // empty for leaves
    };

    Node& node(NodeId id);
    const Node& node(NodeId id) const;
    void accum(NodeId id, const Tensor4& g);
    NodeId push(Node n);

    std::vector<Node> nodes_;
};

// Central finite differences over every scalar of every input versus the
// recorded backward pass. `build` must construct the full forward graph from
// fresh leaves each call (owning any batchnorm state locally) and return the
// scalar loss node. Returns the worst relative discrepancy.
double grad_check(const std::function<NodeId(Tape&, const std::vector<NodeId>&)>& build,
                  const std::vector<Tensor4>& inputs, double step = 1e-5);

}  // namespace spus
