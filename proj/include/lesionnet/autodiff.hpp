#pragma once

#include <cstdint>
#include <vector>

#include "lesionnet/tensor.hpp"

namespace lesionnet {

/// Records a computation eagerly (values are materialized as nodes are
/// added) and replays it in reverse for gradients. Creation order is a
/// topological order, so backward is a single reverse sweep.
///
/// Nodes that cannot reach a trainable leaf are skipped during backward;
/// freezing parameters therefore also prunes the gradient work below them.
///
/// A graph belongs to one training step and one thread.
class Graph {
public:
    using NodeId = std::int32_t;

    /// Non-differentiable leaf (network inputs).
    NodeId input(Tensor value);

    /// Parameter leaf; participates in backward iff trainable.
    NodeId parameter(Tensor value, bool trainable);

    NodeId conv2d(NodeId input, NodeId kernel, NodeId bias);
    NodeId maxpool2(NodeId input);
    NodeId global_avg_pool(NodeId input);
    NodeId dense(NodeId input, NodeId weight, NodeId bias);
    NodeId relu(NodeId input);
    NodeId softmax(NodeId logits);
    NodeId cross_entropy(NodeId probs, int true_class);
    /// Concatenate two vectors.
    NodeId concat(NodeId a, NodeId b);
    /// Elementwise sum of two same-shape tensors.
    NodeId add(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    /// Sum of all elements, in flat row-major order -> scalar.
    NodeId sum(NodeId a);

    const Tensor& value(NodeId id) const;
    double scalar_value(NodeId id) const;
    bool requires_grad(NodeId id) const;

    /// Computes gradients of a scalar loss w.r.t. every grad-requiring node.
    /// May be called once per graph.
    void backward(NodeId loss);

    /// Gradient accumulated for a node; valid after backward. Zero tensor if
    /// the node required a gradient but received no contribution.
    const Tensor& grad(NodeId id) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        kInput,
        kParameter,
        kConv2d,
        kMaxpool2,
        kGlobalAvgPool,
        kDense,
        kRelu,
        kSoftmax,
        kCrossEntropy,
        kConcat,
        kAdd,
        kScale,
        kSum,
    };

    struct Node {
        Op op;
        bool requires_grad = false;
        NodeId in[3] = {-1, -1, -1};
        Tensor value;
        Tensor grad;
        int aux_int = 0;
        double aux_scalar = 0.0;
        std::vector<std::int32_t> aux_idx;
    };

    Node& at(NodeId id);
    const Tensor& in_value(const Node& n, int slot) const;
    NodeId push(Node n);
    Tensor& ensure_grad(NodeId id);
    void backprop_node(Node& n);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

using NodeId = Graph::NodeId;

}  // namespace lesionnet
