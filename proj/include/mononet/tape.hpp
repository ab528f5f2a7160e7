#pragma once

#include <cstdint>
#include <vector>

#include "mononet/tensor.hpp"

namespace mononet {

// Geometry for unrolling image patches into rows (single channel, valid
// padding). out_h/out_w are derived on construction.
struct Im2colGeom {
    std::size_t batch = 0;
    std::size_t in_h = 0, in_w = 0;
    std::size_t kh = 0, kw = 0;
    std::size_t stride = 1;
    std::size_t out_h = 0, out_w = 0;

    Im2colGeom() = default;
    Im2colGeom(std::size_t batch_, std::size_t in_h_, std::size_t in_w_, std::size_t kh_,
               std::size_t kw_, std::size_t stride_);
    std::size_t positions() const { return out_h * out_w; }
};

// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so a
// node's inputs always have smaller ids; the reverse pass walks ids backward.
class Tape {
public:
    using NodeId = int;

    enum class Op : std::uint8_t {
        Constant,
        Param,
        Matmul,
        Add,
        AddRow,
        Mul,
        MulRow,
        Neg,
        Exp,
        Tanh,
        Relu,
        Sigmoid,
        Sum,
        Mean,
        BceLogits,
        SoftmaxCe,
        Im2col,
        MaxPoolRows,
    };

    struct Node {
        Op op;
        NodeId a = -1;
        NodeId b = -1;
        Tensor value;
        std::vector<int> labels;   // BceLogits / SoftmaxCe targets
        std::vector<int> argmax;   // MaxPoolRows winning input row per output cell
        std::size_t group = 0;     // MaxPoolRows rows per group
        Im2colGeom geom;           // Im2col
    };

    // Gradient tensors for the tape's parameter nodes, in registration order.
    // Parameters the loss does not reach get zero tensors.
    struct Gradients {
        std::vector<NodeId> param_ids;
        std::vector<Tensor> grads;
        const Tensor& for_param(NodeId id) const;
    };

    NodeId constant(Tensor v);
    NodeId param(Tensor v);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    // Broadcast-add a length-C vector to every row of an [R x C] matrix.
    NodeId add_rowvec(NodeId m, NodeId v);
    NodeId mul(NodeId a, NodeId b);
    // Broadcast-multiply every row of an [R x C] matrix by a length-C vector.
    NodeId mul_rowvec(NodeId m, NodeId v);
    NodeId neg(NodeId a);
    NodeId exp(NodeId a);
    NodeId tanh(NodeId a);
    NodeId relu(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);

    // Mean binary cross-entropy over logits (one logit per sample, labels in
    // {0,1}); computed in the numerically stable softplus form.
    NodeId bce_with_logits(NodeId logits, std::vector<int> labels);
    // Mean softmax cross-entropy over [B x C] logits with integer class labels.
    NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels);

    // Unroll an image batch [B x H*W] into patch rows [B*P x kh*kw].
    NodeId im2col(NodeId images, const Im2colGeom& geom);
    // Column-wise max over consecutive groups of `group` rows:
    // [G*group x C] -> [G x C]. Ties take the earliest row.
    NodeId maxpool_rows(NodeId m, std::size_t group);

    const Tensor& value(NodeId id) const;
    const Node& node(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }
    const std::vector<NodeId>& param_ids() const { return params_; }

    // Reverse pass from a scalar loss node.
    Gradients gradients(NodeId loss) const;

    // Recompute every derived node from the leaves and compare with the cached
    // values; true iff every tensor matches bit-for-bit.
    bool replay_matches() const;

private:
    NodeId push(Node n);
    Tensor compute(const Node& n) const;

    std::vector<Node> nodes_;
    std::vector<NodeId> params_;
};

} // namespace mononet
