#pragma once

#include <map>
#include <string>
#include <vector>

#include "stk/tensor.hpp"

namespace stk {

using NodeId = int;
using GradMap = std::map<std::string, Tensor>;

// Named trainable tensors. Order of insertion is preserved so that training
// updates and checkpoints are deterministic.
class ParamSet {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    // Adopts every entry of `other`, prefixing its names.
    void merge(const std::string& prefix, const ParamSet& other);

private:
    std::map<std::string, Tensor> items_;
    std::vector<std::string> order_;
};

// Reverse-mode taped computation graph, rebuilt per training step. Forward
// values are computed eagerly at node creation; backward() fills gradients
// for every Param node reachable from the loss.
class Graph {
public:
    NodeId constant(Tensor t);
    NodeId scalar(double v) { return constant(Tensor::scalar(v)); }
    // Leaf bound to params.at(name); gradient lands in grads()[name].
    NodeId param(const ParamSet& params, const std::string& name);

    NodeId add(NodeId a, NodeId b);  // b may be [1,c] or [1,1] broadcast
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);  // elementwise, same broadcast rule
    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId scale(NodeId a, double c);
    NodeId tanh(NodeId a);
    NodeId relu(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId log(NodeId a);
    NodeId clamp(NodeId a, double lo, double hi);
    NodeId softmax_rows(NodeId a);
    NodeId log_softmax_rows(NodeId a);
    NodeId layer_norm_rows(NodeId a);
    NodeId sum(NodeId a);  // -> [1,1]
    NodeId slice_cols(NodeId a, int start, int len);
    NodeId concat_cols(const std::vector<NodeId>& parts);
    NodeId gather_rows(NodeId table, std::vector<int> ids);
    // out[i,0] = a[i, ids[i]]
    NodeId pick(NodeId a, std::vector<int> ids);
    NodeId stop_gradient(NodeId a);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }

    // Backpropagates from a scalar loss node. Throws ErrKind::Numeric on a
    // non-scalar loss or a NaN appearing in the backward pass.
    void backward(NodeId loss);

    // Gradients accumulated per parameter name by the last backward().
    // Parameters never used in the graph are absent; callers treat absence
    // as a zero gradient.
    const GradMap& grads() const { return grads_; }

    size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        Const, Param, Add, Sub, Mul, MatMul, Transpose, Scale,
        Tanh, Relu, Sigmoid, Log, Clamp, SoftmaxRows, LogSoftmaxRows,
        LayerNormRows, Sum, SliceCols, ConcatCols, GatherRows, Pick, StopGrad
    };
    struct Node {
        Op op;
        std::vector<NodeId> parents;
        Tensor value;
        Tensor grad;
        std::vector<int> ids;
        int i0 = 0, i1 = 0;
        double c0 = 0.0, c1 = 0.0;
        std::string pname;
    };

    NodeId push(Node n);
    static void accumulate_broadcast(Tensor& dst, const Tensor& src);

    std::vector<Node> nodes_;
    GradMap grads_;
};

}  // namespace stk
