#include "stk/graph.hpp"

#include <algorithm>
#include <cmath>

namespace stk {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
    auto [it, inserted] = items_.emplace(name, std::move(t));
    if (!inserted) throw Error(ErrKind::Config, "duplicate parameter: " + name);
    order_.push_back(name);
    return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
    auto it = items_.find(name);
    if (it == items_.end()) throw Error(ErrKind::Config, "unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = items_.find(name);
    if (it == items_.end()) throw Error(ErrKind::Config, "unknown parameter: " + name);
    return it->second;
}

bool ParamSet::has(const std::string& name) const { return items_.count(name) > 0; }

void ParamSet::merge(const std::string& prefix, const ParamSet& other) {
    for (const auto& n : other.order_) add(prefix + n, other.items_.at(n));
}

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Tensor t) {
    Node n;
    n.op = Op::Const;
    n.value = std::move(t);
    return push(std::move(n));
}

NodeId Graph::param(const ParamSet& params, const std::string& name) {
    Node n;
    n.op = Op::Param;
    n.value = params.at(name);
    n.pname = name;
    return push(std::move(n));
}

static void check_broadcast(const Tensor& a, const Tensor& b) {
    bool ok = a.same_shape(b) || (b.rows() == 1 && b.cols() == a.cols()) ||
              (b.rows() == 1 && b.cols() == 1);
    if (!ok) throw Error(ErrKind::Numeric, "broadcast shape mismatch");
}

static double bcast_at(const Tensor& b, int r, int c) {
    if (b.rows() == 1 && b.cols() == 1) return b[0];
    if (b.rows() == 1) return b.at(0, c);
    return b.at(r, c);
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor &va = nodes_[a].value, &vb = nodes_[b].value;
    check_broadcast(va, vb);
    Node n;
    n.op = Op::Add;
    n.parents = {a, b};
    n.value = Tensor(va.rows(), va.cols());
    for (int r = 0; r < va.rows(); ++r)
        for (int c = 0; c < va.cols(); ++c) n.value.at(r, c) = va.at(r, c) + bcast_at(vb, r, c);
    return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    const Tensor &va = nodes_[a].value, &vb = nodes_[b].value;
    check_broadcast(va, vb);
    Node n;
    n.op = Op::Sub;
    n.parents = {a, b};
    n.value = Tensor(va.rows(), va.cols());
    for (int r = 0; r < va.rows(); ++r)
        for (int c = 0; c < va.cols(); ++c) n.value.at(r, c) = va.at(r, c) - bcast_at(vb, r, c);
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor &va = nodes_[a].value, &vb = nodes_[b].value;
    check_broadcast(va, vb);
    Node n;
    n.op = Op::Mul;
    n.parents = {a, b};
    n.value = Tensor(va.rows(), va.cols());
    for (int r = 0; r < va.rows(); ++r)
        for (int c = 0; c < va.cols(); ++c) n.value.at(r, c) = va.at(r, c) * bcast_at(vb, r, c);
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::MatMul;
    n.parents = {a, b};
    n.value = stk::matmul(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    Node n;
    n.op = Op::Transpose;
    n.parents = {a};
    n.value = nodes_[a].value.transposed();
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
    Node n;
    n.op = Op::Scale;
    n.parents = {a};
    n.c0 = c;
    n.value = nodes_[a].value;
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] *= c;
    return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
    Node n;
    n.op = Op::Tanh;
    n.parents = {a};
    n.value = nodes_[a].value;
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::tanh(n.value[i]);
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    Node n;
    n.op = Op::Relu;
    n.parents = {a};
    n.value = nodes_[a].value;
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::max(0.0, n.value[i]);
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
    Node n;
    n.op = Op::Sigmoid;
    n.parents = {a};
    n.value = nodes_[a].value;
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = 1.0 / (1.0 + std::exp(-n.value[i]));
    return push(std::move(n));
}

NodeId Graph::log(NodeId a) {
    Node n;
    n.op = Op::Log;
    n.parents = {a};
    n.value = nodes_[a].value;
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::log(n.value[i]);
    return push(std::move(n));
}

NodeId Graph::clamp(NodeId a, double lo, double hi) {
    Node n;
    n.op = Op::Clamp;
    n.parents = {a};
    n.c0 = lo;
    n.c1 = hi;
    n.value = nodes_[a].value;
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::clamp(n.value[i], lo, hi);
    return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId a) {
    Node n;
    n.op = Op::SoftmaxRows;
    n.parents = {a};
    n.value = nodes_[a].value;
    for (int r = 0; r < n.value.rows(); ++r) {
        double mx = n.value.at(r, 0);
        for (int c = 1; c < n.value.cols(); ++c) mx = std::max(mx, n.value.at(r, c));
        double z = 0.0;
        for (int c = 0; c < n.value.cols(); ++c) {
            n.value.at(r, c) = std::exp(n.value.at(r, c) - mx);
            z += n.value.at(r, c);
        }
        for (int c = 0; c < n.value.cols(); ++c) n.value.at(r, c) /= z;
    }
    return push(std::move(n));
}

NodeId Graph::log_softmax_rows(NodeId a) {
    Node n;
    n.op = Op::LogSoftmaxRows;
    n.parents = {a};
    n.value = nodes_[a].value;
    for (int r = 0; r < n.value.rows(); ++r) {
        double mx = n.value.at(r, 0);
        for (int c = 1; c < n.value.cols(); ++c) mx = std::max(mx, n.value.at(r, c));
        double z = 0.0;
        for (int c = 0; c < n.value.cols(); ++c) z += std::exp(n.value.at(r, c) - mx);
        double lse = mx + std::log(z);
        for (int c = 0; c < n.value.cols(); ++c) n.value.at(r, c) -= lse;
    }
    return push(std::move(n));
}

static constexpr double kLayerNormEps = 1e-5;

NodeId Graph::layer_norm_rows(NodeId a) {
    Node n;
    n.op = Op::LayerNormRows;
    n.parents = {a};
    const Tensor& x = nodes_[a].value;
    n.value = Tensor(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (int c = 0; c < x.cols(); ++c) mean += x.at(r, c);
        mean /= x.cols();
        double var = 0.0;
        for (int c = 0; c < x.cols(); ++c) var += (x.at(r, c) - mean) * (x.at(r, c) - mean);
        var /= x.cols();
        double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (int c = 0; c < x.cols(); ++c) n.value.at(r, c) = (x.at(r, c) - mean) * inv;
    }
    return push(std::move(n));
}

NodeId Graph::sum(NodeId a) {
    Node n;
    n.op = Op::Sum;
    n.parents = {a};
    double s = 0.0;
    for (size_t i = 0; i < nodes_[a].value.size(); ++i) s += nodes_[a].value[i];
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

NodeId Graph::slice_cols(NodeId a, int start, int len) {
    const Tensor& x = nodes_[a].value;
    if (start < 0 || len <= 0 || start + len > x.cols())
        throw Error(ErrKind::Numeric, "slice_cols out of range");
    Node n;
    n.op = Op::SliceCols;
    n.parents = {a};
    n.i0 = start;
    n.i1 = len;
    n.value = Tensor(x.rows(), len);
    for (int r = 0; r < x.rows(); ++r)
        for (int c = 0; c < len; ++c) n.value.at(r, c) = x.at(r, start + c);
    return push(std::move(n));
}

NodeId Graph::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw Error(ErrKind::Numeric, "concat_cols of nothing");
    int rows = nodes_[parts[0]].value.rows();
    int cols = 0;
    for (NodeId p : parts) {
        if (nodes_[p].value.rows() != rows)
            throw Error(ErrKind::Numeric, "concat_cols row mismatch");
        cols += nodes_[p].value.cols();
    }
    Node n;
    n.op = Op::ConcatCols;
    n.parents = parts;
    n.value = Tensor(rows, cols);
    int off = 0;
    for (NodeId p : parts) {
        const Tensor& x = nodes_[p].value;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < x.cols(); ++c) n.value.at(r, off + c) = x.at(r, c);
        off += x.cols();
    }
    return push(std::move(n));
}

NodeId Graph::gather_rows(NodeId table, std::vector<int> ids) {
    const Tensor& t = nodes_[table].value;
    for (int id : ids)
        if (id < 0 || id >= t.rows()) throw Error(ErrKind::Data, "gather_rows index out of range");
    Node n;
    n.op = Op::GatherRows;
    n.parents = {table};
    n.value = Tensor(static_cast<int>(ids.size()), t.cols());
    for (size_t r = 0; r < ids.size(); ++r)
        for (int c = 0; c < t.cols(); ++c) n.value.at(static_cast<int>(r), c) = t.at(ids[r], c);
    n.ids = std::move(ids);
    return push(std::move(n));
}

NodeId Graph::pick(NodeId a, std::vector<int> ids) {
    const Tensor& x = nodes_[a].value;
    if (static_cast<int>(ids.size()) != x.rows())
        throw Error(ErrKind::Numeric, "pick needs one index per row");
    for (int id : ids)
        if (id < 0 || id >= x.cols()) throw Error(ErrKind::Data, "pick index out of range");
    Node n;
    n.op = Op::Pick;
    n.parents = {a};
    n.value = Tensor(x.rows(), 1);
    for (int r = 0; r < x.rows(); ++r) n.value.at(r, 0) = x.at(r, ids[r]);
    n.ids = std::move(ids);
    return push(std::move(n));
}

NodeId Graph::stop_gradient(NodeId a) {
    Node n;
    n.op = Op::StopGrad;
    n.parents = {a};
    n.value = nodes_[a].value;
    return push(std::move(n));
}

void Graph::accumulate_broadcast(Tensor& dst, const Tensor& src) {
    if (dst.same_shape(src)) {
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    } else if (dst.rows() == 1 && dst.cols() == 1) {
        for (size_t i = 0; i < src.size(); ++i) dst[0] += src[i];
    } else {  // dst is [1,c]
        for (int r = 0; r < src.rows(); ++r)
            for (int c = 0; c < src.cols(); ++c) dst.at(0, c) += src.at(r, c);
    }
}

void Graph::backward(NodeId loss) {
    if (nodes_[loss].value.size() != 1)
        throw Error(ErrKind::Numeric, "backward requires a scalar loss");
    if (!nodes_[loss].value.finite())
        throw Error(ErrKind::Numeric, "non-finite loss value");
    grads_.clear();
    for (auto& n : nodes_) n.grad = Tensor(n.value.rows(), n.value.cols());
    nodes_[loss].grad[0] = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        const Tensor& g = n.grad;
        bool any = false;
        for (size_t i = 0; i < g.size(); ++i)
            if (g[i] != 0.0) { any = true; break; }
        if (!any) continue;
        if (!g.finite()) throw Error(ErrKind::Numeric, "NaN in backward pass");

        switch (n.op) {
            case Op::Const:
                break;
            case Op::Param: {
                auto it = grads_.find(n.pname);
                if (it == grads_.end())
                    grads_.emplace(n.pname, g);
                else
                    for (size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
                break;
            }
            case Op::Add: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                accumulate_broadcast(nodes_[n.parents[1]].grad, g);
                break;
            }
            case Op::Sub: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                Tensor neg = g;
                for (size_t i = 0; i < neg.size(); ++i) neg[i] = -neg[i];
                accumulate_broadcast(nodes_[n.parents[1]].grad, neg);
                break;
            }
            case Op::Mul: {
                const Tensor& va = nodes_[n.parents[0]].value;
                const Tensor& vb = nodes_[n.parents[1]].value;
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (int r = 0; r < g.rows(); ++r)
                    for (int c = 0; c < g.cols(); ++c)
                        ga.at(r, c) += g.at(r, c) * bcast_at(vb, r, c);
                Tensor gb_full(g.rows(), g.cols());
                for (int r = 0; r < g.rows(); ++r)
                    for (int c = 0; c < g.cols(); ++c)
                        gb_full.at(r, c) = g.at(r, c) * va.at(r, c);
                accumulate_broadcast(nodes_[n.parents[1]].grad, gb_full);
                break;
            }
            case Op::MatMul: {
                const Tensor& a = nodes_[n.parents[0]].value;
                const Tensor& b = nodes_[n.parents[1]].value;
                Tensor da = stk::matmul(g, b.transposed());
                Tensor db = stk::matmul(a.transposed(), g);
                Tensor& ga = nodes_[n.parents[0]].grad;
                Tensor& gb = nodes_[n.parents[1]].grad;
                for (size_t i = 0; i < da.size(); ++i) ga[i] += da[i];
                for (size_t i = 0; i < db.size(); ++i) gb[i] += db[i];
                break;
            }
            case Op::Transpose: {
                Tensor gt = g.transposed();
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < gt.size(); ++i) ga[i] += gt[i];
                break;
            }
            case Op::Scale: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.c0;
                break;
            }
            case Op::Tanh: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
                break;
            }
            case Op::Relu: {
                const Tensor& x = nodes_[n.parents[0]].value;
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < g.size(); ++i) ga[i] += x[i] > 0.0 ? g[i] : 0.0;
                break;
            }
            case Op::Sigmoid: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
                break;
            }
            case Op::Log: {
                const Tensor& x = nodes_[n.parents[0]].value;
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
                break;
            }
            case Op::Clamp: {
                const Tensor& x = nodes_[n.parents[0]].value;
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < g.size(); ++i)
                    if (x[i] > n.c0 && x[i] < n.c1) ga[i] += g[i];
                break;
            }
            case Op::SoftmaxRows: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (int r = 0; r < g.rows(); ++r) {
                    double dot = 0.0;
                    for (int c = 0; c < g.cols(); ++c) dot += g.at(r, c) * n.value.at(r, c);
                    for (int c = 0; c < g.cols(); ++c)
                        ga.at(r, c) += (g.at(r, c) - dot) * n.value.at(r, c);
                }
                break;
            }
            case Op::LogSoftmaxRows: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (int r = 0; r < g.rows(); ++r) {
                    double gs = 0.0;
                    for (int c = 0; c < g.cols(); ++c) gs += g.at(r, c);
                    for (int c = 0; c < g.cols(); ++c)
                        ga.at(r, c) += g.at(r, c) - std::exp(n.value.at(r, c)) * gs;
                }
                break;
            }
            case Op::LayerNormRows: {
                const Tensor& x = nodes_[n.parents[0]].value;
                Tensor& ga = nodes_[n.parents[0]].grad;
                int cols = x.cols();
                for (int r = 0; r < x.rows(); ++r) {
                    double mean = 0.0;
                    for (int c = 0; c < cols; ++c) mean += x.at(r, c);
                    mean /= cols;
                    double var = 0.0;
                    for (int c = 0; c < cols; ++c)
                        var += (x.at(r, c) - mean) * (x.at(r, c) - mean);
                    var /= cols;
                    double inv = 1.0 / std::sqrt(var + kLayerNormEps);
                    double gmean = 0.0, gdoty = 0.0;
                    for (int c = 0; c < cols; ++c) {
                        gmean += g.at(r, c);
                        gdoty += g.at(r, c) * n.value.at(r, c);
                    }
                    gmean /= cols;
                    gdoty /= cols;
                    for (int c = 0; c < cols; ++c)
                        ga.at(r, c) += inv * (g.at(r, c) - gmean - n.value.at(r, c) * gdoty);
                }
                break;
            }
            case Op::Sum: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
                break;
            }
            case Op::SliceCols: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (int r = 0; r < g.rows(); ++r)
                    for (int c = 0; c < g.cols(); ++c) ga.at(r, n.i0 + c) += g.at(r, c);
                break;
            }
            case Op::ConcatCols: {
                int off = 0;
                for (NodeId p : n.parents) {
                    Tensor& gp = nodes_[p].grad;
                    for (int r = 0; r < gp.rows(); ++r)
                        for (int c = 0; c < gp.cols(); ++c) gp.at(r, c) += g.at(r, off + c);
                    off += gp.cols();
                }
                break;
            }
            case Op::GatherRows: {
                // scatter-add back into the table
                Tensor& gt = nodes_[n.parents[0]].grad;
                for (size_t r = 0; r < n.ids.size(); ++r)
                    for (int c = 0; c < g.cols(); ++c)
                        gt.at(n.ids[r], c) += g.at(static_cast<int>(r), c);
                break;
            }
            case Op::Pick: {
                Tensor& ga = nodes_[n.parents[0]].grad;
                for (int r = 0; r < g.rows(); ++r) ga.at(r, n.ids[r]) += g.at(r, 0);
                break;
            }
            case Op::StopGrad:
                break;
        }
    }
}

}  // namespace stk
