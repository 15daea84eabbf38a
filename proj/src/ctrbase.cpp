#include "stk/ctrbase.hpp"

#include <cmath>

namespace stk {

ScorerKind scorer_kind_from_string(const std::string& s) {
    if (s == "dcn") return ScorerKind::Dcn;
    if (s == "deepfm") return ScorerKind::DeepFm;
    if (s == "mlp") return ScorerKind::Mlp;
    throw Error(ErrKind::Config, "unknown base model kind: " + s);
}

std::string to_string(ScorerKind kind) {
    switch (kind) {
        case ScorerKind::Dcn: return "dcn";
        case ScorerKind::DeepFm: return "deepfm";
        case ScorerKind::Mlp: return "mlp";
    }
    return "?";
}

PairScorer::PairScorer(ScorerKind kind, int dim, int cross_layers, int hidden, int fields)
    : kind_(kind), dim_(dim), cross_layers_(cross_layers), hidden_(hidden), fields_(fields) {
    if (dim < 1) throw Error(ErrKind::Config, "scorer dim must be positive");
    if (kind == ScorerKind::Dcn && cross_layers < 1)
        throw Error(ErrKind::Config, "DCN needs at least one cross layer");
    if (kind == ScorerKind::DeepFm && (2 * dim) % fields != 0)
        throw Error(ErrKind::Config, "DeepFM: 2d must be divisible by the field count");
}

void PairScorer::init_params(ParamSet& ps, const std::string& prefix,
                             std::mt19937_64& rng) const {
    int in = 2 * dim_;
    double s = 1.0 / std::sqrt(static_cast<double>(in));
    double sh = 1.0 / std::sqrt(static_cast<double>(hidden_));
    ps.add(prefix + "mlp.w1", Tensor::randn(in, hidden_, rng, s));
    ps.add(prefix + "mlp.b1", Tensor(1, hidden_));
    ps.add(prefix + "mlp.w2", Tensor::randn(hidden_, hidden_, rng, sh));
    ps.add(prefix + "mlp.b2", Tensor(1, hidden_));
    ps.add(prefix + "mlp.w3", Tensor::randn(hidden_, 1, rng, sh));
    ps.add(prefix + "mlp.b3", Tensor(1, 1));
    switch (kind_) {
        case ScorerKind::Dcn:
            for (int l = 0; l < cross_layers_; ++l) {
                ps.add(prefix + "cross" + std::to_string(l) + ".w",
                       Tensor::randn(in, 1, rng, s));
                ps.add(prefix + "cross" + std::to_string(l) + ".b", Tensor(1, in));
            }
            ps.add(prefix + "vout", Tensor::randn(in, 1, rng, s));
            break;
        case ScorerKind::DeepFm:
            ps.add(prefix + "lin.w", Tensor::randn(in, 1, rng, s));
            ps.add(prefix + "lin.b", Tensor(1, 1));
            break;
        case ScorerKind::Mlp:
            break;
    }
}

NodeId PairScorer::mlp_branch(Graph& g, const ParamSet& ps, const std::string& prefix,
                              NodeId x) const {
    NodeId h1 = g.relu(g.add(g.matmul(x, g.param(ps, prefix + "mlp.w1")),
                             g.param(ps, prefix + "mlp.b1")));
    NodeId h2 = g.relu(g.add(g.matmul(h1, g.param(ps, prefix + "mlp.w2")),
                             g.param(ps, prefix + "mlp.b2")));
    return g.add(g.matmul(h2, g.param(ps, prefix + "mlp.w3")),
                 g.param(ps, prefix + "mlp.b3"));
}

NodeId PairScorer::score(Graph& g, const ParamSet& ps, const std::string& prefix, NodeId u,
                         NodeId t) const {
    if (g.value(u).cols() != dim_ || g.value(t).cols() != dim_)
        throw Error(ErrKind::Numeric, "scorer input dim mismatch");
    ++calls_;
    NodeId x0 = g.concat_cols({u, t});

    switch (kind_) {
        case ScorerKind::Dcn: {
            // x_{l+1} = x0 * (x_l . w_l) + b_l + x_l
            NodeId x = x0;
            for (int l = 0; l < cross_layers_; ++l) {
                std::string p = prefix + "cross" + std::to_string(l) + ".";
                NodeId s = g.matmul(x, g.param(ps, p + "w"));  // [1,1]
                x = g.add(g.add(g.mul(x0, s), g.param(ps, p + "b")), x);
            }
            NodeId cross_out = g.matmul(x, g.param(ps, prefix + "vout"));
            return g.add(cross_out, mlp_branch(g, ps, prefix, x0));
        }
        case ScorerKind::DeepFm: {
            int fdim = 2 * dim_ / fields_;
            // FM pairwise term via the square-of-sum identity
            NodeId sum_f = g.slice_cols(x0, 0, fdim);
            NodeId sum_sq = g.mul(sum_f, sum_f);
            for (int f = 1; f < fields_; ++f) {
                NodeId ef = g.slice_cols(x0, f * fdim, fdim);
                sum_f = g.add(sum_f, ef);
                sum_sq = g.add(sum_sq, g.mul(ef, ef));
            }
            NodeId fm = g.scale(g.sum(g.sub(g.mul(sum_f, sum_f), sum_sq)), 0.5);
            NodeId lin = g.add(g.matmul(x0, g.param(ps, prefix + "lin.w")),
                               g.param(ps, prefix + "lin.b"));
            return g.add(g.add(lin, fm), mlp_branch(g, ps, prefix, x0));
        }
        case ScorerKind::Mlp:
            return mlp_branch(g, ps, prefix, x0);
    }
    throw Error(ErrKind::Config, "unreachable scorer kind");
}

}  // namespace stk
