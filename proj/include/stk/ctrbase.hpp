#pragma once

#include <random>
#include <string>

#include "stk/graph.hpp"

namespace stk {

enum class ScorerKind { Dcn, DeepFm, Mlp };

ScorerKind scorer_kind_from_string(const std::string& s);
std::string to_string(ScorerKind kind);

// Base CTR model M: scores one (user vector, item vector) pair. The input is
// the concatenation [u || t] of dim 2d. Parameters live in an external
// ParamSet under `prefix` so a head can share one scorer across many pairs.
class PairScorer {
public:
    PairScorer(ScorerKind kind, int dim, int cross_layers = 2, int hidden = 64,
               int fields = 2);

    void init_params(ParamSet& ps, const std::string& prefix, std::mt19937_64& rng) const;

    // Builds the scalar score subgraph. u and t are [1,dim] nodes.
    NodeId score(Graph& g, const ParamSet& ps, const std::string& prefix, NodeId u,
                 NodeId t) const;

    ScorerKind kind() const { return kind_; }
    int dim() const { return dim_; }

    // number of score() invocations since construction / reset
    long calls() const { return calls_; }
    void reset_calls() { calls_ = 0; }

private:
    ScorerKind kind_;
    int dim_;
    int cross_layers_;
    int hidden_;
    int fields_;
    mutable long calls_ = 0;

    NodeId mlp_branch(Graph& g, const ParamSet& ps, const std::string& prefix,
                      NodeId x) const;
};

}  // namespace stk
