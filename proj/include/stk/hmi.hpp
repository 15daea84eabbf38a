#pragma once

#include <string>
#include <vector>

#include "stk/ctrbase.hpp"
#include "stk/graph.hpp"

namespace stk {

enum class Aggregation { Hmi, Add, Layer };

Aggregation aggregation_from_string(const std::string& s);
std::string to_string(Aggregation agg);

struct HmiConfig {
    int depth = 4;           // K, matches the tokenizers
    int codebook_size = 64;  // C
    int dim = 32;            // token embedding dim
    ScorerKind base = ScorerKind::Dcn;
    Aggregation aggregation = Aggregation::Hmi;
    int epochs = 3;
    int batch_size = 64;
    double lr = 1e-3;
    uint64_t seed = 0;
};

// Cumulative sums of the per-layer token embeddings: out[i] = sum_{j<=i} e^j.
std::vector<Tensor> coarse_to_fine(const std::vector<Tensor>& tables,
                                   const std::vector<int>& code);

// Clamped binary cross-entropy; label must be 0 or 1.
double bce(double p, int label);

struct LabeledPair {
    std::vector<int> user_code;
    std::vector<int> item_code;
    int label = 0;
};

// CTR head over token codes: K user and K item embedding tables trained from
// scratch, one shared base scorer over coarse-to-fine pairs, and a mixing
// layer squashed to a probability. Also hosts the Add and Layer aggregation
// baselines.
class HmiHead {
public:
    static HmiHead init(const HmiConfig& cfg);

    const HmiConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const PairScorer& scorer() const { return scorer_; }
    PairScorer& scorer() { return scorer_; }

    // Click probability; `grid` (when non-null and aggregation is Hmi)
    // receives the K x K base-model scores.
    NodeId predict_node(Graph& g, const std::vector<int>& user_code,
                        const std::vector<int>& item_code, Tensor* grid = nullptr) const;
    double predict(const std::vector<int>& user_code, const std::vector<int>& item_code,
                   Tensor* grid = nullptr) const;

    // loss on one labeled pair
    NodeId loss_node(Graph& g, const LabeledPair& sample) const;

    // Fully summed item embedding e^1 + ... + e^K (the item-side entry point
    // for online user encoders).
    Tensor item_embedding_sum(const std::vector<int>& item_code) const;

private:
    explicit HmiHead(const HmiConfig& cfg) : cfg_(cfg), scorer_(cfg.base, cfg.dim) {}

    HmiConfig cfg_;
    PairScorer scorer_;
    ParamSet params_;

    std::vector<NodeId> coarse_nodes(Graph& g, const char* side,
                                     const std::vector<int>& code) const;
};

struct HmiTrainResult {
    std::vector<double> loss_trace;  // per-epoch mean BCE
};

HmiTrainResult train_head(HmiHead& head, const std::vector<LabeledPair>& samples);

void save_head(const std::string& path, const HmiHead& head);
HmiHead load_head(const std::string& path);

}  // namespace stk
