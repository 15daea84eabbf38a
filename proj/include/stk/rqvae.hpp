#pragma once

#include <random>
#include <vector>

#include "stk/datastore.hpp"
#include "stk/graph.hpp"
#include "stk/tensor.hpp"

namespace stk {

enum class Distance { Euclidean, Manhattan };

struct RqConfig {
    int depth = 4;          // K
    int codebook_size = 64; // C
    int input_dim = 32;     // d (encoder input)
    int code_dim = 0;       // d_q; 0 means same as input_dim
    double beta = 0.25;     // commitment cost
    Distance distance = Distance::Euclidean;
    int epochs = 30;
    int batch_size = 64;
    double lr = 1e-3;
    int kmeans_iters = 10;
    uint64_t seed = 0;
    // single linear layer instead of the 2-layer tanh MLP on both sides;
    // lets tests pin the codec to an exact identity
    bool linear_codec = false;

    int dq() const { return code_dim > 0 ? code_dim : input_dim; }
};

struct QuantizeResult {
    std::vector<int> code;         // i^1..i^K
    std::vector<Tensor> residuals; // v^1..v^{K+1}, each [1,dq]
};

// Greedy per-layer nearest-code assignment; ties break to the smaller index.
QuantizeResult quantize(const std::vector<Tensor>& codebooks, const Tensor& v,
                        Distance g = Distance::Euclidean);

// Sum of the selected code vectors, no re-quantization.
Tensor approximate(const std::vector<Tensor>& codebooks, const std::vector<int>& code);

// Lloyd's k-means on the rows of `data`; centroids seeded from distinct rows.
Tensor kmeans(const Tensor& data, int k, int iters, std::mt19937_64& rng,
              Distance g = Distance::Euclidean);

struct RqLossParts {
    double total = 0.0;
    double reconstruction = 0.0;
    double quantization = 0.0;  // codebook-pull terms
    double commitment = 0.0;    // beta-weighted terms
};

class RqAutoencoder {
public:
    static RqAutoencoder init(const RqConfig& cfg);

    const RqConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    std::vector<Tensor> codebooks() const;
    void set_codebook(int layer, const Tensor& book);

    // Plain (non-taped) forward passes over row batches.
    Tensor encode(const Tensor& z_rows) const;
    Tensor decode(const Tensor& v_rows) const;

    // Taped encoder/decoder for training.
    NodeId encode_node(Graph& g, NodeId z) const;
    NodeId decode_node(Graph& g, NodeId v) const;

    // Builds the full training loss over a batch of z rows:
    // reconstruction through the straight-through value plus the per-layer
    // codebook-pull and commitment terms, averaged over the batch.
    NodeId training_loss(Graph& g, const Tensor& z_rows, RqLossParts* parts = nullptr) const;

    QuantizeResult quantize_row(const Tensor& z_row) const;

private:
    RqConfig cfg_;
    ParamSet params_;
};

struct RqFitResult {
    RqAutoencoder model;
    std::vector<double> loss_trace;        // per-epoch mean L_et
    std::vector<double> utilization;       // per-layer used-code fraction
};

RqFitResult fit_tokenizer(const Tensor& z_rows, const RqConfig& cfg);

struct CollisionReport {
    double rate = 0.0;  // fraction of ids sharing a code with another id
    std::vector<std::vector<std::string>> groups;  // each holds >= 2 ids
};

struct TokenizeResult {
    TokenTable table;
    CollisionReport collisions;
};

TokenizeResult tokenize_corpus(const RqAutoencoder& model, const EmbeddingTable& z);

}  // namespace stk
