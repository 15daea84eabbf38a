#pragma once

#include <random>
#include <string>
#include <vector>

#include "stk/datastore.hpp"
#include "stk/graph.hpp"
#include "stk/tensor.hpp"

namespace stk {

struct SeqRepConfig {
    int vocab_in = 0;    // input token vocabulary
    int vocab_out = 0;   // classifier vocabulary (targets)
    int dim = 32;        // d, shared across all layers
    int layers = 6;      // H
    int heads = 4;
    int ffn_mult = 4;
    int max_len = 30;
    double dropout = 0.1;
    int epochs = 30;
    int batch_size = 16;
    double lr = 1e-3;
    uint64_t seed = 0;
};

// Token-id sequences with padding already stripped; a row is its true length.
using Corpus = std::vector<std::vector<int>>;

// Strips trailing `pad_id` tokens from each row.
Corpus strip_padding(const Corpus& rows, int pad_id);

// Whitespace-splitting convenience for raw-text fixtures.
std::vector<int> whitespace_tokenize(const std::string& text,
                                     std::vector<std::string>& vocab);

// Transformer autoencoder: H-layer encoder, additive-attention pooler
// producing z, causal decoder cross-attending onto z, MLP classifier.
class SeqAutoencoder {
public:
    static SeqAutoencoder init(const SeqRepConfig& cfg);

    const SeqRepConfig& config() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    // Replaces the trainable input embedding with a fixed table
    // (vocab_in x dim); used for user sequences over item reconstructions.
    void freeze_input_embeddings(const Tensor& table);
    bool input_frozen() const { return frozen_; }

    // z for one sequence; dropout applies only when a training rng is given.
    NodeId encode_pool_node(Graph& g, const std::vector<int>& seq,
                            std::mt19937_64* dropout_rng = nullptr) const;
    Tensor encode_pool(const std::vector<int>& seq) const;

    // Additive-attention weights over positions (for the simplex property).
    Tensor pooler_weights(const std::vector<int>& seq) const;

    // Final encoder states E^H, one row per position.
    Tensor encoder_states(const std::vector<int>& seq) const;

    // Teacher-forced decoder logits, one row per position. When `z_override`
    // is given the encoder is bypassed and the decoder conditions on it.
    Tensor decoder_logits(const std::vector<int>& seq,
                          const Tensor* z_override = nullptr) const;

    // Mean token-level NLL of reconstructing `seq`, teacher forcing with a
    // BOS marker.
    NodeId reconstruction_loss_node(Graph& g, const std::vector<int>& seq,
                                    std::mt19937_64* dropout_rng = nullptr) const;
    double reconstruction_loss(const std::vector<int>& seq) const;
    double reconstruction_loss(const Corpus& rows) const;

private:
    SeqRepConfig cfg_;
    ParamSet params_;
    bool frozen_ = false;
    Tensor frozen_table_;

    NodeId input_embedding(Graph& g, const std::vector<int>& seq) const;
    NodeId encoder_stack(Graph& g, NodeId x, std::mt19937_64* rng) const;
    NodeId decoder_stack(Graph& g, NodeId x, NodeId z, std::mt19937_64* rng) const;
};

struct SeqTrainResult {
    SeqAutoencoder model;
    std::vector<double> loss_trace;  // mean L_sr per epoch
};

SeqTrainResult train_autoencoder(const Corpus& corpus, const SeqRepConfig& cfg);

// Same training loop with a fixed input-embedding table (the model never
// owns a trainable "emb").
SeqTrainResult train_autoencoder(const Corpus& corpus, const SeqRepConfig& cfg,
                                 const Tensor& frozen_input);

// One z row per entity, row order = input order. Ids must be unique.
EmbeddingTable represent_corpus(const SeqAutoencoder& model,
                                const std::vector<std::string>& ids,
                                const Corpus& rows);

}  // namespace stk
