#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stk/tensor.hpp"

namespace stk {

struct Impression {
    std::string group;
    std::string user;
    std::string item;
    int label = 0;
};

// Immutable after load; items map to content token-id sequences, users to
// item-id histories.
struct Catalog {
    std::vector<std::string> item_ids;                       // insertion order
    std::map<std::string, std::vector<int>> items;           // id -> content tokens
    std::vector<std::string> user_ids;
    std::map<std::string, std::vector<std::string>> users;   // id -> item history
    std::vector<Impression> impressions;

    int content_vocab() const;  // 1 + max content token id
};

struct CatalogPaths {
    std::string items_jsonl;
    std::string users_jsonl;
    std::string impressions_tsv;
};

Catalog load_catalog(const CatalogPaths& paths);
void write_catalog(const CatalogPaths& paths, const Catalog& cat);

// Embedding matrix keyed by string id, row order preserved.
struct EmbeddingTable {
    std::vector<std::string> ids;
    Tensor matrix;  // ids.size() x dim

    int dim() const { return matrix.cols(); }
    int row_of(const std::string& id) const;  // -1 if absent
};

// Binary cache: magic "STKC", version u32, row count u64, dim u32,
// little-endian float32 rows, then length-prefixed UTF-8 id strings.
void write_cache(const std::string& path, const EmbeddingTable& table);
EmbeddingTable read_cache(const std::string& path);

// Token table: id -> K codebook indices.
using TokenTable = std::map<std::string, std::vector<int>>;

void write_tokens(const std::string& path, const TokenTable& table);
TokenTable read_tokens(const std::string& path);

enum class Paradigm { ContentEncoding, IdBased, EmbeddingBased, SemanticToken };

struct MemorySpec {
    Paradigm paradigm = Paradigm::SemanticToken;
    bool dual = false;  // user-side table cached as well
    long long items = 0, users = 0, vocab = 0;
    int token_depth = 0;  // K
    int model_dim = 0;    // d
    int pretrained_dim = 0;  // D
};

struct MemoryReport {
    long long entries = 0;
    long long bytes = 0;
    std::string display;  // "29.81M" / "2.98G" style
};

MemoryReport memory_report(const MemorySpec& spec);

struct SynthConfig {
    int n_items = 500;
    int n_users = 200;
    int n_clusters = 8;
    int history_len = 20;
    int n_impressions = 10000;
    int group_size = 5;
    int tokens_per_item = 12;
    int content_vocab = 200;
    uint64_t seed = 0;
};

// Planted-structure generator: items carry cluster-specific content tokens,
// each user prefers one cluster, clicks follow a 0.9/0.1 matched/unmatched
// coin. Deterministic per seed.
Catalog synthesize_catalog(const SynthConfig& cfg);

}  // namespace stk
