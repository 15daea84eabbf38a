#pragma once

#include <map>
#include <string>
#include <vector>

#include "stk/datastore.hpp"
#include "stk/hmi.hpp"
#include "stk/metrics.hpp"
#include "stk/rqvae.hpp"
#include "stk/seqrep.hpp"

namespace stk {

// UIST tokenizes both sides; IST tokenizes items only and encodes the user
// online from the history.
enum class Mode { Uist, Ist };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct PipelineConfig {
    Mode mode = Mode::Uist;
    CatalogPaths paths;        // all empty: synthesize instead
    SynthConfig synth;
    std::string artifact_dir;  // empty: keep everything in memory

    int dim = 32;            // d
    int layers = 2;          // H, autoencoder depth
    int depth = 4;           // K
    int codebook_size = 64;  // C
    double beta = 0.25;

    int seq_epochs = 30;
    int rq_epochs = 30;
    int head_epochs = 3;
    int batch_size = 16;
    double lr = 1e-3;
    uint64_t seed = 0;

    ScorerKind base = ScorerKind::Dcn;
    Aggregation aggregation = Aggregation::Hmi;
    double holdout = 0.2;  // fraction of impression groups held out for eval
};

// key=value lines, '#' comments; unknown keys are an error
std::map<std::string, std::string> parse_config_file(const std::string& path);
PipelineConfig build_config(const std::map<std::string, std::string>& kv);
void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value);

// FNV-1a over the canonical key=value rendering; embedded in every report.
std::string config_hash(const PipelineConfig& cfg);

struct EvalReport {
    std::string mode, base, aggregation;
    std::string config;  // hash
    double auc = 0.0;
    double ndcg5 = 0.0;
    int eval_groups = 0;
    int skipped_groups = 0;
    double item_collision_rate = 0.0;
    LatencyStats latency;
    std::vector<std::string> memory_lines;
    std::vector<double> head_loss_trace;

    std::string to_text() const;
    std::string to_json() const;  // single line
};

struct TokenizationResult {
    EmbeddingTable z;
    TokenTable tokens;
    double collision_rate = 0.0;
};

// Standalone front-end stages for the CLI; tokenize_users reruns the item
// stage internally since user sequences read the item reconstructions.
TokenizationResult tokenize_items(const Catalog& cat, const PipelineConfig& cfg);
TokenizationResult tokenize_users(const Catalog& cat, const PipelineConfig& cfg);

EvalReport run_pipeline(const Catalog& cat, const PipelineConfig& cfg);
EvalReport run_pipeline(const PipelineConfig& cfg);  // loads or synthesizes

struct AggComparisonRow {
    Aggregation aggregation;
    double auc = 0.0;
    double ndcg5 = 0.0;
    long scorer_calls_per_sample = 0;
};

// Trains Add, Layer and the full grid head from one shared set of UIST token
// tables and seeds; rows come back in that order.
std::vector<AggComparisonRow> compare_aggregations(const Catalog& cat,
                                                   const PipelineConfig& cfg);

}  // namespace stk
