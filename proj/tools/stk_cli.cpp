#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stk/pipeline.hpp"

using namespace stk;
namespace fs = std::filesystem;

namespace {

int exit_code(ErrKind kind) {
    switch (kind) {
        case ErrKind::Config: return 2;
        case ErrKind::Data: return 3;
        case ErrKind::Numeric: return 4;
    }
    return 1;
}

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> overrides;  // key=value
    std::string items, users, impressions;
    std::string out_dir = "artifacts";

    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (!config_file.empty())
            for (const auto& [k, v] : parse_config_file(config_file))
                apply_config_entry(cfg, k, v);
        for (const auto& kv : overrides) {
            size_t eq = kv.find('=');
            if (eq == std::string::npos)
                throw Error(ErrKind::Config, "--set expects key=value, got: " + kv);
            apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!items.empty()) cfg.paths.items_jsonl = items;
        if (!users.empty()) cfg.paths.users_jsonl = users;
        if (!impressions.empty()) cfg.paths.impressions_tsv = impressions;
        cfg.artifact_dir = out_dir;
        return cfg;
    }

    Catalog load(const PipelineConfig& cfg) const {
        bool have = !cfg.paths.items_jsonl.empty() || !cfg.paths.users_jsonl.empty() ||
                    !cfg.paths.impressions_tsv.empty();
        return have ? load_catalog(cfg.paths) : synthesize_catalog(cfg.synth);
    }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "key=value config file");
    cmd->add_option("--set", opts.overrides, "override a config key (key=value)")
        ->take_all();
    cmd->add_option("--items", opts.items, "items JSONL path");
    cmd->add_option("--users", opts.users, "users JSONL path");
    cmd->add_option("--impressions", opts.impressions, "impressions TSV path");
    cmd->add_option("--out", opts.out_dir, "artifact directory");
}

void print_memory_table(long long n, long long m, long long v, int depth, int dim,
                        int pretrained) {
    struct Row {
        const char* label;
        Paradigm paradigm;
        bool dual;
    };
    const Row rows[] = {
        {"content-encoding", Paradigm::ContentEncoding, false},
        {"id-based single", Paradigm::IdBased, false},
        {"id-based dual", Paradigm::IdBased, true},
        {"embedding-based single", Paradigm::EmbeddingBased, false},
        {"embedding-based dual", Paradigm::EmbeddingBased, true},
        {"semantic-token single", Paradigm::SemanticToken, false},
        {"semantic-token dual", Paradigm::SemanticToken, true},
    };
    for (const Row& r : rows) {
        MemorySpec spec;
        spec.paradigm = r.paradigm;
        spec.dual = r.dual;
        spec.items = n;
        spec.users = m;
        spec.vocab = v;
        spec.token_depth = depth;
        spec.model_dim = dim;
        spec.pretrained_dim = pretrained;
        MemoryReport rep = memory_report(spec);
        std::printf("%-24s %10s  (%lld entries)\n", r.label, rep.display.c_str(),
                    rep.entries);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semantic tokenization CTR toolkit"};
    app.require_subcommand(1);

    CommonOpts tok_items, tok_users, train, eval, compare;
    auto* c_ti = app.add_subcommand("tokenize-items", "train the item tokenizer and dump tokens");
    add_common(c_ti, tok_items);
    auto* c_tu = app.add_subcommand("tokenize-users", "train the user tokenizer and dump tokens");
    add_common(c_tu, tok_users);
    auto* c_tr = app.add_subcommand("train-ctr", "run the full pipeline and persist the head");
    add_common(c_tr, train);
    auto* c_ev = app.add_subcommand("evaluate", "run the pipeline and print the report");
    add_common(c_ev, eval);
    bool eval_json = false;
    c_ev->add_flag("--json", eval_json, "emit the report as JSON lines");
    auto* c_cmp = app.add_subcommand("compare-agg", "compare the three aggregation variants");
    add_common(c_cmp, compare);

    long long mem_n = 0, mem_m = 0, mem_v = 0;
    int mem_k = 4, mem_d = 256, mem_dd = 768;
    auto* c_mem = app.add_subcommand("memory-report", "embedding storage for every paradigm");
    c_mem->add_option("--items", mem_n, "item count N")->required();
    c_mem->add_option("--users", mem_m, "user count M")->required();
    c_mem->add_option("--vocab", mem_v, "content vocabulary V")->required();
    c_mem->add_option("--depth", mem_k, "token depth K");
    c_mem->add_option("--dim", mem_d, "model dim d");
    c_mem->add_option("--pretrained-dim", mem_dd, "pretrained embedding dim D");

    std::string synth_out = "data";
    SynthConfig synth;
    auto* c_sy = app.add_subcommand("synth-data", "generate a planted-cluster catalog");
    c_sy->add_option("--items", synth.n_items, "item count");
    c_sy->add_option("--users", synth.n_users, "user count");
    c_sy->add_option("--clusters", synth.n_clusters, "planted clusters");
    c_sy->add_option("--impressions", synth.n_impressions, "impression count");
    c_sy->add_option("--seed", synth.seed, "rng seed");
    c_sy->add_option("--out", synth_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*c_ti || *c_tu) {
            CommonOpts& opts = *c_ti ? tok_items : tok_users;
            PipelineConfig cfg = opts.resolve();
            Catalog cat = opts.load(cfg);
            TokenizationResult res = *c_ti ? tokenize_items(cat, cfg)
                                           : tokenize_users(cat, cfg);
            fs::create_directories(cfg.artifact_dir);
            fs::path dir(cfg.artifact_dir);
            const char* side = *c_ti ? "item" : "user";
            write_cache((dir / (std::string(side) + "_z.stkc")).string(), res.z);
            write_tokens((dir / (std::string(side) + "_tokens.tsv")).string(), res.tokens);
            std::printf("%s tokens: %zu entities, collision rate %.4f\n", side,
                        res.tokens.size(), res.collision_rate);
        } else if (*c_tr || *c_ev) {
            CommonOpts& opts = *c_tr ? train : eval;
            PipelineConfig cfg = opts.resolve();
            Catalog cat = opts.load(cfg);
            EvalReport rep = run_pipeline(cat, cfg);
            if (*c_ev && eval_json)
                std::cout << rep.to_json() << "\n";
            else
                std::cout << rep.to_text();
        } else if (*c_cmp) {
            PipelineConfig cfg = compare.resolve();
            Catalog cat = compare.load(cfg);
            auto rows = compare_aggregations(cat, cfg);
            std::printf("%-8s %8s %8s %8s\n", "variant", "auc", "ndcg@5", "calls");
            for (const auto& r : rows)
                std::printf("%-8s %8.4f %8.4f %8ld\n", to_string(r.aggregation).c_str(),
                            r.auc, r.ndcg5, r.scorer_calls_per_sample);
        } else if (*c_mem) {
            print_memory_table(mem_n, mem_m, mem_v, mem_k, mem_d, mem_dd);
        } else if (*c_sy) {
            Catalog cat = synthesize_catalog(synth);
            fs::create_directories(synth_out);
            fs::path dir(synth_out);
            CatalogPaths paths{(dir / "items.jsonl").string(),
                               (dir / "users.jsonl").string(),
                               (dir / "impressions.tsv").string()};
            write_catalog(paths, cat);
            std::printf("wrote %zu items, %zu users, %zu impressions to %s\n",
                        cat.item_ids.size(), cat.user_ids.size(), cat.impressions.size(),
                        synth_out.c_str());
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
