#include "stk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stk/optim.hpp"

namespace stk {

Mode mode_from_string(const std::string& s) {
    if (s == "uist") return Mode::Uist;
    if (s == "ist") return Mode::Ist;
    throw Error(ErrKind::Config, "unknown mode: " + s);
}

std::string to_string(Mode m) { return m == Mode::Uist ? "uist" : "ist"; }

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrKind::Config, "cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrKind::Config,
                        path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            size_t b = s.find_first_not_of(" \t\r");
            size_t e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty())
            throw Error(ErrKind::Config, path + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value) {
    auto to_int = [&](const std::string& v) {
        try {
            return std::stoi(v);
        } catch (const std::exception&) {
            throw Error(ErrKind::Config, "bad integer for " + key + ": " + v);
        }
    };
    auto to_double = [&](const std::string& v) {
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw Error(ErrKind::Config, "bad number for " + key + ": " + v);
        }
    };
    if (key == "mode") cfg.mode = mode_from_string(value);
    else if (key == "items") cfg.paths.items_jsonl = value;
    else if (key == "users") cfg.paths.users_jsonl = value;
    else if (key == "impressions") cfg.paths.impressions_tsv = value;
    else if (key == "artifact_dir") cfg.artifact_dir = value;
    else if (key == "dim") cfg.dim = to_int(value);
    else if (key == "layers") cfg.layers = to_int(value);
    else if (key == "depth") cfg.depth = to_int(value);
    else if (key == "codebook_size") cfg.codebook_size = to_int(value);
    else if (key == "beta") cfg.beta = to_double(value);
    else if (key == "seq_epochs") cfg.seq_epochs = to_int(value);
    else if (key == "rq_epochs") cfg.rq_epochs = to_int(value);
    else if (key == "head_epochs") cfg.head_epochs = to_int(value);
    else if (key == "batch_size") cfg.batch_size = to_int(value);
    else if (key == "lr") cfg.lr = to_double(value);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(std::stoull(value));
    else if (key == "base") cfg.base = scorer_kind_from_string(value);
    else if (key == "aggregation") cfg.aggregation = aggregation_from_string(value);
    else if (key == "holdout") cfg.holdout = to_double(value);
    else if (key == "synth_items") cfg.synth.n_items = to_int(value);
    else if (key == "synth_users") cfg.synth.n_users = to_int(value);
    else if (key == "synth_clusters") cfg.synth.n_clusters = to_int(value);
    else if (key == "synth_impressions") cfg.synth.n_impressions = to_int(value);
    else throw Error(ErrKind::Config, "unknown config key: " + key);
}

static void validate(const PipelineConfig& cfg) {
    if (cfg.depth < 1 || cfg.codebook_size < 1)
        throw Error(ErrKind::Config, "depth and codebook_size must be >= 1");
    if (cfg.dim < 1 || cfg.layers < 1)
        throw Error(ErrKind::Config, "dim and layers must be >= 1");
    if (cfg.holdout <= 0.0 || cfg.holdout >= 1.0)
        throw Error(ErrKind::Config, "holdout must be in (0,1)");
}

PipelineConfig build_config(const std::map<std::string, std::string>& kv) {
    PipelineConfig cfg;
    for (const auto& [k, v] : kv) apply_config_entry(cfg, k, v);
    validate(cfg);
    return cfg;
}

static std::string canonical(const PipelineConfig& c) {
    std::ostringstream os;
    os << "mode=" << to_string(c.mode) << ";dim=" << c.dim << ";layers=" << c.layers
       << ";depth=" << c.depth << ";codebook=" << c.codebook_size << ";beta=" << c.beta
       << ";seq_epochs=" << c.seq_epochs << ";rq_epochs=" << c.rq_epochs
       << ";head_epochs=" << c.head_epochs << ";batch=" << c.batch_size << ";lr=" << c.lr
       << ";seed=" << c.seed << ";base=" << to_string(c.base)
       << ";agg=" << to_string(c.aggregation) << ";holdout=" << c.holdout;
    return os.str();
}

std::string config_hash(const PipelineConfig& cfg) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : canonical(cfg)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "mode        " << mode << " (" << base << ", " << aggregation << ")\n"
       << "config      " << config << "\n"
       << "auc         " << auc << "\n"
       << "ndcg@5      " << ndcg5 << "\n"
       << "groups      " << eval_groups << " evaluated, " << skipped_groups << " skipped\n"
       << "collisions  " << item_collision_rate << " (item token tuples)\n"
       << "latency     " << latency.median_us << " us median, " << latency.p95_us
       << " us p95 over " << latency.trials << " trials\n";
    for (const auto& line : memory_lines) os << "memory      " << line << "\n";
    return os.str();
}

std::string EvalReport::to_json() const {
    nlohmann::json j{{"mode", mode},
                     {"base", base},
                     {"aggregation", aggregation},
                     {"config", config},
                     {"auc", auc},
                     {"ndcg5", ndcg5},
                     {"eval_groups", eval_groups},
                     {"skipped_groups", skipped_groups},
                     {"item_collision_rate", item_collision_rate},
                     {"latency_median_us", latency.median_us},
                     {"latency_p95_us", latency.p95_us},
                     {"memory", memory_lines},
                     {"head_loss", head_loss_trace}};
    return j.dump();
}

namespace {

// wraps a stage so failures carry the stage name
template <typename F>
auto stage(const char* name, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind, std::string(name) + ": " + e.what());
    }
}

struct TokenStage {
    TokenTable item_tokens;
    double item_collision_rate = 0.0;
    EmbeddingTable item_z;
    Tensor item_vbar;  // one reconstructed row per item, item_ids order
    TokenTable user_tokens;  // empty in IST mode
    EmbeddingTable user_z;
};

Corpus item_corpus(const Catalog& cat) {
    Corpus rows;
    for (const auto& id : cat.item_ids) rows.push_back(cat.items.at(id));
    return rows;
}

TokenStage build_token_stage(const Catalog& cat, const PipelineConfig& cfg,
                             bool user_side) {
    TokenStage out;

    SeqRepConfig icfg;
    icfg.vocab_in = icfg.vocab_out = cat.content_vocab();
    icfg.dim = cfg.dim;
    icfg.layers = cfg.layers;
    icfg.epochs = cfg.seq_epochs;
    icfg.batch_size = cfg.batch_size;
    icfg.lr = cfg.lr;
    icfg.seed = cfg.seed;
    SeqTrainResult item_ae = stage("item-autoencoder", [&] {
        return train_autoencoder(item_corpus(cat), icfg);
    });
    out.item_z = stage("item-representation", [&] {
        return represent_corpus(item_ae.model, cat.item_ids, item_corpus(cat));
    });

    RqConfig rq;
    rq.depth = cfg.depth;
    rq.codebook_size = cfg.codebook_size;
    rq.input_dim = cfg.dim;
    rq.beta = cfg.beta;
    rq.epochs = cfg.rq_epochs;
    rq.lr = cfg.lr;
    rq.seed = cfg.seed + 1;
    RqFitResult item_fit = stage("item-tokenizer", [&] {
        return fit_tokenizer(out.item_z.matrix, rq);
    });
    TokenizeResult item_tok = tokenize_corpus(item_fit.model, out.item_z);
    out.item_tokens = std::move(item_tok.table);
    out.item_collision_rate = item_tok.collisions.rate;

    // reconstructed item vectors: decode the straight-through approximation
    auto books = item_fit.model.codebooks();
    Tensor vbar(static_cast<int>(cat.item_ids.size()), rq.dq());
    for (size_t r = 0; r < cat.item_ids.size(); ++r) {
        Tensor v = approximate(books, out.item_tokens.at(cat.item_ids[r]));
        for (int c = 0; c < v.cols(); ++c) vbar.at(static_cast<int>(r), c) = v.at(0, c);
    }
    out.item_vbar = vbar;

    if (!user_side) return out;

    // user sequences are item-index sequences over the reconstructions
    std::map<std::string, int> item_row;
    for (size_t r = 0; r < cat.item_ids.size(); ++r)
        item_row[cat.item_ids[r]] = static_cast<int>(r);
    Corpus user_rows;
    for (const auto& uid : cat.user_ids) {
        std::vector<int> row;
        for (const auto& iid : cat.users.at(uid)) row.push_back(item_row.at(iid));
        user_rows.push_back(std::move(row));
    }

    SeqRepConfig ucfg = icfg;
    ucfg.vocab_in = ucfg.vocab_out = static_cast<int>(cat.item_ids.size());
    ucfg.seed = cfg.seed + 2;
    SeqTrainResult user_ae = stage("user-autoencoder", [&] {
        return train_autoencoder(user_rows, ucfg, vbar);
    });
    out.user_z = stage("user-representation", [&] {
        return represent_corpus(user_ae.model, cat.user_ids, user_rows);
    });
    RqConfig urq = rq;
    urq.seed = cfg.seed + 3;
    RqFitResult user_fit = stage("user-tokenizer", [&] {
        return fit_tokenizer(out.user_z.matrix, urq);
    });
    out.user_tokens = tokenize_corpus(user_fit.model, out.user_z).table;
    return out;
}

// held-out impression groups: every stride-th group in first-appearance order
std::set<std::string> test_groups(const Catalog& cat, double holdout) {
    std::vector<std::string> order;
    std::set<std::string> seen;
    for (const auto& imp : cat.impressions)
        if (seen.insert(imp.group).second) order.push_back(imp.group);
    int stride = std::max(2, static_cast<int>(std::lround(1.0 / holdout)));
    std::set<std::string> test;
    for (size_t i = 0; i < order.size(); ++i)
        if (i % stride == static_cast<size_t>(stride - 1)) test.insert(order[i]);
    if (test.empty() || test.size() == order.size())
        throw Error(ErrKind::Data, "holdout split left a side empty");
    return test;
}

std::vector<std::string> memory_lines_for(const Catalog& cat, const PipelineConfig& cfg) {
    long long n = static_cast<long long>(cat.item_ids.size());
    long long m = static_cast<long long>(cat.user_ids.size());
    long long v = cat.content_vocab();
    bool dual = cfg.mode == Mode::Uist;
    auto line = [&](const char* label, Paradigm p, bool d) {
        MemorySpec spec;
        spec.paradigm = p;
        spec.dual = d;
        spec.items = n;
        spec.users = m;
        spec.vocab = v;
        spec.token_depth = cfg.depth;
        spec.model_dim = cfg.dim;
        spec.pretrained_dim = cfg.dim;
        MemoryReport r = memory_report(spec);
        std::ostringstream os;
        os << label << (d ? " dual " : " single ") << r.display << " (" << r.entries
           << " entries)";
        return os.str();
    };
    return {line("content-encoding", Paradigm::ContentEncoding, false),
            line("id-based", Paradigm::IdBased, dual),
            line("embedding-based", Paradigm::EmbeddingBased, dual),
            line("semantic-token", Paradigm::SemanticToken, dual)};
}

struct EvalSplit {
    std::vector<LabeledPair> train;
    GroupedScores eval;  // scores filled later
    std::vector<LabeledPair> eval_pairs;
};

EvalSplit split_samples(const Catalog& cat, const TokenStage& toks, double holdout,
                        bool user_tokens) {
    std::set<std::string> test = test_groups(cat, holdout);
    EvalSplit out;
    for (const auto& imp : cat.impressions) {
        LabeledPair p;
        p.item_code = toks.item_tokens.at(imp.item);
        if (user_tokens) p.user_code = toks.user_tokens.at(imp.user);
        p.label = imp.label;
        if (test.count(imp.group)) {
            out.eval_pairs.push_back(p);
            out.eval.labels.push_back(imp.label);
            out.eval.groups.push_back(imp.group);
        } else {
            out.train.push_back(p);
        }
    }
    return out;
}

EvalReport finish_report(const Catalog& cat, const PipelineConfig& cfg,
                         const TokenStage& toks, GroupedScores eval) {
    EvalReport rep;
    rep.mode = to_string(cfg.mode);
    rep.base = to_string(cfg.base);
    rep.aggregation = to_string(cfg.aggregation);
    rep.config = config_hash(cfg);
    rep.item_collision_rate = toks.item_collision_rate;
    int skipped = 0;
    rep.auc = grouped_auc(eval, &skipped);
    rep.skipped_groups = skipped;
    rep.ndcg5 = grouped_ndcg_at_k(eval, 5);
    std::set<std::string> gs(eval.groups.begin(), eval.groups.end());
    rep.eval_groups = static_cast<int>(gs.size()) - skipped;
    rep.memory_lines = memory_lines_for(cat, cfg);
    return rep;
}

void persist(const PipelineConfig& cfg, const TokenStage& toks, const HmiHead* head,
             const EvalReport& rep) {
    if (cfg.artifact_dir.empty()) return;
    namespace fs = std::filesystem;
    fs::create_directories(cfg.artifact_dir);
    fs::path dir(cfg.artifact_dir);
    write_cache((dir / "item_z.stkc").string(), toks.item_z);
    write_tokens((dir / "item_tokens.tsv").string(), toks.item_tokens);
    if (!toks.user_tokens.empty())
        write_tokens((dir / "user_tokens.tsv").string(), toks.user_tokens);
    if (head) save_head((dir / "head.stkp").string(), *head);
    std::ofstream txt(dir / "report.txt");
    txt << rep.to_text();
    std::ofstream js(dir / "report.jsonl");
    js << rep.to_json() << "\n";
}

// Item-only tokenization: item tables and scorer as in the full head, user
// vector produced online by a 1-layer encoder+pooler over the summed item
// embeddings of the history.
struct IstModel {
    PipelineConfig cfg;
    Catalog const* cat;
    ParamSet head_ps;          // t0..tK-1 + scorer.*
    PairScorer scorer;
    SeqAutoencoder encoder;    // frozen input; its own trainable params
    std::map<std::string, int> item_row;
    std::map<std::string, std::vector<int>> const* item_tokens;

    IstModel(const Catalog& c, const PipelineConfig& p, const TokenTable& tokens)
        : cfg(p), cat(&c), scorer(p.base, p.dim), encoder(make_encoder(c, p)),
          item_tokens(&tokens) {
        std::mt19937_64 rng(p.seed + 4);
        for (int k = 0; k < p.depth; ++k)
            head_ps.add("t" + std::to_string(k),
                        Tensor::randn(p.codebook_size, p.dim, rng, 0.1));
        scorer.init_params(head_ps, "scorer.", rng);
        for (size_t r = 0; r < c.item_ids.size(); ++r)
            item_row[c.item_ids[r]] = static_cast<int>(r);
    }

    static SeqAutoencoder make_encoder(const Catalog& c, const PipelineConfig& p) {
        SeqRepConfig e;
        e.vocab_in = e.vocab_out = static_cast<int>(c.item_ids.size());
        e.dim = p.dim;
        e.layers = 1;
        e.epochs = 0;
        e.seed = p.seed + 5;
        e.dropout = 0.0;
        SeqAutoencoder m = SeqAutoencoder::init(e);
        m.freeze_input_embeddings(Tensor(e.vocab_in, p.dim));
        return m;
    }

    // summed item embedding table under the current parameters
    Tensor item_table() const {
        Tensor t(static_cast<int>(cat->item_ids.size()), cfg.dim);
        for (size_t r = 0; r < cat->item_ids.size(); ++r) {
            const auto& code = item_tokens->at(cat->item_ids[r]);
            for (int k = 0; k < cfg.depth; ++k) {
                const Tensor& tbl = head_ps.at("t" + std::to_string(k));
                for (int c = 0; c < cfg.dim; ++c)
                    t.at(static_cast<int>(r), c) += tbl.at(code[k], c);
            }
        }
        return t;
    }

    std::vector<int> history_rows(const std::string& user) const {
        std::vector<int> rows;
        for (const auto& iid : cat->users.at(user)) rows.push_back(item_row.at(iid));
        return rows;
    }

    NodeId item_node(Graph& g, const std::string& item) const {
        const auto& code = item_tokens->at(item);
        NodeId acc = -1;
        for (int k = 0; k < cfg.depth; ++k) {
            NodeId e = g.gather_rows(g.param(head_ps, "t" + std::to_string(k)), {code[k]});
            acc = k == 0 ? e : g.add(acc, e);
        }
        return acc;
    }

    NodeId score_node(Graph& g, const std::string& user, const std::string& item) const {
        NodeId z = encoder.encode_pool_node(g, history_rows(user));
        return scorer.score(g, head_ps, "scorer.", z, item_node(g, item));
    }

    double predict(const std::string& user, const std::string& item) const {
        Graph g;
        return g.value(g.sigmoid(score_node(g, user, item))).item();
    }
};

EvalReport run_ist(const Catalog& cat, const PipelineConfig& cfg, TokenStage toks) {
    IstModel model(cat, cfg, toks.item_tokens);
    std::set<std::string> test = test_groups(cat, cfg.holdout);

    std::vector<const Impression*> train;
    GroupedScores eval;
    std::vector<const Impression*> eval_imps;
    for (const auto& imp : cat.impressions) {
        if (test.count(imp.group)) {
            eval_imps.push_back(&imp);
            eval.labels.push_back(imp.label);
            eval.groups.push_back(imp.group);
        } else {
            train.push_back(&imp);
        }
    }

    std::mt19937_64 rng(cfg.seed + 6);
    Adam opt_head(cfg.lr), opt_enc(cfg.lr);
    for (int epoch = 0; epoch < cfg.head_epochs; ++epoch) {
        // the encoder reads the item embeddings as a constant table; refresh
        // it from the current parameters once per epoch
        model.encoder.freeze_input_embeddings(model.item_table());
        std::shuffle(train.begin(), train.end(), rng);
        for (size_t start = 0; start < train.size();
             start += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(train.size(), start + cfg.batch_size);
            GradMap head_g, enc_g;
            for (size_t i = start; i < end; ++i) {
                const Impression& imp = *train[i];
                Graph g;
                NodeId p = g.clamp(g.sigmoid(model.score_node(g, imp.user, imp.item)),
                                   1e-7, 1.0 - 1e-7);
                NodeId loss = imp.label == 1
                                  ? g.scale(g.log(p), -1.0)
                                  : g.scale(g.log(g.sub(g.scalar(1.0), p)), -1.0);
                g.backward(loss);
                double scale = 1.0 / static_cast<double>(end - start);
                for (const auto& [name, grad] : g.grads()) {
                    GradMap& dst = model.head_ps.has(name) ? head_g : enc_g;
                    accumulate(dst, GradMap{{name, grad}}, scale);
                }
            }
            opt_head.step(model.head_ps, head_g);
            opt_enc.step(model.encoder.params(), enc_g);
        }
    }
    model.encoder.freeze_input_embeddings(model.item_table());

    std::map<std::string, Tensor> user_cache;
    for (const Impression* imp : eval_imps) {
        auto it = user_cache.find(imp->user);
        if (it == user_cache.end())
            it = user_cache.emplace(imp->user, model.encoder.encode_pool(
                                                   model.history_rows(imp->user))).first;
        Graph g;
        NodeId s = model.scorer.score(g, model.head_ps, "scorer.", g.constant(it->second),
                                      model.item_node(g, imp->item));
        eval.scores.push_back(g.value(g.sigmoid(s)).item());
    }

    EvalReport rep = finish_report(cat, cfg, toks, eval);
    const Impression& probe = *eval_imps.front();
    rep.latency = latency_probe([&] { model.predict(probe.user, probe.item); }, 40);
    persist(cfg, toks, nullptr, rep);
    return rep;
}

HmiConfig head_config(const PipelineConfig& cfg) {
    HmiConfig h;
    h.depth = cfg.depth;
    h.codebook_size = cfg.codebook_size;
    h.dim = cfg.dim;
    h.base = cfg.base;
    h.aggregation = cfg.aggregation;
    h.epochs = cfg.head_epochs;
    h.batch_size = 64;
    h.lr = cfg.lr;
    h.seed = cfg.seed + 4;
    return h;
}

}  // namespace

TokenizationResult tokenize_items(const Catalog& cat, const PipelineConfig& cfg) {
    validate(cfg);
    TokenStage toks = build_token_stage(cat, cfg, false);
    return {std::move(toks.item_z), std::move(toks.item_tokens), toks.item_collision_rate};
}

TokenizationResult tokenize_users(const Catalog& cat, const PipelineConfig& cfg) {
    validate(cfg);
    if (cfg.mode == Mode::Ist)
        throw Error(ErrKind::Config, "item-only mode has no user tokenization stage");
    TokenStage toks = build_token_stage(cat, cfg, true);
    return {std::move(toks.user_z), std::move(toks.user_tokens), 0.0};
}

EvalReport run_pipeline(const Catalog& cat, const PipelineConfig& cfg) {
    validate(cfg);
    if (cat.impressions.empty()) throw Error(ErrKind::Data, "catalog has no impressions");
    TokenStage toks = build_token_stage(cat, cfg, cfg.mode == Mode::Uist);
    if (cfg.mode == Mode::Ist) return run_ist(cat, cfg, std::move(toks));

    EvalSplit split = split_samples(cat, toks, cfg.holdout, true);
    HmiHead head = HmiHead::init(head_config(cfg));
    HmiTrainResult tr = stage("head-training", [&] { return train_head(head, split.train); });

    for (const auto& p : split.eval_pairs)
        split.eval.scores.push_back(head.predict(p.user_code, p.item_code));

    EvalReport rep = finish_report(cat, cfg, toks, split.eval);
    rep.head_loss_trace = tr.loss_trace;
    const LabeledPair& probe = split.eval_pairs.front();
    rep.latency = latency_probe([&] { head.predict(probe.user_code, probe.item_code); }, 40);
    persist(cfg, toks, &head, rep);
    return rep;
}

EvalReport run_pipeline(const PipelineConfig& cfg) {
    bool have_paths = !cfg.paths.items_jsonl.empty() || !cfg.paths.users_jsonl.empty() ||
                      !cfg.paths.impressions_tsv.empty();
    Catalog cat = have_paths ? load_catalog(cfg.paths) : synthesize_catalog(cfg.synth);
    return run_pipeline(cat, cfg);
}

std::vector<AggComparisonRow> compare_aggregations(const Catalog& cat,
                                                   const PipelineConfig& cfg) {
    validate(cfg);
    TokenStage toks = build_token_stage(cat, cfg, true);
    EvalSplit split = split_samples(cat, toks, cfg.holdout, true);

    std::vector<AggComparisonRow> rows;
    for (Aggregation agg : {Aggregation::Add, Aggregation::Layer, Aggregation::Hmi}) {
        PipelineConfig c = cfg;
        c.aggregation = agg;
        HmiHead head = HmiHead::init(head_config(c));
        train_head(head, split.train);

        AggComparisonRow row;
        row.aggregation = agg;
        GroupedScores eval = split.eval;
        eval.scores.clear();
        head.scorer().reset_calls();
        for (const auto& p : split.eval_pairs)
            eval.scores.push_back(head.predict(p.user_code, p.item_code));
        row.scorer_calls_per_sample =
            head.scorer().calls() / static_cast<long>(split.eval_pairs.size());
        row.auc = grouped_auc(eval);
        row.ndcg5 = grouped_ndcg_at_k(eval, 5);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace stk
