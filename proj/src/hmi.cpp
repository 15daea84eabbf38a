#include "stk/hmi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "stk/optim.hpp"

namespace stk {

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "hmi") return Aggregation::Hmi;
    if (s == "add") return Aggregation::Add;
    if (s == "layer") return Aggregation::Layer;
    throw Error(ErrKind::Config, "unknown aggregation: " + s);
}

std::string to_string(Aggregation agg) {
    switch (agg) {
        case Aggregation::Hmi: return "hmi";
        case Aggregation::Add: return "add";
        case Aggregation::Layer: return "layer";
    }
    return "?";
}

std::vector<Tensor> coarse_to_fine(const std::vector<Tensor>& tables,
                                   const std::vector<int>& code) {
    if (code.size() != tables.size())
        throw Error(ErrKind::Config, "coarse_to_fine: code length != table count");
    std::vector<Tensor> out;
    Tensor acc(1, tables[0].cols());
    for (size_t k = 0; k < code.size(); ++k) {
        if (code[k] < 0 || code[k] >= tables[k].rows())
            throw Error(ErrKind::Data, "coarse_to_fine: code index out of range");
        for (int c = 0; c < acc.cols(); ++c) acc.at(0, c) += tables[k].at(code[k], c);
        out.push_back(acc);
    }
    return out;
}

double bce(double p, int label) {
    if (label != 0 && label != 1) throw Error(ErrKind::Data, "bce: label must be 0 or 1");
    p = std::clamp(p, 1e-7, 1.0 - 1e-7);
    return -(label * std::log(p) + (1 - label) * std::log(1.0 - p));
}

HmiHead HmiHead::init(const HmiConfig& cfg) {
    if (cfg.depth < 1 || cfg.codebook_size < 1 || cfg.dim < 1)
        throw Error(ErrKind::Config, "hmi: depth, codebook size and dim must be positive");
    HmiHead h(cfg);
    std::mt19937_64 rng(cfg.seed);
    for (int k = 0; k < cfg.depth; ++k) {
        h.params_.add("u" + std::to_string(k),
                      Tensor::randn(cfg.codebook_size, cfg.dim, rng, 0.1));
        h.params_.add("t" + std::to_string(k),
                      Tensor::randn(cfg.codebook_size, cfg.dim, rng, 0.1));
    }
    h.scorer_.init_params(h.params_, "scorer.", rng);
    switch (cfg.aggregation) {
        case Aggregation::Hmi:
            h.params_.add("mix.w", Tensor(1, cfg.depth * cfg.depth, 1.0 / (cfg.depth * cfg.depth)));
            h.params_.add("mix.b", Tensor(1, 1));
            break;
        case Aggregation::Layer:
            h.params_.add("mix.w", Tensor(1, cfg.depth, 1.0 / cfg.depth));
            h.params_.add("mix.b", Tensor(1, 1));
            break;
        case Aggregation::Add:
            break;
    }
    return h;
}

std::vector<NodeId> HmiHead::coarse_nodes(Graph& g, const char* side,
                                          const std::vector<int>& code) const {
    if (static_cast<int>(code.size()) != cfg_.depth)
        throw Error(ErrKind::Data, "token code length != head depth");
    std::vector<NodeId> out;
    NodeId acc = -1;
    for (int k = 0; k < cfg_.depth; ++k) {
        NodeId e = g.gather_rows(g.param(params_, side + std::to_string(k)), {code[k]});
        acc = k == 0 ? e : g.add(acc, e);
        out.push_back(acc);
    }
    return out;
}

NodeId HmiHead::predict_node(Graph& g, const std::vector<int>& user_code,
                             const std::vector<int>& item_code, Tensor* grid) const {
    auto eu = coarse_nodes(g, "u", user_code);
    auto et = coarse_nodes(g, "t", item_code);
    int k = cfg_.depth;

    switch (cfg_.aggregation) {
        case Aggregation::Hmi: {
            if (grid) *grid = Tensor(k, k);
            std::vector<NodeId> scores;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    NodeId s = scorer_.score(g, params_, "scorer.", eu[i], et[j]);
                    if (!g.value(s).finite())
                        throw Error(ErrKind::Numeric, "NaN base-model score");
                    if (grid) grid->at(i, j) = g.value(s).item();
                    scores.push_back(s);
                }
            NodeId row = g.concat_cols(scores);  // [1, K*K]
            NodeId mixed = g.add(g.sum(g.mul(row, g.param(params_, "mix.w"))),
                                 g.param(params_, "mix.b"));
            return g.sigmoid(mixed);
        }
        case Aggregation::Add: {
            NodeId s = scorer_.score(g, params_, "scorer.", eu[k - 1], et[k - 1]);
            if (!g.value(s).finite()) throw Error(ErrKind::Numeric, "NaN base-model score");
            return g.sigmoid(s);
        }
        case Aggregation::Layer: {
            // diagonal pairs on the raw per-layer embeddings
            std::vector<NodeId> scores;
            for (int i = 0; i < k; ++i) {
                NodeId eui = i == 0 ? eu[0] : g.sub(eu[i], eu[i - 1]);
                NodeId eti = i == 0 ? et[0] : g.sub(et[i], et[i - 1]);
                NodeId s = scorer_.score(g, params_, "scorer.", eui, eti);
                if (!g.value(s).finite()) throw Error(ErrKind::Numeric, "NaN base-model score");
                scores.push_back(s);
            }
            NodeId row = g.concat_cols(scores);
            NodeId mixed = g.add(g.sum(g.mul(row, g.param(params_, "mix.w"))),
                                 g.param(params_, "mix.b"));
            return g.sigmoid(mixed);
        }
    }
    throw Error(ErrKind::Config, "unreachable aggregation");
}

double HmiHead::predict(const std::vector<int>& user_code, const std::vector<int>& item_code,
                        Tensor* grid) const {
    Graph g;
    return g.value(predict_node(g, user_code, item_code, grid)).item();
}

NodeId HmiHead::loss_node(Graph& g, const LabeledPair& sample) const {
    if (sample.label != 0 && sample.label != 1)
        throw Error(ErrKind::Data, "loss_node: label must be 0 or 1");
    NodeId p = g.clamp(predict_node(g, sample.user_code, sample.item_code), 1e-7, 1.0 - 1e-7);
    NodeId pos = g.log(p);
    NodeId neg = g.log(g.sub(g.scalar(1.0), p));
    NodeId l = g.scalar(static_cast<double>(sample.label));
    NodeId one_minus_l = g.scalar(1.0 - sample.label);
    return g.scale(g.add(g.mul(l, pos), g.mul(one_minus_l, neg)), -1.0);
}

Tensor HmiHead::item_embedding_sum(const std::vector<int>& item_code) const {
    std::vector<Tensor> tables;
    for (int k = 0; k < cfg_.depth; ++k) tables.push_back(params_.at("t" + std::to_string(k)));
    return coarse_to_fine(tables, item_code).back();
}

HmiTrainResult train_head(HmiHead& head, const std::vector<LabeledPair>& samples) {
    if (samples.empty()) throw Error(ErrKind::Data, "train_head: no samples");
    const HmiConfig& cfg = head.config();
    std::mt19937_64 rng(cfg.seed + 0x5bd1e995ULL);
    Adam opt(cfg.lr);
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    HmiTrainResult res;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            GradMap grads;
            for (size_t i = start; i < end; ++i) {
                Graph g;
                NodeId loss = head.loss_node(g, samples[order[i]]);
                epoch_loss += g.value(loss).item();
                g.backward(loss);
                accumulate(grads, g.grads(), 1.0 / static_cast<double>(end - start));
            }
            opt.step(head.params(), grads);
        }
        res.loss_trace.push_back(epoch_loss / static_cast<double>(samples.size()));
    }
    return res;
}

static constexpr char kHeadMagic[4] = {'S', 'T', 'K', 'P'};
static constexpr uint32_t kHeadVersion = 1;

void save_head(const std::string& path, const HmiHead& head) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrKind::Data, "cannot write " + path);
    auto put32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    f.write(kHeadMagic, 4);
    put32(kHeadVersion);
    const HmiConfig& cfg = head.config();
    put32(static_cast<uint32_t>(cfg.depth));
    put32(static_cast<uint32_t>(cfg.codebook_size));
    put32(static_cast<uint32_t>(cfg.dim));
    put32(static_cast<uint32_t>(cfg.base));
    put32(static_cast<uint32_t>(cfg.aggregation));

    const ParamSet& ps = head.params();
    put32(static_cast<uint32_t>(ps.names().size()));
    for (const auto& name : ps.names()) {
        put32(static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Tensor& t = ps.at(name);
        put32(static_cast<uint32_t>(t.rows()));
        put32(static_cast<uint32_t>(t.cols()));
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!f) throw Error(ErrKind::Data, "short write to " + path);
}

HmiHead load_head(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrKind::Data, "cannot open " + path);
    auto get32 = [&]() {
        uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        if (!f) throw Error(ErrKind::Data, path + ": truncated head checkpoint");
        return v;
    };
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kHeadMagic, 4) != 0)
        throw Error(ErrKind::Data, path + ": bad magic, not a head checkpoint");
    if (get32() != kHeadVersion)
        throw Error(ErrKind::Data, path + ": unsupported checkpoint version");

    HmiConfig cfg;
    cfg.depth = static_cast<int>(get32());
    cfg.codebook_size = static_cast<int>(get32());
    cfg.dim = static_cast<int>(get32());
    cfg.base = static_cast<ScorerKind>(get32());
    cfg.aggregation = static_cast<Aggregation>(get32());

    HmiHead head = HmiHead::init(cfg);
    uint32_t count = get32();
    if (count != head.params().names().size())
        throw Error(ErrKind::Data, path + ": parameter count mismatch");
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t len = get32();
        std::string name(len, '\0');
        f.read(name.data(), len);
        uint32_t rows = get32(), cols = get32();
        Tensor& t = head.params().at(name);
        if (t.rows() != static_cast<int>(rows) || t.cols() != static_cast<int>(cols))
            throw Error(ErrKind::Data, path + ": shape mismatch for " + name);
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!f) throw Error(ErrKind::Data, path + ": truncated tensor data");
    }
    return head;
}

}  // namespace stk
