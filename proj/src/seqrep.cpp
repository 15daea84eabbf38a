#include "stk/seqrep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "stk/optim.hpp"

namespace stk {

Corpus strip_padding(const Corpus& rows, int pad_id) {
    Corpus out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        auto end = row.end();
        while (end != row.begin() && *(end - 1) == pad_id) --end;
        out.emplace_back(row.begin(), end);
    }
    return out;
}

std::vector<int> whitespace_tokenize(const std::string& text,
                                     std::vector<std::string>& vocab) {
    std::istringstream ss(text);
    std::vector<int> ids;
    std::string word;
    while (ss >> word) {
        auto it = std::find(vocab.begin(), vocab.end(), word);
        if (it == vocab.end()) {
            vocab.push_back(word);
            ids.push_back(static_cast<int>(vocab.size()) - 1);
        } else {
            ids.push_back(static_cast<int>(it - vocab.begin()));
        }
    }
    return ids;
}

static Tensor sinusoidal_positions(int len, int dim) {
    Tensor pos(len, dim);
    for (int p = 0; p < len; ++p)
        for (int c = 0; c < dim; ++c) {
            double angle = p / std::pow(10000.0, 2.0 * (c / 2) / dim);
            pos.at(p, c) = c % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    return pos;
}

SeqAutoencoder SeqAutoencoder::init(const SeqRepConfig& cfg) {
    if (cfg.layers < 1) throw Error(ErrKind::Config, "seqrep: need at least one layer");
    if (cfg.dim % cfg.heads != 0)
        throw Error(ErrKind::Config, "seqrep: dim must be divisible by head count");
    if (cfg.vocab_in < 1 || cfg.vocab_out < 1)
        throw Error(ErrKind::Config, "seqrep: vocab sizes must be positive");

    SeqAutoencoder m;
    m.cfg_ = cfg;
    std::mt19937_64 rng(cfg.seed);
    int d = cfg.dim, f = cfg.dim * cfg.ffn_mult;
    double s = 1.0 / std::sqrt(static_cast<double>(d));
    double sf = 1.0 / std::sqrt(static_cast<double>(f));

    m.params_.add("emb", Tensor::randn(cfg.vocab_in, d, rng, 0.1));
    // row vocab_out is the BOS marker
    m.params_.add("dec_emb", Tensor::randn(cfg.vocab_out + 1, d, rng, 0.1));

    auto attn_block = [&](const std::string& p) {
        m.params_.add(p + "wq", Tensor::randn(d, d, rng, s));
        m.params_.add(p + "wk", Tensor::randn(d, d, rng, s));
        m.params_.add(p + "wv", Tensor::randn(d, d, rng, s));
        m.params_.add(p + "wo", Tensor::randn(d, d, rng, s));
    };
    auto ffn_block = [&](const std::string& p) {
        m.params_.add(p + "ff1", Tensor::randn(d, f, rng, s));
        m.params_.add(p + "fb1", Tensor(1, f));
        m.params_.add(p + "ff2", Tensor::randn(f, d, rng, sf));
        m.params_.add(p + "fb2", Tensor(1, d));
    };
    for (int h = 0; h < cfg.layers; ++h) {
        std::string p = "enc" + std::to_string(h) + ".";
        attn_block(p);
        ffn_block(p);
    }
    for (int h = 0; h < cfg.layers; ++h) {
        std::string p = "dec" + std::to_string(h) + ".";
        attn_block(p);
        attn_block(p + "x");  // cross-attention onto z
        ffn_block(p);
    }
    m.params_.add("pool.w", Tensor::randn(d, d, rng, s));
    m.params_.add("pool.b", Tensor(1, d));
    m.params_.add("pool.v", Tensor::randn(d, 1, rng, s));
    m.params_.add("g.w1", Tensor::randn(d, d, rng, s));
    m.params_.add("g.b1", Tensor(1, d));
    m.params_.add("g.w2", Tensor::randn(d, cfg.vocab_out, rng, s));
    m.params_.add("g.b2", Tensor(1, cfg.vocab_out));
    return m;
}

void SeqAutoencoder::freeze_input_embeddings(const Tensor& table) {
    if (table.rows() != cfg_.vocab_in || table.cols() != cfg_.dim)
        throw Error(ErrKind::Config, "frozen embedding table shape mismatch");
    frozen_ = true;
    frozen_table_ = table;
}

NodeId SeqAutoencoder::input_embedding(Graph& g, const std::vector<int>& seq) const {
    for (int id : seq)
        if (id < 0 || id >= cfg_.vocab_in)
            throw Error(ErrKind::Data, "sequence token outside input vocabulary");
    NodeId table = frozen_ ? g.constant(frozen_table_) : g.param(params_, "emb");
    NodeId e = g.gather_rows(table, seq);
    return g.add(e, g.constant(sinusoidal_positions(static_cast<int>(seq.size()), cfg_.dim)));
}

static NodeId dropout_node(Graph& g, NodeId x, double rate, std::mt19937_64* rng) {
    if (rng == nullptr || rate <= 0.0) return x;
    const Tensor& v = g.value(x);
    Tensor mask(v.rows(), v.cols());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double keep = 1.0 - rate;
    for (size_t i = 0; i < mask.size(); ++i) mask[i] = u(*rng) < keep ? 1.0 / keep : 0.0;
    return g.mul(x, g.constant(mask));
}

namespace {

// multi-head attention: queries from x, keys/values from mem
NodeId attention(Graph& g, const ParamSet& ps, const std::string& p, NodeId x, NodeId mem,
                 int heads, bool causal) {
    int d = g.value(x).cols();
    int dh = d / heads;
    NodeId q = g.matmul(x, g.param(ps, p + "wq"));
    NodeId k = g.matmul(mem, g.param(ps, p + "wk"));
    NodeId v = g.matmul(mem, g.param(ps, p + "wv"));

    NodeId mask = -1;
    if (causal) {
        int len = g.value(x).rows();
        Tensor m(len, len);
        for (int i = 0; i < len; ++i)
            for (int j = i + 1; j < len; ++j) m.at(i, j) = -1e9;
        mask = g.constant(std::move(m));
    }

    std::vector<NodeId> outs;
    for (int h = 0; h < heads; ++h) {
        NodeId qh = g.slice_cols(q, h * dh, dh);
        NodeId kh = g.slice_cols(k, h * dh, dh);
        NodeId vh = g.slice_cols(v, h * dh, dh);
        NodeId scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(dh));
        if (mask >= 0) scores = g.add(scores, mask);
        outs.push_back(g.matmul(g.softmax_rows(scores), vh));
    }
    return g.matmul(g.concat_cols(outs), g.param(ps, p + "wo"));
}

NodeId feed_forward(Graph& g, const ParamSet& ps, const std::string& p, NodeId x) {
    NodeId h = g.relu(g.add(g.matmul(x, g.param(ps, p + "ff1")), g.param(ps, p + "fb1")));
    return g.add(g.matmul(h, g.param(ps, p + "ff2")), g.param(ps, p + "fb2"));
}

}  // namespace

NodeId SeqAutoencoder::encoder_stack(Graph& g, NodeId x, std::mt19937_64* rng) const {
    for (int h = 0; h < cfg_.layers; ++h) {
        std::string p = "enc" + std::to_string(h) + ".";
        NodeId n = g.layer_norm_rows(x);
        x = g.add(x, dropout_node(g, attention(g, params_, p, n, n, cfg_.heads, false),
                                  cfg_.dropout, rng));
        x = g.add(x, dropout_node(g, feed_forward(g, params_, p, g.layer_norm_rows(x)),
                                  cfg_.dropout, rng));
    }
    return g.layer_norm_rows(x);
}

NodeId SeqAutoencoder::decoder_stack(Graph& g, NodeId x, NodeId z, std::mt19937_64* rng) const {
    for (int h = 0; h < cfg_.layers; ++h) {
        std::string p = "dec" + std::to_string(h) + ".";
        NodeId n = g.layer_norm_rows(x);
        x = g.add(x, dropout_node(g, attention(g, params_, p, n, n, cfg_.heads, true),
                                  cfg_.dropout, rng));
        x = g.add(x, dropout_node(g, attention(g, params_, p + "x", g.layer_norm_rows(x), z,
                                               cfg_.heads, false),
                                  cfg_.dropout, rng));
        x = g.add(x, dropout_node(g, feed_forward(g, params_, p, g.layer_norm_rows(x)),
                                  cfg_.dropout, rng));
    }
    return g.layer_norm_rows(x);
}

NodeId SeqAutoencoder::encode_pool_node(Graph& g, const std::vector<int>& seq,
                                        std::mt19937_64* rng) const {
    if (seq.empty()) throw Error(ErrKind::Data, "encode_pool: empty sequence");
    NodeId e = encoder_stack(g, input_embedding(g, seq), rng);
    NodeId scores = g.matmul(
        g.tanh(g.add(g.matmul(e, g.param(params_, "pool.w")), g.param(params_, "pool.b"))),
        g.param(params_, "pool.v"));  // [L,1]
    NodeId alpha = g.softmax_rows(g.transpose(scores));  // [1,L]
    return g.matmul(alpha, e);
}

Tensor SeqAutoencoder::encode_pool(const std::vector<int>& seq) const {
    Graph g;
    return g.value(encode_pool_node(g, seq));
}

Tensor SeqAutoencoder::pooler_weights(const std::vector<int>& seq) const {
    Graph g;
    NodeId e = encoder_stack(g, input_embedding(g, seq), nullptr);
    NodeId scores = g.matmul(
        g.tanh(g.add(g.matmul(e, g.param(params_, "pool.w")), g.param(params_, "pool.b"))),
        g.param(params_, "pool.v"));
    return g.value(g.softmax_rows(g.transpose(scores)));
}

Tensor SeqAutoencoder::encoder_states(const std::vector<int>& seq) const {
    Graph g;
    return g.value(encoder_stack(g, input_embedding(g, seq), nullptr));
}

Tensor SeqAutoencoder::decoder_logits(const std::vector<int>& seq,
                                      const Tensor* z_override) const {
    Graph g;
    NodeId z = z_override ? g.constant(*z_override) : encode_pool_node(g, seq);
    std::vector<int> dec_in{cfg_.vocab_out};  // BOS
    for (size_t i = 0; i + 1 < seq.size(); ++i) dec_in.push_back(seq[i]);
    NodeId x = g.add(g.gather_rows(g.param(params_, "dec_emb"), dec_in),
                     g.constant(sinusoidal_positions(static_cast<int>(dec_in.size()), cfg_.dim)));
    NodeId dh = decoder_stack(g, x, z, nullptr);
    NodeId hid = g.tanh(g.add(g.matmul(dh, g.param(params_, "g.w1")), g.param(params_, "g.b1")));
    return g.value(g.add(g.matmul(hid, g.param(params_, "g.w2")), g.param(params_, "g.b2")));
}

NodeId SeqAutoencoder::reconstruction_loss_node(Graph& g, const std::vector<int>& seq,
                                                std::mt19937_64* rng) const {
    if (seq.empty()) throw Error(ErrKind::Data, "reconstruction_loss: empty sequence");
    for (int id : seq)
        if (id < 0 || id >= cfg_.vocab_out)
            throw Error(ErrKind::Data, "target token outside output vocabulary");

    NodeId z = encode_pool_node(g, seq, rng);
    std::vector<int> dec_in{cfg_.vocab_out};  // BOS, shifted-right targets
    for (size_t i = 0; i + 1 < seq.size(); ++i) dec_in.push_back(seq[i]);
    NodeId x = g.add(g.gather_rows(g.param(params_, "dec_emb"), dec_in),
                     g.constant(sinusoidal_positions(static_cast<int>(dec_in.size()), cfg_.dim)));
    NodeId dh = decoder_stack(g, x, z, rng);
    NodeId hid = g.tanh(g.add(g.matmul(dh, g.param(params_, "g.w1")), g.param(params_, "g.b1")));
    NodeId logits = g.add(g.matmul(hid, g.param(params_, "g.w2")), g.param(params_, "g.b2"));
    NodeId ll = g.pick(g.log_softmax_rows(logits), seq);
    return g.scale(g.sum(ll), -1.0 / static_cast<double>(seq.size()));
}

double SeqAutoencoder::reconstruction_loss(const std::vector<int>& seq) const {
    Graph g;
    return g.value(reconstruction_loss_node(g, seq)).item();
}

double SeqAutoencoder::reconstruction_loss(const Corpus& rows) const {
    if (rows.empty()) throw Error(ErrKind::Data, "reconstruction_loss: empty corpus");
    double acc = 0.0;
    for (const auto& row : rows) acc += reconstruction_loss(row);
    return acc / static_cast<double>(rows.size());
}

static SeqTrainResult train_prepared(SeqTrainResult res, const Corpus& corpus,
                                     const SeqRepConfig& cfg) {
    SeqAutoencoder& model = res.model;
    std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ULL);

    Adam opt(cfg.lr);
    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    long step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        size_t counted = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            GradMap batch_grads;
            double batch_loss = 0.0;
            size_t n = 0;
            for (size_t i = start; i < end; ++i) {
                const auto& seq = corpus[order[i]];
                if (seq.empty()) continue;
                Graph g;
                NodeId loss = model.reconstruction_loss_node(g, seq, &rng);
                double lv = g.value(loss).item();
                if (!std::isfinite(lv))
                    throw Error(ErrKind::Numeric,
                                "training diverged at step " + std::to_string(step));
                g.backward(loss);
                accumulate(batch_grads, g.grads());
                batch_loss += lv;
                ++n;
            }
            if (n == 0) continue;
            GradMap scaled;
            accumulate(scaled, batch_grads, 1.0 / static_cast<double>(n));
            opt.step(model.params(), scaled);
            epoch_loss += batch_loss;
            counted += n;
            ++step;
        }
        res.loss_trace.push_back(epoch_loss / static_cast<double>(counted));
    }
    return res;
}

SeqTrainResult train_autoencoder(const Corpus& corpus, const SeqRepConfig& cfg) {
    if (corpus.empty()) throw Error(ErrKind::Data, "train_autoencoder: empty corpus");
    return train_prepared({SeqAutoencoder::init(cfg), {}}, corpus, cfg);
}

SeqTrainResult train_autoencoder(const Corpus& corpus, const SeqRepConfig& cfg,
                                 const Tensor& frozen_input) {
    if (corpus.empty()) throw Error(ErrKind::Data, "train_autoencoder: empty corpus");
    SeqTrainResult res{SeqAutoencoder::init(cfg), {}};
    res.model.freeze_input_embeddings(frozen_input);
    return train_prepared(std::move(res), corpus, cfg);
}

EmbeddingTable represent_corpus(const SeqAutoencoder& model,
                                const std::vector<std::string>& ids, const Corpus& rows) {
    if (ids.size() != rows.size())
        throw Error(ErrKind::Data, "represent_corpus: ids/rows length mismatch");
    std::set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second)
            throw Error(ErrKind::Data, "represent_corpus: duplicate entity id " + id);

    EmbeddingTable t;
    t.ids = ids;
    t.matrix = Tensor(static_cast<int>(rows.size()), model.config().dim);
    for (size_t r = 0; r < rows.size(); ++r) {
        Tensor z = model.encode_pool(rows[r]);
        for (int c = 0; c < z.cols(); ++c) t.matrix.at(static_cast<int>(r), c) = z.at(0, c);
    }
    return t;
}

}  // namespace stk
