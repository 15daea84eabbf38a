#include "stk/rqvae.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "stk/optim.hpp"

namespace stk {

static double row_distance(const Tensor& a, int ra, const Tensor& b, int rb, Distance g) {
    double acc = 0.0;
    for (int c = 0; c < a.cols(); ++c) {
        double diff = a.at(ra, c) - b.at(rb, c);
        acc += g == Distance::Euclidean ? diff * diff : std::abs(diff);
    }
    return acc;
}

QuantizeResult quantize(const std::vector<Tensor>& codebooks, const Tensor& v, Distance g) {
    if (codebooks.empty()) throw Error(ErrKind::Config, "quantize: no codebooks");
    if (!v.finite()) throw Error(ErrKind::Numeric, "quantize: NaN in input vector");
    QuantizeResult out;
    Tensor residual = v;  // [1,dq]
    out.residuals.push_back(residual);
    for (const Tensor& book : codebooks) {
        if (book.rows() == 0) throw Error(ErrKind::Config, "quantize: empty codebook");
        if (book.cols() != v.cols()) throw Error(ErrKind::Numeric, "quantize: dim mismatch");
        int best = 0;
        double best_d = row_distance(residual, 0, book, 0, g);
        for (int j = 1; j < book.rows(); ++j) {
            double d = row_distance(residual, 0, book, j, g);
            if (d < best_d) {  // strict: ties keep the smaller index
                best_d = d;
                best = j;
            }
        }
        out.code.push_back(best);
        for (int c = 0; c < residual.cols(); ++c) residual.at(0, c) -= book.at(best, c);
        out.residuals.push_back(residual);
    }
    return out;
}

Tensor approximate(const std::vector<Tensor>& codebooks, const std::vector<int>& code) {
    if (code.size() != codebooks.size())
        throw Error(ErrKind::Config, "approximate: code length != codebook count");
    Tensor out(1, codebooks[0].cols());
    for (size_t k = 0; k < code.size(); ++k) {
        if (code[k] < 0 || code[k] >= codebooks[k].rows())
            throw Error(ErrKind::Data, "approximate: code index out of range");
        for (int c = 0; c < out.cols(); ++c) out.at(0, c) += codebooks[k].at(code[k], c);
    }
    return out;
}

Tensor kmeans(const Tensor& data, int k, int iters, std::mt19937_64& rng, Distance g) {
    if (data.rows() < k) throw Error(ErrKind::Data, "kmeans: fewer rows than centroids");

    // k-means++ seeding
    Tensor centroids(k, data.cols());
    std::vector<double> d2(data.rows(), 1e300);
    int first = static_cast<int>(rng() % data.rows());
    for (int c = 0; c < data.cols(); ++c) centroids.at(0, c) = data.at(first, c);
    for (int j = 1; j < k; ++j) {
        double total = 0.0;
        for (int r = 0; r < data.rows(); ++r) {
            d2[r] = std::min(d2[r], row_distance(data, r, centroids, j - 1, Distance::Euclidean));
            total += d2[r];
        }
        int pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), acc = 0.0;
            for (int r = 0; r < data.rows(); ++r) {
                acc += d2[r];
                if (acc >= target) { pick = r; break; }
            }
        } else {
            pick = static_cast<int>(rng() % data.rows());
        }
        for (int c = 0; c < data.cols(); ++c) centroids.at(j, c) = data.at(pick, c);
    }

    std::vector<int> assign(data.rows());
    for (int it = 0; it < iters; ++it) {
        for (int r = 0; r < data.rows(); ++r) {
            int best = 0;
            double best_d = row_distance(data, r, centroids, 0, g);
            for (int j = 1; j < k; ++j) {
                double d = row_distance(data, r, centroids, j, g);
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            assign[r] = best;
        }
        Tensor sums(k, data.cols());
        std::vector<int> counts(k, 0);
        for (int r = 0; r < data.rows(); ++r) {
            ++counts[assign[r]];
            for (int c = 0; c < data.cols(); ++c) sums.at(assign[r], c) += data.at(r, c);
        }
        for (int j = 0; j < k; ++j) {
            if (counts[j] == 0) {
                // re-seed an empty centroid from a random row
                int r = static_cast<int>(rng() % data.rows());
                for (int c = 0; c < data.cols(); ++c) centroids.at(j, c) = data.at(r, c);
            } else {
                for (int c = 0; c < data.cols(); ++c)
                    centroids.at(j, c) = sums.at(j, c) / counts[j];
            }
        }
    }
    return centroids;
}

RqAutoencoder RqAutoencoder::init(const RqConfig& cfg) {
    if (cfg.depth < 1 || cfg.codebook_size < 1)
        throw Error(ErrKind::Config, "rqvae: depth and codebook size must be >= 1");
    if (cfg.beta <= 0.0) throw Error(ErrKind::Config, "rqvae: beta must be positive");

    RqAutoencoder m;
    m.cfg_ = cfg;
    std::mt19937_64 rng(cfg.seed);
    int d = cfg.input_dim, dq = cfg.dq();
    double s_in = 1.0 / std::sqrt(static_cast<double>(d));
    double s_q = 1.0 / std::sqrt(static_cast<double>(dq));
    if (cfg.linear_codec) {
        m.params_.add("enc.w1", Tensor::randn(d, dq, rng, s_in));
        m.params_.add("enc.b1", Tensor(1, dq));
        m.params_.add("dec.w1", Tensor::randn(dq, d, rng, s_q));
        m.params_.add("dec.b1", Tensor(1, d));
    } else {
        m.params_.add("enc.w1", Tensor::randn(d, dq, rng, s_in));
        m.params_.add("enc.b1", Tensor(1, dq));
        m.params_.add("enc.w2", Tensor::randn(dq, dq, rng, s_q));
        m.params_.add("enc.b2", Tensor(1, dq));
        m.params_.add("dec.w1", Tensor::randn(dq, dq, rng, s_q));
        m.params_.add("dec.b1", Tensor(1, dq));
        m.params_.add("dec.w2", Tensor::randn(dq, d, rng, s_q));
        m.params_.add("dec.b2", Tensor(1, d));
    }
    for (int k = 0; k < cfg.depth; ++k)
        m.params_.add("cb" + std::to_string(k),
                      Tensor::randn(cfg.codebook_size, dq, rng, 0.1));
    return m;
}

std::vector<Tensor> RqAutoencoder::codebooks() const {
    std::vector<Tensor> books;
    for (int k = 0; k < cfg_.depth; ++k) books.push_back(params_.at("cb" + std::to_string(k)));
    return books;
}

void RqAutoencoder::set_codebook(int layer, const Tensor& book) {
    Tensor& dst = params_.at("cb" + std::to_string(layer));
    if (!dst.same_shape(book)) throw Error(ErrKind::Config, "set_codebook shape mismatch");
    dst = book;
}

NodeId RqAutoencoder::encode_node(Graph& g, NodeId z) const {
    if (cfg_.linear_codec)
        return g.add(g.matmul(z, g.param(params_, "enc.w1")), g.param(params_, "enc.b1"));
    NodeId h = g.tanh(g.add(g.matmul(z, g.param(params_, "enc.w1")), g.param(params_, "enc.b1")));
    return g.add(g.matmul(h, g.param(params_, "enc.w2")), g.param(params_, "enc.b2"));
}

NodeId RqAutoencoder::decode_node(Graph& g, NodeId v) const {
    if (cfg_.linear_codec)
        return g.add(g.matmul(v, g.param(params_, "dec.w1")), g.param(params_, "dec.b1"));
    NodeId h = g.tanh(g.add(g.matmul(v, g.param(params_, "dec.w1")), g.param(params_, "dec.b1")));
    return g.add(g.matmul(h, g.param(params_, "dec.w2")), g.param(params_, "dec.b2"));
}

Tensor RqAutoencoder::encode(const Tensor& z_rows) const {
    Graph g;
    return g.value(encode_node(g, g.constant(z_rows)));
}

Tensor RqAutoencoder::decode(const Tensor& v_rows) const {
    Graph g;
    return g.value(decode_node(g, g.constant(v_rows)));
}

QuantizeResult RqAutoencoder::quantize_row(const Tensor& z_row) const {
    return quantize(codebooks(), encode(z_row), cfg_.distance);
}

NodeId RqAutoencoder::training_loss(Graph& g, const Tensor& z_rows, RqLossParts* parts) const {
    if (z_rows.rows() == 0) throw Error(ErrKind::Data, "training_loss: empty batch");
    int batch = z_rows.rows();
    auto books = codebooks();

    NodeId z = g.constant(z_rows);
    NodeId v = encode_node(g, z);

    // code assignment happens outside the tape
    std::vector<std::vector<int>> layer_ids(cfg_.depth, std::vector<int>(batch));
    {
        const Tensor& vv = g.value(v);
        for (int r = 0; r < batch; ++r) {
            Tensor row(1, vv.cols());
            for (int c = 0; c < vv.cols(); ++c) row.at(0, c) = vv.at(r, c);
            auto q = quantize(books, row, cfg_.distance);
            for (int k = 0; k < cfg_.depth; ++k) layer_ids[k][r] = q.code[k];
        }
    }

    std::vector<NodeId> code_nodes(cfg_.depth);
    for (int k = 0; k < cfg_.depth; ++k)
        code_nodes[k] = g.gather_rows(g.param(params_, "cb" + std::to_string(k)), layer_ids[k]);

    NodeId vbar = code_nodes[0];
    for (int k = 1; k < cfg_.depth; ++k) vbar = g.add(vbar, code_nodes[k]);

    // straight-through: decoder sees vbar, gradients reach the encoder
    NodeId v_st = g.add(v, g.stop_gradient(g.sub(vbar, v)));
    NodeId zbar = decode_node(g, v_st);
    NodeId rdiff = g.sub(z, zbar);
    NodeId recon = g.scale(g.sum(g.mul(rdiff, rdiff)), 1.0 / batch);

    NodeId quant = g.scalar(0.0);
    NodeId commit = g.scalar(0.0);
    NodeId vk = v;
    for (int k = 0; k < cfg_.depth; ++k) {
        NodeId ck = code_nodes[k];
        NodeId d1 = g.sub(g.stop_gradient(vk), ck);
        quant = g.add(quant, g.scale(g.sum(g.mul(d1, d1)), 1.0 / batch));
        NodeId d2 = g.sub(vk, g.stop_gradient(ck));
        commit = g.add(commit, g.scale(g.sum(g.mul(d2, d2)), cfg_.beta / batch));
        vk = g.sub(vk, ck);
    }

    NodeId total = g.add(recon, g.add(quant, commit));
    if (!g.value(total).finite()) throw Error(ErrKind::Numeric, "rqvae loss is not finite");
    if (parts) {
        parts->reconstruction = g.value(recon).item();
        parts->quantization = g.value(quant).item();
        parts->commitment = g.value(commit).item();
        parts->total = g.value(total).item();
    }
    return total;
}

static std::vector<double> layer_utilization(const RqAutoencoder& model, const Tensor& z_rows) {
    auto books = model.codebooks();
    const RqConfig& cfg = model.config();
    Tensor v = model.encode(z_rows);
    std::vector<std::vector<char>> used(cfg.depth,
                                        std::vector<char>(cfg.codebook_size, 0));
    for (int r = 0; r < v.rows(); ++r) {
        Tensor row(1, v.cols());
        for (int c = 0; c < v.cols(); ++c) row.at(0, c) = v.at(r, c);
        auto q = quantize(books, row, cfg.distance);
        for (int k = 0; k < cfg.depth; ++k) used[k][q.code[k]] = 1;
    }
    std::vector<double> util(cfg.depth);
    for (int k = 0; k < cfg.depth; ++k)
        util[k] = std::count(used[k].begin(), used[k].end(), 1) /
                  static_cast<double>(cfg.codebook_size);
    return util;
}

RqFitResult fit_tokenizer(const Tensor& z_rows, const RqConfig& cfg) {
    if (z_rows.rows() < cfg.codebook_size)
        throw Error(ErrKind::Data, "fit_tokenizer: fewer rows than codebook size");
    {
        bool all_same = true;
        for (int r = 1; r < z_rows.rows() && all_same; ++r)
            for (int c = 0; c < z_rows.cols(); ++c)
                if (z_rows.at(r, c) != z_rows.at(0, c)) { all_same = false; break; }
        if (all_same) throw Error(ErrKind::Data, "fit_tokenizer: degenerate all-identical input");
    }

    RqFitResult res{RqAutoencoder::init(cfg), {}, {}};
    RqAutoencoder& model = res.model;
    std::mt19937_64 rng(cfg.seed + 1);

    // warmup pass: per-layer k-means on residuals of the fresh encoder
    Tensor v = model.encode(z_rows);
    Tensor residuals = v;
    for (int k = 0; k < cfg.depth; ++k) {
        Tensor book = kmeans(residuals, cfg.codebook_size, cfg.kmeans_iters, rng, cfg.distance);
        model.set_codebook(k, book);
        for (int r = 0; r < residuals.rows(); ++r) {
            int best = 0;
            double best_d = row_distance(residuals, r, book, 0, cfg.distance);
            for (int j = 1; j < book.rows(); ++j) {
                double d = row_distance(residuals, r, book, j, cfg.distance);
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            for (int c = 0; c < residuals.cols(); ++c)
                residuals.at(r, c) -= book.at(best, c);
        }
    }

    Adam opt(cfg.lr);
    std::vector<int> order(z_rows.rows());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batches = 0;
        std::vector<std::vector<int>> usage(cfg.depth, std::vector<int>(cfg.codebook_size, 0));
        for (int start = 0; start < z_rows.rows(); start += cfg.batch_size) {
            int bsz = std::min(cfg.batch_size, z_rows.rows() - start);
            Tensor batch(bsz, z_rows.cols());
            for (int r = 0; r < bsz; ++r)
                for (int c = 0; c < z_rows.cols(); ++c)
                    batch.at(r, c) = z_rows.at(order[start + r], c);

            Graph g;
            RqLossParts parts;
            NodeId loss = model.training_loss(g, batch, &parts);
            g.backward(loss);
            opt.step(model.params(), g.grads());
            epoch_loss += parts.total;
            ++batches;

            auto books = model.codebooks();
            Tensor vb = model.encode(batch);
            for (int r = 0; r < bsz; ++r) {
                Tensor row(1, vb.cols());
                for (int c = 0; c < vb.cols(); ++c) row.at(0, c) = vb.at(r, c);
                auto q = quantize(books, row, cfg.distance);
                for (int k = 0; k < cfg.depth; ++k) ++usage[k][q.code[k]];
            }
        }
        res.loss_trace.push_back(epoch_loss / batches);

        // dead-code restart: re-seed codes unused for a full epoch
        Tensor v_all = model.encode(z_rows);
        Tensor resid = v_all;
        for (int k = 0; k < cfg.depth; ++k) {
            Tensor book = model.codebooks()[k];
            bool touched = false;
            for (int j = 0; j < cfg.codebook_size; ++j) {
                if (usage[k][j] > 0) continue;
                int r = static_cast<int>(rng() % resid.rows());
                for (int c = 0; c < book.cols(); ++c) book.at(j, c) = resid.at(r, c);
                touched = true;
            }
            if (touched) model.set_codebook(k, book);
            for (int r = 0; r < resid.rows(); ++r) {
                int best = 0;
                double best_d = row_distance(resid, r, book, 0, cfg.distance);
                for (int j = 1; j < book.rows(); ++j) {
                    double d = row_distance(resid, r, book, j, cfg.distance);
                    if (d < best_d) {
                        best_d = d;
                        best = j;
                    }
                }
                for (int c = 0; c < resid.cols(); ++c) resid.at(r, c) -= book.at(best, c);
            }
        }
    }

    res.utilization = layer_utilization(model, z_rows);
    return res;
}

TokenizeResult tokenize_corpus(const RqAutoencoder& model, const EmbeddingTable& z) {
    if (z.matrix.cols() != model.config().input_dim)
        throw Error(ErrKind::Data, "tokenize_corpus: embedding dim mismatch");
    TokenizeResult out;
    auto books = model.codebooks();
    Tensor v = model.encode(z.matrix);
    std::map<std::vector<int>, std::vector<std::string>> by_code;
    for (size_t r = 0; r < z.ids.size(); ++r) {
        Tensor row(1, v.cols());
        for (int c = 0; c < v.cols(); ++c) row.at(0, c) = v.at(static_cast<int>(r), c);
        auto q = quantize(books, row, model.config().distance);
        by_code[q.code].push_back(z.ids[r]);
        out.table.emplace(z.ids[r], std::move(q.code));
    }
    size_t colliding = 0;
    for (auto& [code, ids] : by_code) {
        if (ids.size() < 2) continue;
        colliding += ids.size();
        out.collisions.groups.push_back(ids);
    }
    if (!z.ids.empty())
        out.collisions.rate = static_cast<double>(colliding) / static_cast<double>(z.ids.size());
    return out;
}

}  // namespace stk
