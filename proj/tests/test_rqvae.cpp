#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "stk/rqvae.hpp"

using namespace stk;

namespace {

Tensor row2(double a, double b) {
    Tensor t(1, 2);
    t.at(0, 0) = a;
    t.at(0, 1) = b;
    return t;
}

double dist(const Tensor& a, const Tensor& b, int rb, Distance g) {
    double acc = 0.0;
    for (int c = 0; c < a.cols(); ++c) {
        double d = a.at(0, c) - b.at(rb, c);
        acc += g == Distance::Euclidean ? d * d : std::abs(d);
    }
    return acc;
}

// exhaustive per-layer scan, independent of the greedy implementation
std::vector<int> scan_oracle(const std::vector<Tensor>& books, Tensor v, Distance g) {
    std::vector<int> code;
    for (const Tensor& book : books) {
        int best = 0;
        double best_d = dist(v, book, 0, g);
        for (int j = 1; j < book.rows(); ++j) {
            double d = dist(v, book, j, g);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        code.push_back(best);
        for (int c = 0; c < v.cols(); ++c) v.at(0, c) -= book.at(best, c);
    }
    return code;
}

}  // namespace

TEST_CASE("codebook containing v exactly yields zero residual") {
    std::mt19937_64 rng(1);
    Tensor book = Tensor::randn(6, 4, rng);
    Tensor v(1, 4);
    for (int c = 0; c < 4; ++c) v.at(0, c) = book.at(3, c);
    auto q = quantize({book}, v);
    CHECK(q.code == std::vector<int>{3});
    for (int c = 0; c < 4; ++c) CHECK(q.residuals.back().at(0, c) == 0.0);
}

TEST_CASE("two-layer worked example") {
    Tensor c1(2, 2), c2(2, 2);
    c1.at(0, 0) = 1.0;
    c1.at(1, 1) = 1.0;
    c2.at(0, 0) = 0.1;
    c2.at(1, 1) = 0.1;
    Tensor v = row2(1.05, 0.02);
    auto q = quantize({c1, c2}, v, Distance::Euclidean);
    CHECK(q.code == std::vector<int>{0, 0});
    Tensor vbar = approximate({c1, c2}, q.code);
    CHECK(vbar.at(0, 0) == doctest::Approx(1.1));
    CHECK(vbar.at(0, 1) == doctest::Approx(0.0));
    CHECK(q.code == scan_oracle({c1, c2}, v, Distance::Euclidean));
}

TEST_CASE("equidistant tie goes to the smaller index") {
    Tensor book(6, 2);
    book.at(1, 0) = 1.0;   // (1,0)
    book.at(4, 1) = 1.0;   // (0,1), same distance from (0.5,0.5)
    book.at(0, 0) = 9.0;
    book.at(2, 0) = 9.0;
    book.at(3, 0) = 9.0;
    book.at(5, 0) = 9.0;
    auto q = quantize({book}, row2(0.5, 0.5));
    CHECK(q.code[0] == 1);
}

TEST_CASE("quantize rejects NaN and empty codebooks") {
    Tensor v = row2(std::nan(""), 0.0);
    Tensor book(2, 2, 0.5);
    CHECK_THROWS_AS(quantize({book}, v), Error);
    CHECK_THROWS_AS(quantize({}, row2(1, 2)), Error);
    CHECK_THROWS_AS(quantize({Tensor(0, 2)}, row2(1, 2)), Error);
}

TEST_CASE("approximate: single layer returns the code vector") {
    std::mt19937_64 rng(2);
    Tensor book = Tensor::randn(4, 3, rng);
    Tensor vbar = approximate({book}, {2});
    for (int c = 0; c < 3; ++c) CHECK(vbar.at(0, c) == book.at(2, c));
}

TEST_CASE("approximate: all-zero codebooks sum to zero") {
    std::vector<Tensor> books(3, Tensor(5, 4));
    Tensor vbar = approximate(books, {0, 4, 2});
    for (int c = 0; c < 4; ++c) CHECK(vbar.at(0, c) == 0.0);
}

TEST_CASE("approximate rejects out-of-range index") {
    CHECK_THROWS_AS(approximate({Tensor(3, 2)}, {3}), Error);
}

TEST_CASE("telescoping: vbar + final residual reconstructs v to 1e-12") {
    std::mt19937_64 rng(3);
    std::vector<Tensor> books;
    for (int k = 0; k < 4; ++k) books.push_back(Tensor::randn(8, 16, rng));
    for (int t = 0; t < 100; ++t) {
        Tensor v = Tensor::randn(1, 16, rng, 2.0);
        auto q = quantize(books, v);
        Tensor vbar = approximate(books, q.code);
        for (int c = 0; c < 16; ++c)
            REQUIRE(std::abs(vbar.at(0, c) + q.residuals.back().at(0, c) - v.at(0, c)) < 1e-12);
    }
}

TEST_CASE("greedy codes match the linear-scan oracle, both distances") {
    std::mt19937_64 rng(4);
    std::vector<Tensor> books;
    for (int k = 0; k < 4; ++k) books.push_back(Tensor::randn(8, 16, rng));
    for (Distance g : {Distance::Euclidean, Distance::Manhattan}) {
        for (int t = 0; t < 200; ++t) {
            Tensor v = Tensor::randn(1, 16, rng, 1.5);
            REQUIRE(quantize(books, v, g).code == scan_oracle(books, v, g));
        }
    }
}

TEST_CASE("perfect codec and codebooks give zero loss") {
    RqConfig cfg;
    cfg.depth = 1;
    cfg.codebook_size = 3;
    cfg.input_dim = 2;
    cfg.linear_codec = true;
    auto model = RqAutoencoder::init(cfg);
    // identity codec
    Tensor eye(2, 2);
    eye.at(0, 0) = eye.at(1, 1) = 1.0;
    model.params().at("enc.w1") = eye;
    model.params().at("enc.b1") = Tensor(1, 2);
    model.params().at("dec.w1") = eye;
    model.params().at("dec.b1") = Tensor(1, 2);
    Tensor batch(3, 2);
    batch.at(0, 0) = 1.0;
    batch.at(1, 1) = 2.0;
    batch.at(2, 0) = -3.0;
    model.set_codebook(0, batch);  // codes are exactly the batch vectors
    Graph g;
    RqLossParts parts;
    model.training_loss(g, batch, &parts);
    CHECK(parts.total == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("beta defaults to 0.25") {
    CHECK(RqConfig{}.beta == 0.25);
}

TEST_CASE("first quantization term has zero encoder gradient") {
    RqConfig cfg;
    cfg.depth = 2;
    cfg.codebook_size = 4;
    cfg.input_dim = 6;
    cfg.seed = 5;
    auto model = RqAutoencoder::init(cfg);
    std::mt19937_64 rng(6);
    Tensor z = Tensor::randn(3, 6, rng);

    Graph g;
    NodeId v = model.encode_node(g, g.constant(z));
    auto books = model.codebooks();
    // assignment for row residuals
    std::vector<std::vector<int>> ids(cfg.depth, std::vector<int>(3));
    const Tensor& vv = g.value(v);
    for (int r = 0; r < 3; ++r) {
        Tensor row(1, vv.cols());
        for (int c = 0; c < vv.cols(); ++c) row.at(0, c) = vv.at(r, c);
        auto q = quantize(books, row);
        for (int k = 0; k < cfg.depth; ++k) ids[k][r] = q.code[k];
    }
    NodeId vk = v;
    NodeId quant = g.scalar(0.0);
    for (int k = 0; k < cfg.depth; ++k) {
        NodeId ck = g.gather_rows(g.param(model.params(), "cb" + std::to_string(k)), ids[k]);
        NodeId d = g.sub(g.stop_gradient(vk), ck);
        quant = g.add(quant, g.sum(g.mul(d, d)));
        vk = g.sub(vk, ck);
    }
    g.backward(quant);
    CHECK(g.grads().count("enc.w1") == 0);
    CHECK(g.grads().count("enc.w2") == 0);
    CHECK(g.grads().count("cb0") == 1);
    CHECK(g.grads().count("cb1") == 1);
}

TEST_CASE("straight-through: reconstruction gradient reaches the encoder") {
    RqConfig cfg;
    cfg.depth = 2;
    cfg.codebook_size = 4;
    cfg.input_dim = 6;
    cfg.seed = 7;
    auto model = RqAutoencoder::init(cfg);
    std::mt19937_64 rng(8);
    Tensor z = Tensor::randn(4, 6, rng);

    Graph g;
    NodeId loss = model.training_loss(g, z);
    g.backward(loss);
    const auto& grads = g.grads();
    REQUIRE(grads.count("enc.w1") == 1);
    double norm = 0.0;
    for (size_t i = 0; i < grads.at("enc.w1").size(); ++i)
        norm += std::abs(grads.at("enc.w1")[i]);
    CHECK(norm > 0.0);
}

TEST_CASE("fit defaults are depth 4, codebook 64") {
    RqConfig cfg;
    CHECK(cfg.depth == 4);
    CHECK(cfg.codebook_size == 64);
}

TEST_CASE("k-means recovers well-separated cluster centers") {
    std::mt19937_64 rng(9);
    // 16 centers far apart, 8 points each
    Tensor centers = Tensor::randn(16, 8, rng, 10.0);
    Tensor data(16 * 8, 8);
    double var_acc = 0.0;
    for (int i = 0; i < data.rows(); ++i)
        for (int c = 0; c < 8; ++c) {
            data.at(i, c) = centers.at(i % 16, c) + Tensor::randn(1, 1, rng, 0.05)[0];
        }
    Tensor mean(1, 8);
    for (int i = 0; i < data.rows(); ++i)
        for (int c = 0; c < 8; ++c) mean.at(0, c) += data.at(i, c) / data.rows();
    for (int i = 0; i < data.rows(); ++i)
        for (int c = 0; c < 8; ++c) {
            double d = data.at(i, c) - mean.at(0, c);
            var_acc += d * d;
        }
    var_acc /= data.rows();

    RqConfig cfg;
    cfg.depth = 1;
    cfg.codebook_size = 16;
    cfg.input_dim = 8;
    cfg.epochs = 0;  // k-means init only
    cfg.linear_codec = true;
    cfg.seed = 10;
    auto fit = fit_tokenizer(data, cfg);

    auto books = fit.model.codebooks();
    Tensor v = fit.model.encode(data);
    double mse = 0.0;
    for (int r = 0; r < v.rows(); ++r) {
        Tensor row(1, 8);
        for (int c = 0; c < 8; ++c) row.at(0, c) = v.at(r, c);
        auto q = quantize(books, row);
        for (int c = 0; c < 8; ++c)
            mse += q.residuals.back().at(0, c) * q.residuals.back().at(0, c);
    }
    mse /= v.rows();
    // variance of the encoded data, for the 1% bound
    Tensor vmean(1, 8);
    for (int r = 0; r < v.rows(); ++r)
        for (int c = 0; c < 8; ++c) vmean.at(0, c) += v.at(r, c) / v.rows();
    double vvar = 0.0;
    for (int r = 0; r < v.rows(); ++r)
        for (int c = 0; c < 8; ++c) {
            double d = v.at(r, c) - vmean.at(0, c);
            vvar += d * d;
        }
    vvar /= v.rows();
    CHECK(mse < 0.01 * vvar);
}

TEST_CASE("epochs=0 leaves every layer with positive utilization") {
    std::mt19937_64 rng(11);
    Tensor data = Tensor::randn(128, 8, rng);
    RqConfig cfg;
    cfg.depth = 3;
    cfg.codebook_size = 8;
    cfg.input_dim = 8;
    cfg.epochs = 0;
    cfg.seed = 12;
    auto fit = fit_tokenizer(data, cfg);
    REQUIRE(fit.utilization.size() == 3);
    for (double u : fit.utilization) CHECK(u > 0.0);
    CHECK(fit.loss_trace.empty());
}

TEST_CASE("fit rejects too-few rows and degenerate input") {
    RqConfig cfg;
    cfg.depth = 1;
    cfg.codebook_size = 16;
    cfg.input_dim = 4;
    std::mt19937_64 rng(13);
    CHECK_THROWS_AS(fit_tokenizer(Tensor::randn(8, 4, rng), cfg), Error);
    CHECK_THROWS_AS(fit_tokenizer(Tensor(32, 4, 1.0), cfg), Error);
}

TEST_CASE("training reduces the loss on a synthetic fixture") {
    std::mt19937_64 rng(14);
    Tensor centers = Tensor::randn(6, 8, rng, 3.0);
    Tensor data(120, 8);
    for (int r = 0; r < 120; ++r)
        for (int c = 0; c < 8; ++c)
            data.at(r, c) = centers.at(r % 6, c) + Tensor::randn(1, 1, rng, 0.2)[0];
    RqConfig cfg;
    cfg.depth = 2;
    cfg.codebook_size = 8;
    cfg.input_dim = 8;
    cfg.epochs = 15;
    cfg.seed = 15;
    auto fit = fit_tokenizer(data, cfg);
    REQUIRE(fit.loss_trace.size() == 15);
    CHECK(fit.loss_trace.back() < fit.loss_trace.front());
}

TEST_CASE("monotone refinement: deeper quantization never hurts") {
    std::mt19937_64 rng(16);
    Tensor data = Tensor::randn(200, 8, rng, 2.0);
    std::mt19937_64 km_rng(17);
    std::vector<Tensor> books;
    Tensor resid = data;
    double prev_mse = 1e300;
    for (int depth = 1; depth <= 4; ++depth) {
        books.push_back(kmeans(resid, 8, 10, km_rng));
        // assign and update residuals with the new deepest layer
        Tensor next(resid.rows(), resid.cols());
        double mse = 0.0;
        for (int r = 0; r < resid.rows(); ++r) {
            Tensor row(1, 8);
            for (int c = 0; c < 8; ++c) row.at(0, c) = resid.at(r, c);
            auto q = quantize({books.back()}, row);
            for (int c = 0; c < 8; ++c) {
                next.at(r, c) = q.residuals.back().at(0, c);
                mse += next.at(r, c) * next.at(r, c);
            }
        }
        mse /= resid.rows();
        if (depth >= 2) CHECK(mse <= prev_mse);
        prev_mse = mse;
        resid = next;
    }
}

TEST_CASE("tokenize_corpus: identical rows collide deterministically") {
    RqConfig cfg;
    cfg.depth = 4;
    cfg.codebook_size = 4;
    cfg.input_dim = 6;
    cfg.seed = 18;
    auto model = RqAutoencoder::init(cfg);
    std::mt19937_64 rng(19);
    EmbeddingTable z;
    z.matrix = Tensor(5, 6);
    for (int c = 0; c < 6; ++c) {
        z.matrix.at(0, c) = 1.0 + c;
        z.matrix.at(1, c) = 1.0 + c;  // duplicate of row 0
    }
    for (int r = 2; r < 5; ++r)
        for (int c = 0; c < 6; ++c) z.matrix.at(r, c) = Tensor::randn(1, 1, rng, 3.0)[0];
    z.ids = {"a", "b", "c", "d", "e"};

    auto res = tokenize_corpus(model, z);
    CHECK(res.table.at("a") == res.table.at("b"));
    CHECK(res.table.size() == 5);
    CHECK(res.collisions.rate >= 2.0 / 5.0);
    auto res2 = tokenize_corpus(model, z);
    CHECK(res.table == res2.table);
    for (const auto& [id, code] : res.table) CHECK(code.size() == 4);
}

TEST_CASE("code space size is C^K") {
    CHECK(std::pow(64.0, 4.0) == 16777216.0);
}
