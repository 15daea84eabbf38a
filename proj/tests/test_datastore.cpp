#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "stk/datastore.hpp"

using namespace stk;
namespace fs = std::filesystem;

static fs::path tmpdir() {
    auto p = fs::temp_directory_path() / "stk_ds_test";
    fs::create_directories(p);
    return p;
}

static CatalogPaths paths_in(const fs::path& dir) {
    return {(dir / "items.jsonl").string(), (dir / "users.jsonl").string(),
            (dir / "impressions.tsv").string()};
}

TEST_CASE("empty impressions file is a valid catalog") {
    auto dir = tmpdir();
    auto p = paths_in(dir);
    std::ofstream(p.items_jsonl) << R"({"id":"a","tokens":[1,2]})" << "\n";
    std::ofstream(p.users_jsonl) << R"({"id":"u","history":["a"]})" << "\n";
    std::ofstream(p.impressions_tsv);
    Catalog c = load_catalog(p);
    CHECK(c.impressions.empty());
    CHECK(c.items.size() == 1);
    CHECK(c.content_vocab() == 3);
}

TEST_CASE("impression referencing unknown item names the line") {
    auto dir = tmpdir();
    auto p = paths_in(dir);
    std::ofstream(p.items_jsonl) << R"({"id":"a","tokens":[1]})" << "\n";
    std::ofstream(p.users_jsonl) << R"({"id":"u","history":[]})" << "\n";
    std::ofstream(p.impressions_tsv) << "g1\tu\ta\t1\n" << "g1\tu\tmissing\t0\n";
    try {
        load_catalog(p);
        FAIL("expected data error");
    } catch (const Error& e) {
        CHECK(e.kind == ErrKind::Data);
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
}

TEST_CASE("non-binary label rejected") {
    auto dir = tmpdir();
    auto p = paths_in(dir);
    std::ofstream(p.items_jsonl) << R"({"id":"a","tokens":[1]})" << "\n";
    std::ofstream(p.users_jsonl) << R"({"id":"u","history":[]})" << "\n";
    std::ofstream(p.impressions_tsv) << "g1\tu\ta\t2\n";
    CHECK_THROWS_AS(load_catalog(p), Error);
}

TEST_CASE("catalog write/read round trip on a 100-item fixture") {
    SynthConfig cfg;
    cfg.n_items = 100;
    cfg.n_users = 30;
    cfg.n_clusters = 5;
    cfg.n_impressions = 200;
    cfg.seed = 3;
    Catalog a = synthesize_catalog(cfg);

    auto dir = tmpdir();
    auto p = paths_in(dir);
    write_catalog(p, a);
    Catalog b = load_catalog(p);

    CHECK(a.item_ids == b.item_ids);
    CHECK(a.items == b.items);
    CHECK(a.user_ids == b.user_ids);
    CHECK(a.users == b.users);
    REQUIRE(a.impressions.size() == b.impressions.size());
    for (size_t i = 0; i < a.impressions.size(); ++i) {
        CHECK(a.impressions[i].group == b.impressions[i].group);
        CHECK(a.impressions[i].user == b.impressions[i].user);
        CHECK(a.impressions[i].item == b.impressions[i].item);
        CHECK(a.impressions[i].label == b.impressions[i].label);
    }
}

TEST_CASE("embedding cache round trips bitwise") {
    auto dir = tmpdir();
    std::mt19937_64 rng(17);
    EmbeddingTable t;
    t.matrix = Tensor(10, 8);
    for (size_t i = 0; i < t.matrix.size(); ++i)
        t.matrix[i] = static_cast<float>(Tensor::randn(1, 1, rng)[0]);
    for (int i = 0; i < 10; ++i) t.ids.push_back("id" + std::to_string(i));

    auto path = (dir / "emb.stkc").string();
    write_cache(path, t);
    EmbeddingTable r = read_cache(path);
    CHECK(r.ids == t.ids);
    REQUIRE(r.matrix.same_shape(t.matrix));
    for (size_t i = 0; i < t.matrix.size(); ++i) CHECK(r.matrix[i] == t.matrix[i]);
}

TEST_CASE("zero-dim cache rejected at write") {
    EmbeddingTable t;
    t.matrix = Tensor(0, 0);
    CHECK_THROWS_AS(write_cache((tmpdir() / "bad.stkc").string(), t), Error);
}

TEST_CASE("truncated cache read reports byte offset") {
    auto dir = tmpdir();
    EmbeddingTable t;
    t.matrix = Tensor(4, 4, 1.5);
    for (int i = 0; i < 4; ++i) t.ids.push_back("x" + std::to_string(i));
    auto path = (dir / "trunc.stkc").string();
    write_cache(path, t);
    fs::resize_file(path, 16 + 4 * 4 * 2 + 2);  // mid-row
    try {
        read_cache(path);
        FAIL("expected truncation error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
}

TEST_CASE("cache magic mismatch rejected") {
    auto dir = tmpdir();
    auto path = (dir / "junk.stkc").string();
    std::ofstream(path) << "NOPE some junk bytes";
    CHECK_THROWS_AS(read_cache(path), Error);
}

TEST_CASE("token table TSV format and round trip") {
    TokenTable t{{"a", {1, 2, 3, 4}}, {"b", {0, 0, 0, 0}}, {"c", {5, 6, 7, 8}}};
    auto path = (tmpdir() / "tok.tsv").string();
    write_tokens(path, t);

    std::ifstream f(path);
    std::string line;
    int lines = 0;
    while (std::getline(f, line)) {
        ++lines;
        CHECK(std::count(line.begin(), line.end(), '\t') == 4);
    }
    CHECK(lines == 3);
    CHECK(read_tokens(path) == t);
}

TEST_CASE("ragged token codes rejected") {
    TokenTable t{{"a", {1, 2}}, {"b", {1}}};
    CHECK_THROWS_AS(write_tokens((tmpdir() / "rag.tsv").string(), t), Error);
}

TEST_CASE("persistence round trips on random payloads") {
    std::mt19937_64 rng(99);
    auto dir = tmpdir();
    for (int trial = 0; trial < 25; ++trial) {
        int rows = 1 + static_cast<int>(rng() % 12);
        int cols = 1 + static_cast<int>(rng() % 9);
        EmbeddingTable t;
        t.matrix = Tensor(rows, cols);
        for (size_t i = 0; i < t.matrix.size(); ++i)
            t.matrix[i] = static_cast<float>(Tensor::randn(1, 1, rng)[0] * 10);
        for (int i = 0; i < rows; ++i) t.ids.push_back("e" + std::to_string(rng() % 100000));
        // ids must be unique for table semantics; suffix with row
        for (int i = 0; i < rows; ++i) t.ids[i] += "_" + std::to_string(i);
        auto path = (dir / "prop.stkc").string();
        write_cache(path, t);
        EmbeddingTable r = read_cache(path);
        REQUIRE(r.ids == t.ids);
        for (size_t i = 0; i < t.matrix.size(); ++i) REQUIRE(r.matrix[i] == t.matrix[i]);

        TokenTable tok;
        int k = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < rows; ++i) {
            std::vector<int> code(k);
            for (auto& c : code) c = static_cast<int>(rng() % 64);
            tok.emplace(t.ids[i], std::move(code));
        }
        auto tpath = (dir / "prop.tsv").string();
        write_tokens(tpath, tok);
        REQUIRE(read_tokens(tpath) == tok);
    }
}

TEST_CASE("memory report reproduces the paradigm table") {
    MemorySpec s;
    s.vocab = 30522;
    s.items = 100000000;
    s.users = 100000000;
    s.token_depth = 4;
    s.model_dim = 256;
    s.pretrained_dim = 768;

    s.paradigm = Paradigm::ContentEncoding;
    CHECK(memory_report(s).display == "29.81M");

    s.paradigm = Paradigm::SemanticToken;
    s.dual = false;
    auto r = memory_report(s);
    CHECK(r.entries == 400001024);
    CHECK(r.display == "1.49G");
    s.dual = true;
    CHECK(memory_report(s).display == "2.98G");

    s.paradigm = Paradigm::EmbeddingBased;
    s.dual = false;
    CHECK(memory_report(s).display == "286.10G");
    s.dual = true;
    CHECK(memory_report(s).display == "572.20G");
}

TEST_CASE("memory report: empty system displays 0.00M") {
    MemorySpec s;
    s.paradigm = Paradigm::SemanticToken;
    auto r = memory_report(s);
    CHECK(r.entries == 0);
    CHECK(r.display == "0.00M");
}

TEST_CASE("memory report is linear in item count") {
    MemorySpec s;
    s.paradigm = Paradigm::IdBased;
    s.items = 12345;
    s.model_dim = 64;
    auto r1 = memory_report(s);
    s.items *= 2;
    auto r2 = memory_report(s);
    CHECK(r2.entries == 2 * r1.entries);
}

TEST_CASE("dual variant doubles bytes when N=M") {
    MemorySpec s;
    s.paradigm = Paradigm::EmbeddingBased;
    s.items = 777;
    s.users = 777;
    s.pretrained_dim = 128;
    s.dual = false;
    auto single = memory_report(s);
    s.dual = true;
    auto dual = memory_report(s);
    CHECK(dual.bytes == 2 * single.bytes);
}

TEST_CASE("synthesizer is deterministic per seed") {
    SynthConfig cfg;
    cfg.n_items = 60;
    cfg.n_users = 20;
    cfg.n_clusters = 4;
    cfg.n_impressions = 100;
    cfg.seed = 5;
    Catalog a = synthesize_catalog(cfg);
    Catalog b = synthesize_catalog(cfg);
    CHECK(a.items == b.items);
    CHECK(a.users == b.users);
    REQUIRE(a.impressions.size() == b.impressions.size());
    for (size_t i = 0; i < a.impressions.size(); ++i)
        CHECK(a.impressions[i].label == b.impressions[i].label);
}

TEST_CASE("single cluster: empirical click rate near 0.9") {
    SynthConfig cfg;
    cfg.n_items = 50;
    cfg.n_users = 20;
    cfg.n_clusters = 1;
    cfg.n_impressions = 100000;
    cfg.seed = 8;
    Catalog c = synthesize_catalog(cfg);
    double clicks = 0;
    for (const auto& imp : c.impressions) clicks += imp.label;
    double rate = clicks / static_cast<double>(c.impressions.size());
    CHECK(rate > 0.89);
    CHECK(rate < 0.91);
}

TEST_CASE("synthesizer rejects more clusters than items") {
    SynthConfig cfg;
    cfg.n_items = 3;
    cfg.n_clusters = 5;
    CHECK_THROWS_AS(synthesize_catalog(cfg), Error);
}
