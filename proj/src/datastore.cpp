#include "stk/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace stk {

using nlohmann::json;

int Catalog::content_vocab() const {
    int mx = -1;
    for (const auto& [id, toks] : items)
        for (int t : toks) mx = std::max(mx, t);
    return mx + 1;
}

int EmbeddingTable::row_of(const std::string& id) const {
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == id) return static_cast<int>(i);
    return -1;
}

static std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrKind::Data, "cannot open " + path);
    return f;
}

Catalog load_catalog(const CatalogPaths& paths) {
    Catalog cat;

    {
        auto f = open_in(paths.items_jsonl);
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("id") || !j.contains("tokens"))
                throw Error(ErrKind::Data,
                            paths.items_jsonl + ":" + std::to_string(lineno) + ": malformed item line");
            std::string id = j["id"].get<std::string>();
            if (cat.items.count(id))
                throw Error(ErrKind::Data,
                            paths.items_jsonl + ":" + std::to_string(lineno) + ": duplicate item id " + id);
            std::vector<int> toks = j["tokens"].get<std::vector<int>>();
            for (int t : toks)
                if (t < 0)
                    throw Error(ErrKind::Data, paths.items_jsonl + ":" + std::to_string(lineno) +
                                                   ": negative content token");
            cat.item_ids.push_back(id);
            cat.items.emplace(id, std::move(toks));
        }
    }

    {
        auto f = open_in(paths.users_jsonl);
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("id") || !j.contains("history"))
                throw Error(ErrKind::Data,
                            paths.users_jsonl + ":" + std::to_string(lineno) + ": malformed user line");
            std::string id = j["id"].get<std::string>();
            if (cat.users.count(id))
                throw Error(ErrKind::Data,
                            paths.users_jsonl + ":" + std::to_string(lineno) + ": duplicate user id " + id);
            auto hist = j["history"].get<std::vector<std::string>>();
            for (const auto& item : hist)
                if (!cat.items.count(item))
                    throw Error(ErrKind::Data, paths.users_jsonl + ":" + std::to_string(lineno) +
                                                   ": history references unknown item " + item);
            cat.user_ids.push_back(id);
            cat.users.emplace(id, std::move(hist));
        }
    }

    {
        auto f = open_in(paths.impressions_tsv);
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::istringstream ss(line);
            Impression imp;
            std::string label;
            if (!(std::getline(ss, imp.group, '\t') && std::getline(ss, imp.user, '\t') &&
                  std::getline(ss, imp.item, '\t') && std::getline(ss, label)))
                throw Error(ErrKind::Data, paths.impressions_tsv + ":" + std::to_string(lineno) +
                                               ": malformed impression line");
            if (label != "0" && label != "1")
                throw Error(ErrKind::Data, paths.impressions_tsv + ":" + std::to_string(lineno) +
                                               ": non-binary label '" + label + "'");
            imp.label = label == "1" ? 1 : 0;
            if (!cat.users.count(imp.user))
                throw Error(ErrKind::Data, paths.impressions_tsv + ":" + std::to_string(lineno) +
                                               ": unknown user " + imp.user);
            if (!cat.items.count(imp.item))
                throw Error(ErrKind::Data, paths.impressions_tsv + ":" + std::to_string(lineno) +
                                               ": unknown item " + imp.item);
            cat.impressions.push_back(std::move(imp));
        }
    }

    return cat;
}

void write_catalog(const CatalogPaths& paths, const Catalog& cat) {
    {
        std::ofstream f(paths.items_jsonl, std::ios::binary);
        if (!f) throw Error(ErrKind::Data, "cannot write " + paths.items_jsonl);
        for (const auto& id : cat.item_ids) {
            json j{{"id", id}, {"tokens", cat.items.at(id)}};
            f << j.dump() << '\n';
        }
    }
    {
        std::ofstream f(paths.users_jsonl, std::ios::binary);
        if (!f) throw Error(ErrKind::Data, "cannot write " + paths.users_jsonl);
        for (const auto& id : cat.user_ids) {
            json j{{"id", id}, {"history", cat.users.at(id)}};
            f << j.dump() << '\n';
        }
    }
    {
        std::ofstream f(paths.impressions_tsv, std::ios::binary);
        if (!f) throw Error(ErrKind::Data, "cannot write " + paths.impressions_tsv);
        for (const auto& imp : cat.impressions)
            f << imp.group << '\t' << imp.user << '\t' << imp.item << '\t' << imp.label << '\n';
    }
}

static constexpr char kCacheMagic[4] = {'S', 'T', 'K', 'C'};
static constexpr uint32_t kCacheVersion = 1;

template <typename T>
static void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
static T get(std::ifstream& f, const std::string& path) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!f)
        throw Error(ErrKind::Data, path + ": truncated at byte offset " +
                                       std::to_string(static_cast<long long>(f.gcount())));
    return v;
}

void write_cache(const std::string& path, const EmbeddingTable& table) {
    if (table.matrix.cols() <= 0) throw Error(ErrKind::Data, "embedding cache: dim must be positive");
    if (static_cast<int>(table.ids.size()) != table.matrix.rows())
        throw Error(ErrKind::Data, "embedding cache: id count != row count");
    if (!table.matrix.finite()) throw Error(ErrKind::Data, "embedding cache: non-finite values");

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrKind::Data, "cannot write " + path);
    f.write(kCacheMagic, 4);
    put<uint32_t>(f, kCacheVersion);
    put<uint64_t>(f, static_cast<uint64_t>(table.matrix.rows()));
    put<uint32_t>(f, static_cast<uint32_t>(table.matrix.cols()));
    for (int r = 0; r < table.matrix.rows(); ++r)
        for (int c = 0; c < table.matrix.cols(); ++c)
            put<float>(f, static_cast<float>(table.matrix.at(r, c)));
    for (const auto& id : table.ids) {
        put<uint32_t>(f, static_cast<uint32_t>(id.size()));
        f.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    if (!f) throw Error(ErrKind::Data, "short write to " + path);
}

EmbeddingTable read_cache(const std::string& path) {
    auto f = open_in(path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kCacheMagic, 4) != 0)
        throw Error(ErrKind::Data, path + ": bad magic, not an embedding cache");
    uint32_t version = get<uint32_t>(f, path);
    if (version != kCacheVersion)
        throw Error(ErrKind::Data, path + ": unsupported cache version " + std::to_string(version));
    uint64_t rows = get<uint64_t>(f, path);
    uint32_t dim = get<uint32_t>(f, path);

    EmbeddingTable t;
    t.matrix = Tensor(static_cast<int>(rows), static_cast<int>(dim));
    long long offset = 16;
    for (uint64_t r = 0; r < rows; ++r)
        for (uint32_t c = 0; c < dim; ++c) {
            float v;
            f.read(reinterpret_cast<char*>(&v), sizeof(v));
            if (!f) throw Error(ErrKind::Data, path + ": truncated at byte offset " +
                                                   std::to_string(offset));
            t.matrix.at(static_cast<int>(r), static_cast<int>(c)) = v;
            offset += 4;
        }
    for (uint64_t r = 0; r < rows; ++r) {
        uint32_t len = get<uint32_t>(f, path);
        std::string id(len, '\0');
        f.read(id.data(), len);
        if (!f) throw Error(ErrKind::Data, path + ": truncated id section");
        t.ids.push_back(std::move(id));
    }
    return t;
}

void write_tokens(const std::string& path, const TokenTable& table) {
    size_t k = table.empty() ? 0 : table.begin()->second.size();
    for (const auto& [id, code] : table)
        if (code.size() != k) throw Error(ErrKind::Data, "ragged token code length for " + id);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrKind::Data, "cannot write " + path);
    for (const auto& [id, code] : table) {
        f << id;
        for (int i : code) f << '\t' << i;
        f << '\n';
    }
}

TokenTable read_tokens(const std::string& path) {
    auto f = open_in(path);
    TokenTable table;
    std::string line;
    int lineno = 0;
    size_t k = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string id, field;
        std::getline(ss, id, '\t');
        std::vector<int> code;
        while (std::getline(ss, field, '\t')) code.push_back(std::stoi(field));
        if (table.empty())
            k = code.size();
        else if (code.size() != k)
            throw Error(ErrKind::Data,
                        path + ":" + std::to_string(lineno) + ": ragged token code length");
        table.emplace(std::move(id), std::move(code));
    }
    return table;
}

MemoryReport memory_report(const MemorySpec& spec) {
    if (spec.items < 0 || spec.users < 0 || spec.vocab < 0 || spec.token_depth < 0 ||
        spec.model_dim < 0 || spec.pretrained_dim < 0)
        throw Error(ErrKind::Config, "memory spec counts must be non-negative");

    long long n = spec.items, m = spec.users, v = spec.vocab;
    long long k = spec.token_depth, d = spec.model_dim, dd = spec.pretrained_dim;

    MemoryReport r;
    switch (spec.paradigm) {
        case Paradigm::ContentEncoding:
            r.entries = v * d;
            break;
        case Paradigm::IdBased:
            r.entries = n * d + (spec.dual ? m * d : 0);
            break;
        case Paradigm::EmbeddingBased:
            r.entries = n * dd + (spec.dual ? m * dd : 0);
            break;
        case Paradigm::SemanticToken:
            r.entries = n * k + k * d + (spec.dual ? m * k + k * d : 0);
            break;
    }
    r.bytes = r.entries * 4;  // 32-bit entries

    double value;
    char suffix;
    if (r.bytes >= (1LL << 30)) {
        value = static_cast<double>(r.bytes) / (1LL << 30);
        suffix = 'G';
    } else {
        value = static_cast<double>(r.bytes) / (1LL << 20);
        suffix = 'M';
    }
    // round half up to two decimals
    value = std::floor(value * 100.0 + 0.5) / 100.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%c", value, suffix);
    r.display = buf;
    return r;
}

Catalog synthesize_catalog(const SynthConfig& cfg) {
    if (cfg.n_clusters <= 0 || cfg.n_clusters > cfg.n_items)
        throw Error(ErrKind::Config, "synthesize: need 1 <= n_clusters <= n_items");
    if (cfg.n_users <= 0 || cfg.n_items <= 0 || cfg.group_size <= 1)
        throw Error(ErrKind::Config, "synthesize: inconsistent sizes");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    Catalog cat;
    int per_cluster_vocab = std::max(2, cfg.content_vocab / cfg.n_clusters);

    std::vector<int> item_cluster(cfg.n_items);
    std::vector<std::vector<int>> cluster_items(cfg.n_clusters);
    for (int i = 0; i < cfg.n_items; ++i) {
        int c = i % cfg.n_clusters;  // every cluster populated
        item_cluster[i] = c;
        cluster_items[c].push_back(i);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "i%05d", i);
        std::vector<int> toks(cfg.tokens_per_item);
        std::uniform_int_distribution<int> tok(0, per_cluster_vocab - 1);
        for (auto& t : toks) t = c * per_cluster_vocab + tok(rng);
        cat.item_ids.emplace_back(buf);
        cat.items.emplace(buf, std::move(toks));
    }

    std::vector<int> user_pref(cfg.n_users);
    std::uniform_int_distribution<int> pick_cluster(0, cfg.n_clusters - 1);
    std::uniform_int_distribution<int> pick_item(0, cfg.n_items - 1);
    for (int u = 0; u < cfg.n_users; ++u) {
        int pref = pick_cluster(rng);
        user_pref[u] = pref;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "u%05d", u);
        std::vector<std::string> hist(cfg.history_len);
        for (auto& h : hist) {
            int idx;
            if (coin(rng) < 0.85) {
                const auto& pool = cluster_items[pref];
                std::uniform_int_distribution<int> pi(0, static_cast<int>(pool.size()) - 1);
                idx = pool[pi(rng)];
            } else {
                idx = pick_item(rng);
            }
            h = cat.item_ids[idx];
        }
        cat.user_ids.emplace_back(buf);
        cat.users.emplace(buf, std::move(hist));
    }

    std::uniform_int_distribution<int> pick_user(0, cfg.n_users - 1);
    int n_groups = (cfg.n_impressions + cfg.group_size - 1) / cfg.group_size;
    int emitted = 0;
    for (int gi = 0; gi < n_groups && emitted < cfg.n_impressions; ++gi) {
        char gbuf[16];
        std::snprintf(gbuf, sizeof(gbuf), "g%06d", gi);
        int u = pick_user(rng);
        for (int s = 0; s < cfg.group_size && emitted < cfg.n_impressions; ++s, ++emitted) {
            bool matched = coin(rng) < 0.5;
            int idx;
            if (matched && cfg.n_clusters > 1) {
                const auto& pool = cluster_items[user_pref[u]];
                std::uniform_int_distribution<int> pi(0, static_cast<int>(pool.size()) - 1);
                idx = pool[pi(rng)];
            } else {
                idx = pick_item(rng);
            }
            bool hit = item_cluster[idx] == user_pref[u];
            int label = coin(rng) < (hit ? 0.9 : 0.1) ? 1 : 0;
            cat.impressions.push_back({gbuf, cat.user_ids[u], cat.item_ids[idx], label});
        }
    }
    return cat;
}

}  // namespace stk
