#include "stk/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

namespace stk {

namespace {

struct Group {
    std::vector<double> scores;
    std::vector<int> labels;
};

std::map<std::string, Group> split_groups(const GroupedScores& data) {
    if (data.scores.size() != data.labels.size() || data.scores.size() != data.groups.size())
        throw Error(ErrKind::Data, "scores/labels/groups length mismatch");
    std::map<std::string, Group> out;
    for (size_t i = 0; i < data.scores.size(); ++i) {
        auto& g = out[data.groups[i]];
        g.scores.push_back(data.scores[i]);
        g.labels.push_back(data.labels[i]);
    }
    return out;
}

}  // namespace

double grouped_auc(const GroupedScores& data, int* skipped) {
    auto groups = split_groups(data);
    double total = 0.0;
    int valid = 0, skip = 0;
    for (const auto& [name, g] : groups) {
        long pos = std::count(g.labels.begin(), g.labels.end(), 1);
        long neg = static_cast<long>(g.labels.size()) - pos;
        if (pos == 0 || neg == 0) {
            ++skip;
            continue;
        }
        double concordant = 0.0;
        for (size_t i = 0; i < g.scores.size(); ++i) {
            if (g.labels[i] != 1) continue;
            for (size_t j = 0; j < g.scores.size(); ++j) {
                if (g.labels[j] != 0) continue;
                if (g.scores[i] > g.scores[j])
                    concordant += 1.0;
                else if (g.scores[i] == g.scores[j])
                    concordant += 0.5;
            }
        }
        total += concordant / (static_cast<double>(pos) * static_cast<double>(neg));
        ++valid;
    }
    if (skipped) *skipped = skip;
    if (valid == 0) throw Error(ErrKind::Data, "AUC undefined: no group with both labels");
    return total / valid;
}

double grouped_ndcg_at_k(const GroupedScores& data, int k, int* skipped) {
    auto groups = split_groups(data);
    double total = 0.0;
    int valid = 0, skip = 0;
    for (const auto& [name, g] : groups) {
        long pos = std::count(g.labels.begin(), g.labels.end(), 1);
        if (pos == 0) {
            ++skip;
            continue;
        }
        std::vector<size_t> order(g.scores.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return g.scores[a] > g.scores[b]; });
        double dcg = 0.0;
        for (size_t r = 0; r < order.size() && r < static_cast<size_t>(k); ++r)
            dcg += g.labels[order[r]] / std::log2(static_cast<double>(r) + 2.0);
        double idcg = 0.0;
        for (long r = 0; r < pos && r < k; ++r)
            idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        total += dcg / idcg;
        ++valid;
    }
    if (skipped) *skipped = skip;
    if (valid == 0) throw Error(ErrKind::Data, "nDCG undefined: no group with a positive");
    return total / valid;
}

LatencyStats latency_probe(const std::function<void()>& forward, int trials, int warmup) {
    if (trials < 30) throw Error(ErrKind::Config, "latency probe needs >= 30 trials");
    for (int i = 0; i < warmup; ++i) forward();
    std::vector<double> us(trials);
    for (int i = 0; i < trials; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        forward();
        auto t1 = std::chrono::steady_clock::now();
        us[i] = std::chrono::duration<double, std::micro>(t1 - t0).count();
    }
    std::sort(us.begin(), us.end());
    LatencyStats s;
    s.trials = trials;
    s.median_us = us[trials / 2];
    s.p95_us = us[std::min(trials - 1, static_cast<int>(trials * 0.95))];
    return s;
}

}  // namespace stk
