#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stk/tensor.hpp"

namespace stk {

struct GroupedScores {
    std::vector<double> scores;
    std::vector<int> labels;        // 0/1
    std::vector<std::string> groups;
};

// Per-group ROC AUC via pairwise comparison (ties count 1/2), averaged over
// groups that contain at least one positive and one negative. Throws if no
// group qualifies; `skipped` (optional) receives the count of skipped groups.
double grouped_auc(const GroupedScores& data, int* skipped = nullptr);

// Per-group DCG@k with gain = label and discount 1/log2(rank+1), normalized
// by the ideal DCG, averaged over groups with at least one positive.
double grouped_ndcg_at_k(const GroupedScores& data, int k = 5, int* skipped = nullptr);

struct LatencyStats {
    double median_us = 0.0;
    double p95_us = 0.0;
    int trials = 0;
};

// Times `forward` once per trial after `warmup` untimed calls.
LatencyStats latency_probe(const std::function<void()>& forward, int trials,
                           int warmup = 100);

}  // namespace stk
