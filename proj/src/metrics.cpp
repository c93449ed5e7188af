// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#include "ger/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ger/common.hpp"

namespace ger::metrics {

double mrr(const std::vector<Rank>& ranks) {
    if (ranks.empty()) throw Error("mrr: empty rank list");
    double sum = 0.0;
    for (Rank r : ranks) sum += 1.0 / static_cast<double>(r);
    return sum / static_cast<double>(ranks.size());
}

double recall_at_k(const std::vector<Rank>& ranks, int k) {
    if (k < 1) throw Error("recall_at_k: k must be >= 1");
    if (ranks.empty()) return 0.0;
    std::size_t hits = 0;
    for (Rank r : ranks)
        if (r <= static_cast<Rank>(k)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at_k(const std::vector<Rank>& ranks, int k) {
    if (k < 1) throw Error("ndcg_at_k: k must be >= 1");
    if (ranks.empty()) return 0.0;
    double sum = 0.0;
    for (Rank r : ranks)
        if (r <= static_cast<Rank>(k))
            sum += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    return sum / static_cast<double>(ranks.size());
}

double auc_roc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size())
        throw Error("auc_roc: labels/scores size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l != 0 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw Error("auc_roc: need at least one positive and one negative label");

    // rank-sum with average ranks on tied scores
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] != 0) pos_rank_sum += avg_rank;
        i = j;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

MetricReport report_from_ranks(const std::vector<Rank>& ranks, const std::vector<int>& ks) {
    MetricReport rep;
    rep.n_users = ranks.size();
    rep.mrr = mrr(ranks);
    for (int k : ks) {
        rep.recall_at[k] = recall_at_k(ranks, k);
        rep.ndcg_at[k] = ndcg_at_k(ranks, k);
    }
    return rep;
}

std::vector<std::string> metric_names(const MetricReport& r) {
    std::vector<std::string> names{"MRR"};
    for (const auto& [k, v] : r.recall_at) names.push_back("Recall@" + std::to_string(k));
    for (const auto& [k, v] : r.ndcg_at) names.push_back("NDCG@" + std::to_string(k));
    return names;
}

double metric_value(const MetricReport& r, const std::string& name) {
    if (name == "MRR") return r.mrr;
    if (starts_with(name, "Recall@")) return r.recall_at.at(std::stoi(name.substr(7)));
    if (starts_with(name, "NDCG@")) return r.ndcg_at.at(std::stoi(name.substr(5)));
    throw Error("unknown metric name: " + name);
}

std::map<std::string, std::optional<double>> improvement(const MetricReport& base,
                                                         const MetricReport& refined) {
    std::map<std::string, std::optional<double>> out;
    for (const std::string& name : metric_names(base)) {
        double b = metric_value(base, name);
        double r = metric_value(refined, name);
        if (b == 0.0)
            out[name] = std::nullopt;
        else
            out[name] = 100.0 * (r - b) / b;
    }
    return out;
}

}  // namespace ger::metrics
