// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ger::metrics {

/// 1-based position of the ground-truth item in a descending ranking.
using Rank = std::size_t;

struct MetricReport {
    double mrr = 0.0;
    std::map<int, double> recall_at;
    std::map<int, double> ndcg_at;
    std::size_t n_users = 0;
};

/// Mean of 1/rank. Throws on empty input.
double mrr(const std::vector<Rank>& ranks);

/// Fraction of ranks <= k.
double recall_at_k(const std::vector<Rank>& ranks, int k);

/// Binary-relevance NDCG: per user 1/log2(rank+1) if rank <= k, else 0.
/// The ideal DCG for a single relevant item is 1, so no further scaling.
double ndcg_at_k(const std::vector<Rank>& ranks, int k);

/// Probability that a random positive outscores a random negative; ties
/// count 1/2 (Mann-Whitney form). Requires at least one of each label.
double auc_roc(const std::vector<int>& labels, const std::vector<double>& scores);

MetricReport report_from_ranks(const std::vector<Rank>& ranks, const std::vector<int>& ks);

/// Relative change in percent per metric; absent where the base value is 0.
std::map<std::string, std::optional<double>> improvement(const MetricReport& base,
                                                         const MetricReport& refined);

/// Stable metric labels ("MRR", "Recall@5", ...) in report row order.
std::vector<std::string> metric_names(const MetricReport& r);
double metric_value(const MetricReport& r, const std::string& name);

}  // namespace ger::metrics
