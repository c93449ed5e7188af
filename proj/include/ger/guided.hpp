// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "ger/corpus.hpp"

namespace ger::guided {

/// Target standard deviation: the Xavier value for a square d_r -> d_r
/// layer, sqrt(2 / (d_r + d_r)).
double xavier_target_std(std::size_t refined_dim);

/// Per-dimension affine map fitted on the item score corpus: center on the
/// corpus mean and rescale each dimension's population std to target_std.
/// Dimensions with std below epsilon are degenerate and map to zero.
struct Normalizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std_dev;  // population
    double target_std = 0.0;
    double epsilon = 1e-8;

    std::size_t dims() const { return static_cast<std::size_t>(mean.size()); }
    bool degenerate(std::size_t dim) const { return std_dev(static_cast<long>(dim)) < epsilon; }
};

/// Fits per-dimension statistics over `item_scores` (one row per item).
/// Needs at least two rows.
Normalizer fit_normalizer(const Eigen::MatrixXd& item_scores, std::size_t refined_dim,
                          double epsilon = 1e-8);

std::vector<double> normalize(const Normalizer& n, const std::vector<double>& scores);

struct RefinedConfig {
    std::size_t base_dim = 48;
    std::size_t guided_dim = 12;
    double mu = 1.0;

    std::size_t refined_dim() const { return base_dim + guided_dim; }
    void validate() const;
};

/// base_vec concatenated with mu * guided_vec, base first.
std::vector<double> refine(const std::vector<double>& base_vec,
                           const std::vector<double>& guided_vec, double mu);

/// Per-item embeddings: a trainable base block and a frozen block of
/// normalized guided scores. Columns are items, in ascending id order.
class EmbeddingTable {
public:
    RefinedConfig config;
    std::vector<std::string> ids;
    Eigen::MatrixXd base;    // base_dim x |items|, trainable
    Eigen::MatrixXd guided;  // guided_dim x |items|, never mutated after build

    std::size_t num_items() const { return ids.size(); }
    std::size_t item_index(const std::string& id) const;
    bool has_item(const std::string& id) const { return index_.count(id) > 0; }

    /// base[i] concatenated with mu * guided[i]; length refined_dim.
    Eigen::VectorXd refined_col(std::size_t idx) const;
    /// The full refined_dim x |items| matrix (mu applied to the guided block).
    Eigen::MatrixXd refined_matrix() const;

    void rebuild_index();

private:
    std::unordered_map<std::string, std::size_t> index_;
};

/// Builds the table: the base block drawn uniformly on +-target_std*sqrt(3)
/// from `init_seed` (so its std matches the normalizer target), the guided
/// block from normalized scores. With guided_dim = 0 the scores and
/// normalizer are ignored and the table is pure base.
EmbeddingTable build_table(const std::map<std::string, corpus::ItemRecord>& items,
                           const std::map<std::string, std::vector<double>>& guided_scores,
                           const Normalizer* normalizer, const RefinedConfig& config,
                           std::uint64_t init_seed);

// Archive round-trips (JSON, versioned). The optional user map carries
// normalized per-user guided vectors alongside the item table.
void save_table(const EmbeddingTable& table,
                const std::map<std::string, std::vector<double>>& user_guided,
                const Normalizer* normalizer, const std::string& path);

struct LoadedTable {
    EmbeddingTable table;
    std::map<std::string, std::vector<double>> user_guided;
    std::optional<Normalizer> normalizer;
};
LoadedTable load_table(const std::string& path);

void save_normalizer(const Normalizer& n, const std::string& path);
Normalizer load_normalizer(const std::string& path);

}  // namespace ger::guided
