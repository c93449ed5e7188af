// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ger::corpus {

/// One user-item interaction (a review with rating and timestamp).
struct Interaction {
    std::string user_id;
    std::string item_id;
    double rating = 0.0;          // in [1, 5]
    std::int64_t timestamp = 0;   // epoch milliseconds
    std::string summary;
    std::string review_text;
};

/// Catalog entry; `details` preserves the order of the source record.
struct ItemRecord {
    std::string item_id;
    std::string title;
    std::string description;
    std::vector<std::string> categories;
    std::vector<std::pair<std::string, std::string>> details;
    std::optional<double> average_rating;
    std::optional<std::int64_t> rating_count;
};

struct DatasetStats {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::size_t num_reviews = 0;
    bool operator==(const DatasetStats&) const = default;
};

/// Planted ground truth behind a synthetic corpus: per-subject aspect
/// vectors on the 1-10 scale (quantized to one decimal) plus the
/// generator parameters needed to reproduce it.
struct PlantedTruth {
    std::map<std::string, std::vector<double>> item_aspects;
    std::map<std::string, std::vector<double>> user_prefs;
    double noise_scale = 0.0;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::map<std::string, ItemRecord> items;
    // per-user interaction sequences, sorted by (timestamp, item_id)
    std::map<std::string, std::vector<Interaction>> users;
    DatasetStats stats;
    std::optional<PlantedTruth> planted;
};

/// Per-user index boundaries for the leave-one-out protocol. The final
/// interaction is the test target, the penultimate one the validation
/// target, and the prefix is training data. Users with fewer than three
/// interactions contribute training data only.
struct UserSplit {
    std::size_t train_len = 0;
    std::optional<std::size_t> validation_target;
    std::optional<std::size_t> test_target;
};

struct SplitDataset {
    std::map<std::string, UserSplit> users;
};

struct ReviewLoadResult {
    std::vector<Interaction> interactions;
    std::size_t malformed = 0;
};

struct MetadataLoadResult {
    std::vector<ItemRecord> records;
    std::size_t malformed = 0;
    std::size_t duplicates = 0;
};

/// Reads a line-delimited JSON review file. Unparseable or incomplete
/// lines are skipped and counted; an unreadable file is fatal.
ReviewLoadResult load_reviews(const std::string& path);

/// Reads a line-delimited JSON metadata file, deduplicated by item id
/// (first record wins). Records without a title are counted as malformed.
MetadataLoadResult load_metadata(const std::string& path);

struct PreprocessCounts {
    std::size_t duplicate_interactions = 0;
    std::size_t unknown_item_interactions = 0;
    std::size_t removed_items = 0;
    std::size_t removed_users = 0;
    std::size_t filter_rounds = 0;
};

/// Cleans a raw corpus: exact-duplicate removal, iterated item/user
/// frequency filtering to a fixed point, and chronological ordering.
Dataset preprocess(const std::vector<Interaction>& interactions,
                   const std::vector<ItemRecord>& item_records,
                   std::size_t min_item_interactions,
                   std::size_t min_user_interactions,
                   PreprocessCounts* counts = nullptr);

DatasetStats dataset_stats(const Dataset& dataset);

SplitDataset split_leave_one_out(const Dataset& dataset);

struct SyntheticSpec {
    std::size_t num_users = 300;
    std::size_t num_items = 200;
    std::size_t num_aspects = 12;
    std::size_t seq_len_min = 10;
    std::size_t seq_len_max = 30;
    double noise_scale = 1.0;
    std::uint64_t seed = 1;
};

/// Builds a synthetic corpus whose next-item draws follow a per-user
/// softmax over negative squared aspect distance with a fixed Gaussian
/// logit perturbation of scale `noise_scale`. Item descriptions and
/// review texts embed the planted aspect vectors so text-only scorer
/// backends can recover them.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Noise-free selection logits (-||a_i - p_u||^2 / (2m)) for every item,
/// in ascending item-id order. This is the closed form the generator
/// perturbs; with noise_scale = 0 it is the exact sampling distribution.
std::vector<double> planted_selection_logits(const PlantedTruth& truth,
                                             const std::string& user_id,
                                             const std::vector<std::string>& item_ids);

// Archive round-trip (single JSON document, versioned).
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace ger::corpus
