// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ger/aspects.hpp"
#include "ger/corpus.hpp"
#include "ger/guided.hpp"
#include "ger/metrics.hpp"
#include "ger/scorer.hpp"
#include "ger/seqrec.hpp"

namespace ger::harness {

struct DataConfig {
    std::optional<corpus::SyntheticSpec> synthetic;
    std::optional<std::string> dataset_path;
    std::optional<std::string> reviews_path;
    std::optional<std::string> metadata_path;
    std::size_t min_item_interactions = 5;
    std::size_t min_user_interactions = 5;
};

struct BackendConfig {
    std::string kind = "oracle";  // oracle | mock | http
    std::uint64_t mock_seed = 1;
    std::string endpoint;
    std::string model;
    double temperature = 0.0;
};

struct SurrogateConfig {
    double like_threshold = 3.0;
    std::size_t epochs = 200;
    double learning_rate = 0.5;
    std::uint64_t seed = 9;
};

/// One experiment: data source, catalog, scoring backend, embedding and
/// model shapes, training settings, seeds. The comparison arms derive
/// from `refined`: the base arm always gets base_dim + guided_dim pure
/// base dimensions so both arms have equal total width.
struct ExperimentConfig {
    DataConfig data;
    std::string catalog_domain = "movies";
    std::optional<std::string> catalog_path;
    BackendConfig backend;
    guided::RefinedConfig refined;
    seqrec::ModelConfig model;
    seqrec::TrainConfig train;
    SurrogateConfig surrogate;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "runs/experiment";
    std::size_t score_failure_budget = 0;
    std::size_t max_reviews = 10;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
    /// Hash of the canonical config document; embedded in every report.
    std::string fingerprint() const;
};

struct ComparisonReport {
    struct SeedRow {
        std::uint64_t seed = 0;
        metrics::MetricReport base;
        metrics::MetricReport refined;
    };
    std::string config_fingerprint;
    std::vector<std::uint64_t> seeds;
    std::vector<SeedRow> rows;
    metrics::MetricReport base_mean;
    metrics::MetricReport refined_mean;
    std::map<std::string, std::optional<double>> improvement;
    double runtime_seconds = 0.0;  // kept out of the serialized report

    std::string to_text() const;
    std::string to_json_text() const;
};

/// Everything the arms share: the corpus, its split, the catalog, raw
/// 1-10 scores for items and users, and the fitted normalizer.
struct Pipeline {
    corpus::Dataset dataset;
    corpus::SplitDataset split;
    aspects::AspectCatalog catalog;
    std::map<std::string, std::vector<double>> item_scores;
    std::map<std::string, std::vector<double>> user_scores;
    guided::Normalizer normalizer;
    seqrec::UserGuidedMap users_guided;
};

Pipeline prepare_pipeline(const ExperimentConfig& config);

std::unique_ptr<scorer::ScorerBackend> make_backend(const ExperimentConfig& config,
                                                    const corpus::Dataset& dataset);

/// Trains and evaluates the base and refined arms for every seed with
/// matched splits, epochs and per-seed initialization streams, then
/// aggregates means and improvement percentages. `workers` bounds the
/// number of parallel (seed, arm) runs; 0 picks a sensible default.
ComparisonReport run_experiment(const ExperimentConfig& config, std::size_t workers = 0);

/// Writes report.txt / report.json (deterministic) and run.log (timing).
void write_report_files(const ComparisonReport& report, const std::string& out_dir,
                        const std::string& stem = "report");

struct AblationReport {
    std::string title;
    std::string config_fingerprint;
    std::vector<std::string> row_labels;
    std::vector<std::string> metric_labels;
    std::vector<std::map<std::string, double>> values;  // one map per row
    double runtime_seconds = 0.0;

    std::string to_text() const;
    std::string to_json_text() const;
};

/// Improvement-vs-dimension sweep over catalog prefixes; total embedding
/// width stays fixed by shrinking the base block.
AblationReport ablate_guided_dim(const ExperimentConfig& config,
                                 const std::vector<std::size_t>& dims,
                                 std::size_t workers = 0);

/// Pure-base models at several widths against the refined reference;
/// every metric is normalized so the refined row equals 1.
AblationReport ablate_base_dim(const ExperimentConfig& config,
                               const std::vector<std::size_t>& dims, std::size_t workers = 0);

/// Improvement for each guided-embedding weight in `values`.
AblationReport ablate_mu(const ExperimentConfig& config, const std::vector<double>& values,
                         std::size_t workers = 0);

struct TaskAblationReport {
    std::string config_fingerprint;
    metrics::MetricReport base_mean;
    metrics::MetricReport ref_base_mean;  // zero-shot scoring path
    metrics::MetricReport ref_cls_mean;   // classification-fine-tuned surrogate path
    std::map<std::string, std::optional<double>> imp_base;
    std::map<std::string, std::optional<double>> imp_cls;
    double surrogate_auc_before = 0.0;
    double surrogate_auc = 0.0;
    double runtime_seconds = 0.0;

    std::string to_text() const;
    std::string to_json_text() const;
};

/// Compares refined embeddings whose user scores come from the plain
/// scoring backend against ones from a classification-fine-tuned
/// surrogate, both against the base arm.
TaskAblationReport ablate_finetune_task(const ExperimentConfig& config,
                                        std::size_t workers = 0);

struct InterpretabilityReport {
    std::string text;
    std::string json_text;
};

/// Side-by-side raw aspect scores for one user and one item with the
/// normalized per-aspect difference |user - item| / 9, restricted to
/// `selected_aspects` (all aspects when empty).
InterpretabilityReport interpretability_report(
    const std::string& user_id, const std::string& item_id,
    const std::map<std::string, std::vector<double>>& item_scores,
    const std::map<std::string, std::vector<double>>& user_scores,
    const aspects::AspectCatalog& catalog, const std::vector<std::string>& selected_aspects);

/// Published full-scale reference numbers rendered as report footnotes.
std::vector<std::string> reference_annotations();

}  // namespace ger::harness
