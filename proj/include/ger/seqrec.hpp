// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ger/corpus.hpp"
#include "ger/guided.hpp"
#include "ger/metrics.hpp"

namespace ger::seqrec {

enum class EncoderKind { gru, attention };
enum class UserVariant { concat_user, sequence_refined };

std::string encoder_name(EncoderKind k);
EncoderKind parse_encoder(const std::string& name);
std::string variant_name(UserVariant v);
UserVariant parse_variant(const std::string& name);

struct ModelConfig {
    EncoderKind encoder = EncoderKind::gru;
    UserVariant user_variant = UserVariant::concat_user;
    std::size_t max_seq_len = 50;
    std::size_t num_heads = 1;
    double dropout = 0.0;
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
};

/// Encoder parameters, keyed by name so optimizer state and checkpoints
/// stay deterministic. With concat_user the encoder runs on the base
/// block (hidden = base_dim); with sequence_refined it runs on the full
/// refined embeddings (hidden = refined_dim).
struct Model {
    ModelConfig config;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::map<std::string, Eigen::MatrixXd> params;
};

Model init_model(const ModelConfig& config, const guided::RefinedConfig& dims,
                 std::uint64_t seed);

/// Normalized per-user guided vectors (mu not yet applied).
using UserGuidedMap = std::map<std::string, std::vector<double>>;

/// Encodes the sequence (truncated to the last max_seq_len items) and
/// returns the refined user representation. concat_user appends
/// mu * user_guided to the encoder output and requires it whenever the
/// table carries guided dimensions.
Eigen::VectorXd forward_user(const Model& model, const guided::EmbeddingTable& table,
                             const std::vector<std::string>& item_sequence,
                             const std::vector<double>* user_guided);

/// Dot products against refined item embeddings, one per candidate.
std::vector<double> score_candidates(const Eigen::VectorXd& user_rep,
                                     const guided::EmbeddingTable& table,
                                     const std::vector<std::string>& candidates);

/// Candidate order by descending score, ties broken by ascending id.
std::vector<std::size_t> ranking(const std::vector<double>& scores,
                                 const std::vector<std::string>& ids);

struct TrainResult {
    Model model;
    guided::EmbeddingTable table;
    std::vector<double> loss_curve;  // per-epoch mean cross-entropy
};

/// Next-item training: full-softmax cross-entropy over the catalog at
/// every training-prefix position, minimized with Adam. Base embeddings
/// and encoder parameters update; the guided block never does.
TrainResult train(Model model, guided::EmbeddingTable table, const corpus::Dataset& dataset,
                  const corpus::SplitDataset& split, const UserGuidedMap& users_guided,
                  const TrainConfig& config);

enum class EvalTarget { test, validation };

/// Ranks each held-out target against the full catalog.
metrics::MetricReport evaluate(const Model& model, const guided::EmbeddingTable& table,
                               const corpus::Dataset& dataset, const corpus::SplitDataset& split,
                               const UserGuidedMap& users_guided, const std::vector<int>& ks,
                               EvalTarget target = EvalTarget::test);

struct GradCheckReport {
    double max_rel_err = 0.0;
    /// Largest change a training step applied to the frozen guided block.
    double frozen_guided_update_max = 0.0;
    std::size_t entries_checked = 0;
    bool passed = false;
};

/// Compares the tape gradients of the training loss against central
/// finite differences for every encoder parameter and base-embedding
/// entry, on a small self-generated fixture.
GradCheckReport grad_check(const ModelConfig& config, const guided::RefinedConfig& dims,
                           double epsilon = 1e-5, double tolerance = 1e-3);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);
std::string model_fingerprint(const Model& model);

}  // namespace ger::seqrec
