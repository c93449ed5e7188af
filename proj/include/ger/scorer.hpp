// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ger/aspects.hpp"
#include "ger/common.hpp"
#include "ger/corpus.hpp"

namespace ger::scorer {

/// Outcome of parsing one scoring response against a catalog.
struct FormatReport {
    bool valid = false;
    std::vector<std::string> missing_aspects;
    std::size_t extra_lines = 0;
    std::size_t clamped = 0;
};

/// Raw 1-10 aspect scores for one subject, with the fingerprints that
/// identify the (catalog, backend) pair that produced them.
struct GuidedScores {
    std::vector<double> scores;
    std::string subject_id;
    std::string catalog_fingerprint;
    std::string backend_fingerprint;
    std::string raw_text;
};

/// `scores` is engaged iff `report.valid`.
struct ParseResult {
    std::optional<std::vector<double>> scores;
    FormatReport report;
};

/// Rule-based extraction of "name: value" lines. Names match the catalog
/// case-insensitively; the first line per aspect wins; values outside
/// [1, 10] are clamped and counted; unmatched non-empty lines count as
/// extra. Any aspect without a usable value makes the result invalid.
ParseResult parse_scores(const std::string& text, const aspects::AspectCatalog& catalog);

/// Renders scores in the response format the prompts demand. Values use
/// the shortest decimal form that parses back to the identical double.
std::string render_score_block(const std::vector<double>& scores,
                               const aspects::AspectCatalog& catalog);

/// Aspect names listed in a system prompt's answer-format block.
std::vector<std::string> extract_format_aspects(const std::string& system_prompt);

/// Count-ratio format diagnostic: (missing + clamped) / m. Zero iff the
/// response was fully well-formed.
double format_loss_diag(const FormatReport& report, const aspects::AspectCatalog& catalog);

/// Fine-tuning loss composition: recommendation loss plus weighted format
/// diagnostic; an invalid format zeroes the recommendation term and
/// switches to the heavier format weight.
double composite_finetune_loss(double l_rec, bool format_valid, double l_format_diag,
                               double lambda_ok, double lambda_bad);

// ---------------------------------------------------------------------------
// Backends

/// Transient failure (network, throttling) after exhausting retries.
class RetryableError : public Error {
public:
    explicit RetryableError(const std::string& msg) : Error(msg) {}
};

/// Authentication rejected; retrying cannot help.
class AuthError : public Error {
public:
    explicit AuthError(const std::string& msg) : Error(msg) {}
};

/// A subject whose responses stayed malformed through all retries.
class UnscorableError : public Error {
public:
    UnscorableError(const std::string& subject_id, FormatReport report)
        : Error("subject " + subject_id + " unscorable after retries"),
          subject_id(subject_id),
          report(std::move(report)) {}
    std::string subject_id;
    FormatReport report;
};

class ScorerBackend {
public:
    virtual ~ScorerBackend() = default;
    virtual std::string kind() const = 0;
    /// Identity hash; a change invalidates every cache entry.
    virtual std::string fingerprint() const = 0;
    virtual std::string request(const aspects::PromptPair& prompt) = 0;
};

/// Emits a well-formed block whose integer values are a hash of
/// (prompt, seed); same prompt, same text, forever.
class MockBackend : public ScorerBackend {
public:
    explicit MockBackend(std::uint64_t seed) : seed_(seed) {}
    std::string kind() const override { return "mock_deterministic"; }
    std::string fingerprint() const override;
    std::string request(const aspects::PromptPair& prompt) override;

private:
    std::uint64_t seed_;
};

/// Recovers the planted aspect vectors that synthetic corpora embed in
/// their item descriptions ("aspect profile: a1=... a2=...") and review
/// texts ("taste profile: ..."), rounds them to integers and emits the
/// standard block. Construction takes the planted truth so the backend
/// identity is tied to the corpus it answers for.
class PlantedOracleBackend : public ScorerBackend {
public:
    explicit PlantedOracleBackend(corpus::PlantedTruth truth);
    std::string kind() const override { return "planted_oracle"; }
    std::string fingerprint() const override { return fingerprint_; }
    std::string request(const aspects::PromptPair& prompt) override;

private:
    corpus::PlantedTruth truth_;
    std::string fingerprint_;
};

struct HttpChatConfig {
    std::string endpoint;            // e.g. http://localhost:8080/v1/chat/completions
    std::string model;
    double temperature = 0.0;
    int max_retries = 3;
    int backoff_ms = 100;            // doubled per retry
    std::string api_key_env = "GER_API_KEY";
    int timeout_seconds = 60;
};

/// Chat-completion client: posts {model, messages, temperature} and
/// returns the first choice's message content.
class HttpChatBackend : public ScorerBackend {
public:
    explicit HttpChatBackend(HttpChatConfig config);
    std::string kind() const override { return "http_chat"; }
    std::string fingerprint() const override;
    std::string request(const aspects::PromptPair& prompt) override;

private:
    HttpChatConfig config_;
};

// ---------------------------------------------------------------------------
// Trainable surrogate

/// Per-aspect linear scorer over a hashed bag-of-tokens feature map of the
/// prompt text, squashed affinely into [1, 10]. Stands in for a fine-tuned
/// language model at desk scale.
struct SurrogateScorer {
    std::size_t num_aspects = 0;
    std::size_t num_buckets = 4096;
    std::vector<double> weights;  // num_aspects x num_buckets, row-major
    std::vector<double> bias;     // num_aspects

    static SurrogateScorer zeros(std::size_t num_aspects, std::size_t num_buckets = 4096);

    /// Scores for one prompt text; always within [1, 10].
    std::vector<double> scores_for(const std::string& prompt_user_text) const;
    std::string fingerprint() const;
};

/// Sparse L2-normalized token counts of `text`, hashed into `buckets`.
std::vector<std::pair<std::uint32_t, double>> hashed_bag(const std::string& text,
                                                         std::size_t buckets);

class SurrogateBackend : public ScorerBackend {
public:
    explicit SurrogateBackend(SurrogateScorer scorer) : scorer_(std::move(scorer)) {}
    std::string kind() const override { return "trainable_surrogate"; }
    std::string fingerprint() const override;
    std::string request(const aspects::PromptPair& prompt) override;
    const SurrogateScorer& scorer() const { return scorer_; }

private:
    SurrogateScorer scorer_;
};

struct FinetuneConfig {
    double like_threshold = 3.0;
    std::size_t epochs = 200;
    double learning_rate = 0.5;
    std::uint64_t seed = 7;
    double holdout_fraction = 0.2;
    double lambda_ok = 0.1;
    double lambda_bad = 1.0;
    std::size_t max_reviews = 10;
};

struct FinetuneResult {
    SurrogateScorer scorer;
    double auc_before = 0.0;  // held-out AUC of the untrained scorer
    double auc = 0.0;         // held-out AUC after training
    std::vector<double> loss_curve;
};

/// Binary like/dislike fine-tuning: full-batch gradient descent on the
/// logistic loss of the centered affinity between the surrogate's user
/// scores and frozen per-item scores. Item scores default to the rounded
/// planted truth when the dataset carries one; pass `item_scores` for
/// corpora without planted truth. Deterministic given the seed.
FinetuneResult finetune_classification(
    SurrogateScorer surrogate, const corpus::Dataset& dataset,
    const aspects::AspectCatalog& catalog, const FinetuneConfig& config,
    const std::map<std::string, std::vector<double>>* item_scores = nullptr);

// ---------------------------------------------------------------------------
// Cache

struct CacheKey {
    std::string subject_fp;
    std::string catalog_fp;
    std::string backend_fp;
    auto operator<=>(const CacheKey&) const = default;
};

struct CacheEntry {
    std::string subject_kind;  // "item" or "user"
    std::string subject_id;
    CacheKey key;
    std::vector<double> scores;
    std::string raw_text;
    std::string created_at;
};

/// Line-delimited JSON score cache. Reads are concurrent; writes are
/// serialized, last write wins on identical keys.
class ScoreCache {
public:
    ScoreCache() = default;
    ScoreCache(const ScoreCache& other);
    ScoreCache& operator=(const ScoreCache&) = delete;

    static ScoreCache load(const std::string& path);
    void store(const std::string& path) const;

    std::optional<CacheEntry> get(const CacheKey& key) const;
    void put(CacheEntry entry);
    std::optional<CacheEntry> find_subject(const std::string& kind, const std::string& subject_id,
                                           const std::string& catalog_fp,
                                           const std::string& backend_fp) const;
    /// All scores of one subject kind, optionally filtered by catalog
    /// fingerprint (empty matches everything). Later entries win per id.
    std::map<std::string, std::vector<double>> collect(const std::string& kind,
                                                       const std::string& catalog_fp = "") const;
    std::size_t size() const;
    std::size_t corrupt_skipped() const { return corrupt_skipped_; }

private:
    mutable std::shared_mutex mutex_;
    std::map<CacheKey, CacheEntry> entries_;
    std::size_t corrupt_skipped_ = 0;
};

// ---------------------------------------------------------------------------
// Scoring drivers

/// Scores one item, serving from the cache when possible. On malformed
/// responses retries up to `max_format_retries` further requests before
/// declaring the subject unscorable.
GuidedScores score_item(ScorerBackend& backend, const corpus::ItemRecord& item,
                        const aspects::AspectCatalog& catalog, ScoreCache& cache,
                        int max_format_retries = 3);

/// Scores one user from their review history (most recent `max_reviews`).
/// The cache key covers the rendered history, so appending an interaction
/// re-scores the user.
GuidedScores score_user(ScorerBackend& backend, const std::string& user_id,
                        const std::vector<aspects::ReviewEntry>& history,
                        const aspects::AspectCatalog& catalog, ScoreCache& cache,
                        int max_format_retries = 3, std::size_t max_reviews = 10);

struct BatchScoreResult {
    std::map<std::string, GuidedScores> scores;
    std::vector<std::string> failed;  // unscorable subject ids
};

/// Scores every catalog item with up to `max_inflight` concurrent requests.
BatchScoreResult score_all_items(ScorerBackend& backend, const corpus::Dataset& dataset,
                                 const aspects::AspectCatalog& catalog, ScoreCache& cache,
                                 std::size_t max_inflight = 4);

/// Scores every user from their training-prefix history (full history when
/// no split is given), truncated to `max_reviews` most recent reviews.
BatchScoreResult score_all_users(ScorerBackend& backend, const corpus::Dataset& dataset,
                                 const corpus::SplitDataset* split,
                                 const aspects::AspectCatalog& catalog, ScoreCache& cache,
                                 std::size_t max_inflight = 4, std::size_t max_reviews = 10);

/// The training-prefix review history used for user scoring.
std::vector<aspects::ReviewEntry> user_history(const corpus::Dataset& dataset,
                                               const std::string& user_id,
                                               const corpus::SplitDataset* split);

}  // namespace ger::scorer
