// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#include "ger/scorer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ger/metrics.hpp"

namespace ger::scorer {

namespace {

using json = nlohmann::json;

std::string now_utc_iso() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

std::optional<double> parse_number(std::string_view token) {
    std::string t = trim(token);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

ParseResult parse_scores(const std::string& text, const aspects::AspectCatalog& catalog) {
    ParseResult result;
    const std::size_t m = catalog.size();
    std::map<std::string, std::size_t> name_to_idx;
    for (std::size_t i = 0; i < m; ++i) name_to_idx[lower(catalog.aspects[i].name)] = i;

    std::vector<std::optional<double>> values(m);
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::string stripped = trim(line);
        if (stripped.empty()) continue;
        std::size_t colon = stripped.find(':');
        if (colon == std::string::npos) {
            ++result.report.extra_lines;
            continue;
        }
        auto it = name_to_idx.find(lower(trim(stripped.substr(0, colon))));
        if (it == name_to_idx.end() || values[it->second].has_value()) {
            ++result.report.extra_lines;
            continue;
        }
        auto v = parse_number(stripped.substr(colon + 1));
        if (!v) {
            ++result.report.extra_lines;
            continue;
        }
        if (*v < 1.0 || *v > 10.0) {
            *v = std::clamp(*v, 1.0, 10.0);
            ++result.report.clamped;
        }
        values[it->second] = *v;
    }

    for (std::size_t i = 0; i < m; ++i)
        if (!values[i]) result.report.missing_aspects.push_back(catalog.aspects[i].name);
    result.report.valid = result.report.missing_aspects.empty();
    if (result.report.valid) {
        std::vector<double> scores(m);
        for (std::size_t i = 0; i < m; ++i) scores[i] = *values[i];
        result.scores = std::move(scores);
    }
    return result;
}

std::string render_score_block(const std::vector<double>& scores,
                               const aspects::AspectCatalog& catalog) {
    if (scores.size() != catalog.size())
        throw Error("render_score_block: score/catalog size mismatch");
    std::string out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out += catalog.aspects[i].name;
        out += ": ";
        out += format_shortest(scores[i]);
        if (i + 1 < scores.size()) out += "\n";
    }
    return out;
}

std::vector<std::string> extract_format_aspects(const std::string& system_prompt) {
    static constexpr std::string_view kSuffix = ": <rating>";
    std::vector<std::string> names;
    std::istringstream lines(system_prompt);
    std::string line;
    while (std::getline(lines, line)) {
        std::string stripped = trim(line);
        if (stripped.size() > kSuffix.size() &&
            stripped.compare(stripped.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0)
            names.push_back(stripped.substr(0, stripped.size() - kSuffix.size()));
    }
    return names;
}

double format_loss_diag(const FormatReport& report, const aspects::AspectCatalog& catalog) {
    if (catalog.size() == 0) throw Error("format_loss_diag: empty catalog");
    return static_cast<double>(report.missing_aspects.size() + report.clamped) /
           static_cast<double>(catalog.size());
}

double composite_finetune_loss(double l_rec, bool format_valid, double l_format_diag,
                               double lambda_ok, double lambda_bad) {
    if (lambda_ok <= 0 || lambda_bad <= 0)
        throw Error("composite_finetune_loss: lambda weights must be > 0");
    if (l_format_diag < 0) throw Error("composite_finetune_loss: format diagnostic must be >= 0");
    if (format_valid) return l_rec + lambda_ok * l_format_diag;
    return lambda_bad * l_format_diag;
}

// ---------------------------------------------------------------------------
// Mock backend

std::string MockBackend::fingerprint() const {
    std::uint64_t h = fnv1a64("mock_deterministic");
    h = fnv1a64_u64(seed_, h);
    return hex64(h);
}

std::string MockBackend::request(const aspects::PromptPair& prompt) {
    std::vector<std::string> names = extract_format_aspects(prompt.system);
    if (names.empty()) throw Error("mock backend: prompt has no answer-format block");
    std::uint64_t h = fnv1a64(prompt.system);
    h = fnv1a64(prompt.user, h);
    h = fnv1a64_u64(seed_, h);
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        std::uint64_t hv = mix64(fnv1a64(names[i], h));
        out += names[i];
        out += ": ";
        out += std::to_string(1 + hv % 10);
        if (i + 1 < names.size()) out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Planted oracle backend

PlantedOracleBackend::PlantedOracleBackend(corpus::PlantedTruth truth) : truth_(std::move(truth)) {
    std::uint64_t h = fnv1a64("planted_oracle");
    h = fnv1a64_u64(truth_.seed, h);
    h = fnv1a64(format_shortest(truth_.noise_scale), h);
    for (const auto& [id, v] : truth_.item_aspects) {
        h = fnv1a64(id, h);
        for (double x : v) h = fnv1a64(format_fixed(x, 1), h);
    }
    for (const auto& [id, v] : truth_.user_prefs) {
        h = fnv1a64(id, h);
        for (double x : v) h = fnv1a64(format_fixed(x, 1), h);
    }
    fingerprint_ = hex64(h);
}

namespace {

/// Indexed values from the last "taste profile:"/"aspect profile:" line
/// embedded in a synthetic prompt.
std::map<std::size_t, double> parse_planted_profile(const std::string& text) {
    std::size_t pos = text.rfind("taste profile:");
    std::size_t skip = std::strlen("taste profile:");
    if (pos == std::string::npos) {
        pos = text.rfind("aspect profile:");
        skip = std::strlen("aspect profile:");
    }
    if (pos == std::string::npos)
        throw Error("planted oracle: prompt carries no planted profile line");
    std::size_t end = text.find('\n', pos);
    std::string line = text.substr(pos + skip, (end == std::string::npos ? text.size() : end) -
                                                   pos - skip);
    std::map<std::size_t, double> values;
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
        std::size_t eq = tok.find('=');
        if (eq == std::string::npos || tok.empty() || tok[0] != 'a') continue;
        std::size_t idx = 0;
        auto [p1, e1] = std::from_chars(tok.data() + 1, tok.data() + eq, idx);
        if (e1 != std::errc() || p1 != tok.data() + eq) continue;
        auto v = parse_number(tok.substr(eq + 1));
        if (v) values[idx] = *v;
    }
    return values;
}

}  // namespace

std::string PlantedOracleBackend::request(const aspects::PromptPair& prompt) {
    std::vector<std::string> names = extract_format_aspects(prompt.system);
    if (names.empty()) throw Error("planted oracle: prompt has no answer-format block");
    std::map<std::size_t, double> profile = parse_planted_profile(prompt.user);
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto it = profile.find(i + 1);
        if (it == profile.end())
            throw Error("planted oracle: profile lacks coordinate " + std::to_string(i + 1));
        long v = std::clamp<long>(std::lround(it->second), 1, 10);
        out += names[i];
        out += ": ";
        out += std::to_string(v);
        if (i + 1 < names.size()) out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// HTTP chat backend

HttpChatBackend::HttpChatBackend(HttpChatConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("http backend: endpoint must not be empty");
}

std::string HttpChatBackend::fingerprint() const {
    std::uint64_t h = fnv1a64("http_chat");
    h = fnv1a64(config_.endpoint, h);
    h = fnv1a64(config_.model, h);
    h = fnv1a64(format_shortest(config_.temperature), h);
    return hex64(h);
}

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("http backend: endpoint must start with http:// or https://");
    std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string HttpChatBackend::request(const aspects::PromptPair& prompt) {
    SplitUrl url = split_url(config_.endpoint);
    json body;
    body["model"] = config_.model;
    body["messages"] = json::array({json{{"role", "system"}, {"content", prompt.system}},
                                    json{{"role", "user"}, {"content", prompt.user}}});
    body["temperature"] = config_.temperature;
    std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config_.backoff_ms * (1 << (attempt - 1))));
        httplib::Client client(url.base);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw AuthError("http backend: authentication rejected (status " +
                            std::to_string(res->status) + ")");
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        json reply = json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
            last_error = "unparseable completion body";
            continue;
        }
        try {
            return reply["choices"][0].at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            last_error = "completion body lacks message content";
            continue;
        }
    }
    throw RetryableError("http backend: giving up after " +
                         std::to_string(config_.max_retries + 1) + " attempts; last error: " +
                         last_error);
}

// ---------------------------------------------------------------------------
// Surrogate scorer

SurrogateScorer SurrogateScorer::zeros(std::size_t num_aspects, std::size_t num_buckets) {
    SurrogateScorer s;
    s.num_aspects = num_aspects;
    s.num_buckets = num_buckets;
    s.weights.assign(num_aspects * num_buckets, 0.0);
    s.bias.assign(num_aspects, 0.0);
    return s;
}

std::vector<std::pair<std::uint32_t, double>> hashed_bag(const std::string& text,
                                                         std::size_t buckets) {
    std::map<std::uint32_t, double> counts;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i == start) continue;
        std::size_t b = start, e = i;
        while (b < e && !std::isalnum(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && !std::isalnum(static_cast<unsigned char>(text[e - 1]))) --e;
        if (b == e) continue;
        std::string token = lower(std::string_view(text).substr(b, e - b));
        counts[static_cast<std::uint32_t>(fnv1a64(token) % buckets)] += 1.0;
    }
    double norm = 0.0;
    for (const auto& [k, v] : counts) norm += v * v;
    norm = norm > 0 ? std::sqrt(norm) : 1.0;
    std::vector<std::pair<std::uint32_t, double>> out;
    out.reserve(counts.size());
    for (const auto& [k, v] : counts) out.emplace_back(k, v / norm);
    return out;
}

std::vector<double> SurrogateScorer::scores_for(const std::string& prompt_user_text) const {
    auto phi = hashed_bag(prompt_user_text, num_buckets);
    std::vector<double> out(num_aspects);
    for (std::size_t j = 0; j < num_aspects; ++j) {
        double z = bias[j];
        const double* row = weights.data() + j * num_buckets;
        for (const auto& [bucket, value] : phi) z += row[bucket] * value;
        out[j] = 5.5 + 4.5 * std::tanh(z);
    }
    return out;
}

std::string SurrogateScorer::fingerprint() const {
    std::uint64_t h = fnv1a64("trainable_surrogate");
    h = fnv1a64_u64(num_aspects, h);
    h = fnv1a64_u64(num_buckets, h);
    auto hash_doubles = [&h](const std::vector<double>& v) {
        for (double d : v) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, sizeof(bits));
            h = fnv1a64_u64(bits, h);
        }
    };
    hash_doubles(weights);
    hash_doubles(bias);
    return hex64(h);
}

std::string SurrogateBackend::fingerprint() const { return scorer_.fingerprint(); }

std::string SurrogateBackend::request(const aspects::PromptPair& prompt) {
    std::vector<std::string> names = extract_format_aspects(prompt.system);
    if (names.empty()) throw Error("surrogate backend: prompt has no answer-format block");
    if (names.size() != scorer_.num_aspects)
        throw Error("surrogate backend: trained for " + std::to_string(scorer_.num_aspects) +
                    " aspects, prompt asks for " + std::to_string(names.size()));
    std::vector<double> scores = scorer_.scores_for(prompt.user);
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out += names[i];
        out += ": ";
        out += format_shortest(scores[i]);
        if (i + 1 < names.size()) out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classification fine-tuning

namespace {

struct Pair {
    std::size_t user_idx;
    std::string item_id;
    int label;
};

/// Centered affinity between two score vectors on the 1-10 scale, scaled
/// into a range the logistic link can separate.
double centered_affinity(const std::vector<double>& user_scores,
                         const std::vector<double>& item_scores) {
    double z = 4.5 * 4.5 * std::sqrt(static_cast<double>(user_scores.size()));
    double a = 0.0;
    for (std::size_t j = 0; j < user_scores.size(); ++j)
        a += (user_scores[j] - 5.5) * (item_scores[j] - 5.5);
    return a / z;
}

double softplus(double x) {
    if (x > 30) return x;
    if (x < -30) return 0.0;
    return std::log1p(std::exp(x));
}

}  // namespace

FinetuneResult finetune_classification(
    SurrogateScorer surrogate, const corpus::Dataset& dataset,
    const aspects::AspectCatalog& catalog, const FinetuneConfig& config,
    const std::map<std::string, std::vector<double>>* item_scores) {
    const std::size_t m = catalog.size();
    if (surrogate.num_aspects != m)
        throw Error("finetune_classification: surrogate/catalog aspect count mismatch");
    if (config.like_threshold <= 1.0 || config.like_threshold >= 5.0)
        throw Error("finetune_classification: like_threshold must lie inside (1, 5)");

    // frozen item-side scores: explicit map, else rounded planted truth
    std::map<std::string, std::vector<double>> frozen;
    if (item_scores) {
        frozen = *item_scores;
    } else if (dataset.planted) {
        for (const auto& [id, v] : dataset.planted->item_aspects) {
            std::vector<double> r(v.size());
            for (std::size_t j = 0; j < v.size(); ++j)
                r[j] = static_cast<double>(std::clamp<long>(std::lround(v[j]), 1, 10));
            frozen[id] = std::move(r);
        }
    } else {
        throw Error(
            "finetune_classification: dataset has no planted truth; pass item_scores");
    }

    corpus::SplitDataset split = corpus::split_leave_one_out(dataset);

    // one prompt per user from the training-prefix history
    std::vector<std::string> user_ids;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> features;
    std::vector<std::string> prompts;
    std::string system_prompt;
    std::map<std::string, std::size_t> user_idx;
    for (const auto& [uid, seq] : dataset.users) {
        auto history = user_history(dataset, uid, &split);
        if (history.empty()) continue;
        aspects::PromptPair p = aspects::render_user_prompt(history, catalog, config.max_reviews);
        system_prompt = p.system;
        user_idx[uid] = user_ids.size();
        user_ids.push_back(uid);
        features.push_back(hashed_bag(p.user, surrogate.num_buckets));
        prompts.push_back(std::move(p.user));
    }
    if (user_ids.empty()) throw Error("finetune_classification: no scorable users");

    std::vector<Pair> pairs;
    for (const auto& [uid, seq] : dataset.users) {
        auto uit = user_idx.find(uid);
        if (uit == user_idx.end()) continue;
        for (const corpus::Interaction& it : seq) {
            if (!frozen.count(it.item_id)) continue;
            pairs.push_back(
                {uit->second, it.item_id, it.rating > config.like_threshold ? 1 : 0});
        }
    }
    if (pairs.size() < 4) throw Error("finetune_classification: not enough labeled pairs");

    Rng rng = Rng(config.seed).fork("holdout");
    rng.shuffle(pairs);
    std::size_t n_hold = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.holdout_fraction *
                                                 static_cast<double>(pairs.size()))));
    if (n_hold >= pairs.size()) n_hold = pairs.size() / 2;
    std::vector<Pair> holdout(pairs.end() - static_cast<long>(n_hold), pairs.end());
    pairs.resize(pairs.size() - n_hold);

    auto class_check = [](const std::vector<Pair>& ps, const char* which) {
        bool pos = false, neg = false;
        for (const Pair& p : ps) (p.label ? pos : neg) = true;
        if (!pos || !neg)
            throw Error(std::string("finetune_classification: ") + which +
                        " pairs lack a positive or negative label");
    };
    class_check(pairs, "training");
    class_check(holdout, "held-out");

    auto evaluate_auc = [&](const SurrogateScorer& s) {
        std::vector<int> labels;
        std::vector<double> scores;
        std::vector<std::vector<double>> user_scores(user_ids.size());
        for (const Pair& p : holdout) {
            if (user_scores[p.user_idx].empty())
                user_scores[p.user_idx] = s.scores_for(prompts[p.user_idx]);
            labels.push_back(p.label);
            scores.push_back(centered_affinity(user_scores[p.user_idx], frozen.at(p.item_id)));
        }
        return metrics::auc_roc(labels, scores);
    };

    FinetuneResult result;
    result.auc_before = evaluate_auc(surrogate);

    const double affinity_scale = 4.5 * 4.5 * std::sqrt(static_cast<double>(m));
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    std::vector<std::vector<const Pair*>> by_user(user_ids.size());
    for (const Pair& p : pairs) by_user[p.user_idx].push_back(&p);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<double> grad_w(surrogate.weights.size(), 0.0);
        std::vector<double> grad_b(surrogate.bias.size(), 0.0);
        double loss_rec = 0.0;
        for (std::size_t u = 0; u < user_ids.size(); ++u) {
            if (by_user[u].empty()) continue;
            // forward
            std::vector<double> z(m), s(m);
            for (std::size_t j = 0; j < m; ++j) {
                double zz = surrogate.bias[j];
                const double* row = surrogate.weights.data() + j * surrogate.num_buckets;
                for (const auto& [bucket, value] : features[u]) zz += row[bucket] * value;
                z[j] = zz;
                s[j] = 5.5 + 4.5 * std::tanh(zz);
            }
            std::vector<double> ds(m, 0.0);
            for (const Pair* p : by_user[u]) {
                const std::vector<double>& si = frozen.at(p->item_id);
                double a = centered_affinity(s, si);
                loss_rec += (softplus(a) - static_cast<double>(p->label) * a) * inv_n;
                double da = (1.0 / (1.0 + std::exp(-a)) - static_cast<double>(p->label)) * inv_n;
                for (std::size_t j = 0; j < m; ++j)
                    ds[j] += da * (si[j] - 5.5) / affinity_scale;
            }
            for (std::size_t j = 0; j < m; ++j) {
                double th = std::tanh(z[j]);
                double dz = ds[j] * 4.5 * (1.0 - th * th);
                grad_b[j] += dz;
                double* grow = grad_w.data() + j * surrogate.num_buckets;
                for (const auto& [bucket, value] : features[u]) grow[bucket] += dz * value;
            }
        }
        // the emitted block is parsed back so the reported loss carries the
        // same format term the composed objective defines
        double diag = 0.0;
        bool all_valid = true;
        {
            SurrogateBackend probe(surrogate);
            ParseResult pr =
                parse_scores(probe.request({system_prompt, prompts[0]}), catalog);
            all_valid = pr.report.valid;
            diag = format_loss_diag(pr.report, catalog);
        }
        result.loss_curve.push_back(composite_finetune_loss(loss_rec, all_valid, diag,
                                                            config.lambda_ok, config.lambda_bad));
        for (std::size_t k = 0; k < surrogate.weights.size(); ++k)
            surrogate.weights[k] -= config.learning_rate * grad_w[k];
        for (std::size_t j = 0; j < m; ++j)
            surrogate.bias[j] -= config.learning_rate * grad_b[j];
    }

    result.auc = config.epochs == 0 ? result.auc_before : evaluate_auc(surrogate);
    result.scorer = std::move(surrogate);
    return result;
}

// ---------------------------------------------------------------------------
// Cache

ScoreCache::ScoreCache(const ScoreCache& other) {
    std::shared_lock lock(other.mutex_);
    entries_ = other.entries_;
    corrupt_skipped_ = other.corrupt_skipped_;
}

ScoreCache ScoreCache::load(const std::string& path) {
    ScoreCache cache;
    std::ifstream in(path);
    if (!in) return cache;  // a missing cache is just empty
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++cache.corrupt_skipped_;
            continue;
        }
        try {
            CacheEntry e;
            e.subject_kind = j.at("kind").get<std::string>();
            e.subject_id = j.at("subject_id").get<std::string>();
            e.key.subject_fp = j.at("subject_fp").get<std::string>();
            e.key.catalog_fp = j.at("catalog_fp").get<std::string>();
            e.key.backend_fp = j.at("backend_fp").get<std::string>();
            e.scores = j.at("scores").get<std::vector<double>>();
            e.raw_text = j.at("raw_text").get<std::string>();
            e.created_at = j.at("created_at").get<std::string>();
            cache.entries_[e.key] = std::move(e);
        } catch (const json::exception&) {
            ++cache.corrupt_skipped_;
        }
    }
    return cache;
}

void ScoreCache::store(const std::string& path) const {
    std::shared_lock lock(mutex_);
    std::ostringstream out;
    for (const auto& [key, e] : entries_) {
        json j;
        j["kind"] = e.subject_kind;
        j["subject_id"] = e.subject_id;
        j["subject_fp"] = key.subject_fp;
        j["catalog_fp"] = key.catalog_fp;
        j["backend_fp"] = key.backend_fp;
        j["scores"] = e.scores;
        j["raw_text"] = e.raw_text;
        j["created_at"] = e.created_at;
        out << j.dump() << "\n";
    }
    write_text_file(path, out.str());
}

std::optional<CacheEntry> ScoreCache::get(const CacheKey& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ScoreCache::put(CacheEntry entry) {
    std::unique_lock lock(mutex_);
    entries_[entry.key] = std::move(entry);
}

std::optional<CacheEntry> ScoreCache::find_subject(const std::string& kind,
                                                   const std::string& subject_id,
                                                   const std::string& catalog_fp,
                                                   const std::string& backend_fp) const {
    std::shared_lock lock(mutex_);
    for (const auto& [key, e] : entries_)
        if (e.subject_kind == kind && e.subject_id == subject_id &&
            key.catalog_fp == catalog_fp && key.backend_fp == backend_fp)
            return e;
    return std::nullopt;
}

std::map<std::string, std::vector<double>> ScoreCache::collect(const std::string& kind,
                                                               const std::string& catalog_fp) const {
    std::shared_lock lock(mutex_);
    std::map<std::string, std::vector<double>> out;
    for (const auto& [key, e] : entries_)
        if (e.subject_kind == kind && (catalog_fp.empty() || key.catalog_fp == catalog_fp))
            out[e.subject_id] = e.scores;
    return out;
}

std::size_t ScoreCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// Scoring drivers

namespace {

GuidedScores scores_from_entry(const CacheEntry& e) {
    GuidedScores s;
    s.scores = e.scores;
    s.subject_id = e.subject_id;
    s.catalog_fingerprint = e.key.catalog_fp;
    s.backend_fingerprint = e.key.backend_fp;
    s.raw_text = e.raw_text;
    return s;
}

GuidedScores score_prompt(ScorerBackend& backend, const std::string& subject_kind,
                          const std::string& subject_id, const aspects::PromptPair& prompt,
                          const aspects::AspectCatalog& catalog, ScoreCache& cache,
                          int max_format_retries) {
    CacheKey key;
    key.subject_fp = hex64(fnv1a64(prompt.user, fnv1a64(subject_id)));
    key.catalog_fp = catalog.fingerprint();
    key.backend_fp = backend.fingerprint();
    if (auto hit = cache.get(key)) return scores_from_entry(*hit);

    FormatReport last;
    int attempts = 1 + std::max(0, max_format_retries);
    for (int a = 0; a < attempts; ++a) {
        std::string raw = backend.request(prompt);
        ParseResult pr = parse_scores(raw, catalog);
        if (pr.report.valid) {
            CacheEntry e;
            e.subject_kind = subject_kind;
            e.subject_id = subject_id;
            e.key = key;
            e.scores = *pr.scores;
            e.raw_text = raw;
            e.created_at = now_utc_iso();
            cache.put(e);
            return scores_from_entry(e);
        }
        last = pr.report;
    }
    throw UnscorableError(subject_id, last);
}

template <typename Job>
BatchScoreResult run_batch(const std::vector<std::string>& ids, std::size_t max_inflight,
                           Job job) {
    BatchScoreResult result;
    if (ids.empty()) return result;
    std::size_t workers = std::clamp<std::size_t>(max_inflight, 1, ids.size());
    std::vector<std::optional<GuidedScores>> slots(ids.size());
    std::vector<char> failed(ids.size(), 0);
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= ids.size()) return;
            try {
                slots[i] = job(ids[i]);
            } catch (const UnscorableError&) {
                failed[i] = 1;
            } catch (...) {
                std::scoped_lock lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (failed[i])
            result.failed.push_back(ids[i]);
        else if (slots[i])
            result.scores.emplace(ids[i], std::move(*slots[i]));
    }
    return result;
}

}  // namespace

GuidedScores score_item(ScorerBackend& backend, const corpus::ItemRecord& item,
                        const aspects::AspectCatalog& catalog, ScoreCache& cache,
                        int max_format_retries) {
    aspects::PromptPair prompt = aspects::render_item_prompt(item, catalog);
    return score_prompt(backend, "item", item.item_id, prompt, catalog, cache,
                        max_format_retries);
}

GuidedScores score_user(ScorerBackend& backend, const std::string& user_id,
                        const std::vector<aspects::ReviewEntry>& history,
                        const aspects::AspectCatalog& catalog, ScoreCache& cache,
                        int max_format_retries, std::size_t max_reviews) {
    aspects::PromptPair prompt = aspects::render_user_prompt(history, catalog, max_reviews);
    return score_prompt(backend, "user", user_id, prompt, catalog, cache, max_format_retries);
}

std::vector<aspects::ReviewEntry> user_history(const corpus::Dataset& dataset,
                                               const std::string& user_id,
                                               const corpus::SplitDataset* split) {
    auto uit = dataset.users.find(user_id);
    if (uit == dataset.users.end()) throw Error("user_history: unknown user " + user_id);
    const std::vector<corpus::Interaction>& seq = uit->second;
    std::size_t end = seq.size();
    if (split) {
        auto sit = split->users.find(user_id);
        if (sit != split->users.end()) end = sit->second.train_len;
    }
    std::vector<aspects::ReviewEntry> history;
    history.reserve(end);
    for (std::size_t k = 0; k < end; ++k) {
        auto iit = dataset.items.find(seq[k].item_id);
        if (iit == dataset.items.end())
            throw Error("user_history: interaction references unknown item " + seq[k].item_id);
        history.push_back({seq[k], iit->second});
    }
    return history;
}

BatchScoreResult score_all_items(ScorerBackend& backend, const corpus::Dataset& dataset,
                                 const aspects::AspectCatalog& catalog, ScoreCache& cache,
                                 std::size_t max_inflight) {
    std::vector<std::string> ids;
    ids.reserve(dataset.items.size());
    for (const auto& [id, rec] : dataset.items) ids.push_back(id);
    return run_batch(ids, max_inflight, [&](const std::string& id) {
        return score_item(backend, dataset.items.at(id), catalog, cache);
    });
}

BatchScoreResult score_all_users(ScorerBackend& backend, const corpus::Dataset& dataset,
                                 const corpus::SplitDataset* split,
                                 const aspects::AspectCatalog& catalog, ScoreCache& cache,
                                 std::size_t max_inflight, std::size_t max_reviews) {
    std::vector<std::string> ids;
    ids.reserve(dataset.users.size());
    for (const auto& [id, seq] : dataset.users) ids.push_back(id);
    return run_batch(ids, max_inflight, [&](const std::string& id) {
        return score_user(backend, id, user_history(dataset, id, split), catalog, cache,
                          3, max_reviews);
    });
}

}  // namespace ger::scorer
