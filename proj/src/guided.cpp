// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#include "ger/guided.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "ger/common.hpp"

namespace ger::guided {

double xavier_target_std(std::size_t refined_dim) {
    if (refined_dim == 0) throw ConfigError("xavier_target_std: refined_dim must be >= 1");
    double d = static_cast<double>(refined_dim);
    return std::sqrt(2.0 / (d + d));
}

Normalizer fit_normalizer(const Eigen::MatrixXd& item_scores, std::size_t refined_dim,
                          double epsilon) {
    if (item_scores.rows() < 2)
        throw Error("fit_normalizer: need at least 2 items, got " +
                    std::to_string(item_scores.rows()));
    if (epsilon <= 0) throw ConfigError("fit_normalizer: epsilon must be > 0");
    Normalizer n;
    n.epsilon = epsilon;
    n.target_std = xavier_target_std(refined_dim);
    n.mean = item_scores.colwise().mean();
    Eigen::MatrixXd centered = item_scores.rowwise() - n.mean.transpose();
    n.std_dev = (centered.array().square().colwise().mean()).sqrt();
    return n;
}

std::vector<double> normalize(const Normalizer& n, const std::vector<double>& scores) {
    if (scores.size() != n.dims())
        throw Error("normalize: expected " + std::to_string(n.dims()) + " dims, got " +
                    std::to_string(scores.size()));
    std::vector<double> out(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
        long lj = static_cast<long>(j);
        out[j] = n.degenerate(j) ? 0.0
                                 : (scores[j] - n.mean(lj)) / n.std_dev(lj) * n.target_std;
    }
    return out;
}

void RefinedConfig::validate() const {
    if (base_dim < 1) throw ConfigError("refined config: base_dim must be >= 1");
    if (mu <= 0) throw ConfigError("refined config: mu must be > 0");
}

std::vector<double> refine(const std::vector<double>& base_vec,
                           const std::vector<double>& guided_vec, double mu) {
    if (base_vec.empty()) throw Error("refine: base part must have at least one dimension");
    if (mu <= 0) throw Error("refine: mu must be > 0");
    std::vector<double> out;
    out.reserve(base_vec.size() + guided_vec.size());
    out.insert(out.end(), base_vec.begin(), base_vec.end());
    for (double g : guided_vec) out.push_back(mu * g);
    return out;
}

std::size_t EmbeddingTable::item_index(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("embedding table: unknown item id " + id);
    return it->second;
}

Eigen::VectorXd EmbeddingTable::refined_col(std::size_t idx) const {
    Eigen::VectorXd out(config.base_dim + config.guided_dim);
    out.head(static_cast<long>(config.base_dim)) = base.col(static_cast<long>(idx));
    if (config.guided_dim > 0)
        out.tail(static_cast<long>(config.guided_dim)) =
            config.mu * guided.col(static_cast<long>(idx));
    return out;
}

Eigen::MatrixXd EmbeddingTable::refined_matrix() const {
    Eigen::MatrixXd out(config.base_dim + config.guided_dim, static_cast<long>(num_items()));
    out.topRows(static_cast<long>(config.base_dim)) = base;
    if (config.guided_dim > 0)
        out.bottomRows(static_cast<long>(config.guided_dim)) = config.mu * guided;
    return out;
}

void EmbeddingTable::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < ids.size(); ++i) index_[ids[i]] = i;
}

EmbeddingTable build_table(const std::map<std::string, corpus::ItemRecord>& items,
                           const std::map<std::string, std::vector<double>>& guided_scores,
                           const Normalizer* normalizer, const RefinedConfig& config,
                           std::uint64_t init_seed) {
    config.validate();
    if (items.empty()) throw Error("build_table: no items");
    EmbeddingTable t;
    t.config = config;
    for (const auto& [id, rec] : items) t.ids.push_back(id);
    t.rebuild_index();

    const long n = static_cast<long>(t.ids.size());
    const long db = static_cast<long>(config.base_dim);
    const long m = static_cast<long>(config.guided_dim);
    double sigma = xavier_target_std(config.refined_dim());
    double bound = sigma * std::sqrt(3.0);

    t.base.resize(db, n);
    Rng rng = Rng(init_seed).fork("base-init");
    for (long c = 0; c < n; ++c)
        for (long r = 0; r < db; ++r) t.base(r, c) = rng.uniform(-bound, bound);

    t.guided.resize(m, n);
    if (m > 0) {
        if (!normalizer) throw Error("build_table: guided_dim > 0 requires a normalizer");
        if (normalizer->dims() != config.guided_dim)
            throw Error("build_table: normalizer dims do not match guided_dim");
        std::vector<std::string> missing;
        for (long c = 0; c < n; ++c) {
            auto it = guided_scores.find(t.ids[static_cast<std::size_t>(c)]);
            if (it == guided_scores.end() || it->second.size() != config.guided_dim) {
                missing.push_back(t.ids[static_cast<std::size_t>(c)]);
                continue;
            }
            std::vector<double> norm = normalize(*normalizer, it->second);
            for (long r = 0; r < m; ++r) t.guided(r, c) = norm[static_cast<std::size_t>(r)];
        }
        if (!missing.empty()) {
            std::ostringstream msg;
            msg << "build_table: missing guided scores for " << missing.size() << " item(s):";
            for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg << " " << missing[i];
            if (missing.size() > 10) msg << " ...";
            throw Error(msg.str());
        }
    }
    return t;
}

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (long c = 0; c < m.cols(); ++c)
        for (long r = 0; r < m.rows(); ++r) data.push_back(m(r, c));
    j["data"] = std::move(data);
    return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    long rows = j.at("rows").get<long>();
    long cols = j.at("cols").get<long>();
    const auto& data = j.at("data");
    if (static_cast<long>(data.size()) != rows * cols)
        throw IoError("matrix blob size mismatch");
    Eigen::MatrixXd m(rows, cols);
    std::size_t k = 0;
    for (long c = 0; c < cols; ++c)
        for (long r = 0; r < rows; ++r) m(r, c) = data[k++].get<double>();
    return m;
}

json normalizer_to_json(const Normalizer& n) {
    json j;
    j["mean"] = std::vector<double>(n.mean.data(), n.mean.data() + n.mean.size());
    j["std"] = std::vector<double>(n.std_dev.data(), n.std_dev.data() + n.std_dev.size());
    j["target_std"] = n.target_std;
    j["epsilon"] = n.epsilon;
    return j;
}

Normalizer normalizer_from_json(const json& j) {
    Normalizer n;
    auto mean = j.at("mean").get<std::vector<double>>();
    auto stdv = j.at("std").get<std::vector<double>>();
    n.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<long>(mean.size()));
    n.std_dev = Eigen::Map<Eigen::VectorXd>(stdv.data(), static_cast<long>(stdv.size()));
    n.target_std = j.at("target_std").get<double>();
    n.epsilon = j.at("epsilon").get<double>();
    return n;
}

}  // namespace

void save_table(const EmbeddingTable& table,
                const std::map<std::string, std::vector<double>>& user_guided,
                const Normalizer* normalizer, const std::string& path) {
    json j;
    j["format"] = "ger.table.v1";
    j["base_dim"] = table.config.base_dim;
    j["guided_dim"] = table.config.guided_dim;
    j["mu"] = table.config.mu;
    j["ids"] = table.ids;
    j["base"] = matrix_to_json(table.base);
    j["guided"] = matrix_to_json(table.guided);
    j["normalizer"] = normalizer ? normalizer_to_json(*normalizer) : json(nullptr);
    j["user_guided"] = user_guided;
    write_text_file(path, j.dump());
}

LoadedTable load_table(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("table archive " + path + ": " + e.what());
    }
    if (j.value("format", "") != "ger.table.v1")
        throw IoError("table archive " + path + ": unsupported format tag");
    LoadedTable out;
    out.table.config.base_dim = j.at("base_dim").get<std::size_t>();
    out.table.config.guided_dim = j.at("guided_dim").get<std::size_t>();
    out.table.config.mu = j.at("mu").get<double>();
    out.table.ids = j.at("ids").get<std::vector<std::string>>();
    out.table.base = matrix_from_json(j.at("base"));
    out.table.guided = matrix_from_json(j.at("guided"));
    out.table.rebuild_index();
    out.user_guided = j.at("user_guided").get<std::map<std::string, std::vector<double>>>();
    if (!j.at("normalizer").is_null()) out.normalizer = normalizer_from_json(j.at("normalizer"));
    return out;
}

void save_normalizer(const Normalizer& n, const std::string& path) {
    json j;
    j["format"] = "ger.normalizer.v1";
    j["normalizer"] = normalizer_to_json(n);
    write_text_file(path, j.dump(1));
}

Normalizer load_normalizer(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("normalizer archive " + path + ": " + e.what());
    }
    if (j.value("format", "") != "ger.normalizer.v1")
        throw IoError("normalizer archive " + path + ": unsupported format tag");
    return normalizer_from_json(j.at("normalizer"));
}

}  // namespace ger::guided
