// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#include "ger/seqrec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ger/autodiff.hpp"
#include "ger/common.hpp"

namespace ger::seqrec {

using autodiff::Graph;
using Matrix = Eigen::MatrixXd;

std::string encoder_name(EncoderKind k) {
    return k == EncoderKind::gru ? "gru" : "attention";
}

EncoderKind parse_encoder(const std::string& name) {
    if (name == "gru") return EncoderKind::gru;
    if (name == "attention" || name == "attn") return EncoderKind::attention;
    throw ConfigError("unknown encoder '" + name + "' (valid: gru, attention)");
}

std::string variant_name(UserVariant v) {
    return v == UserVariant::concat_user ? "concat_user" : "sequence_refined";
}

UserVariant parse_variant(const std::string& name) {
    if (name == "concat_user" || name == "concat") return UserVariant::concat_user;
    if (name == "sequence_refined" || name == "seqref") return UserVariant::sequence_refined;
    throw ConfigError("unknown user variant '" + name +
                      "' (valid: concat_user, sequence_refined)");
}

namespace {

Matrix xavier_uniform(long rows, long cols, Rng rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (long c = 0; c < cols; ++c)
        for (long r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
    return m;
}

}  // namespace

Model init_model(const ModelConfig& config, const guided::RefinedConfig& dims,
                 std::uint64_t seed) {
    dims.validate();
    Model m;
    m.config = config;
    m.input_dim = config.user_variant == UserVariant::concat_user ? dims.base_dim
                                                                  : dims.refined_dim();
    m.hidden_dim = m.input_dim;
    if (config.max_seq_len < 1) throw ConfigError("model: max_seq_len must be >= 1");
    if (config.dropout < 0.0 || config.dropout >= 1.0)
        throw ConfigError("model: dropout must lie in [0, 1)");
    const long h = static_cast<long>(m.hidden_dim);
    const long in = static_cast<long>(m.input_dim);
    Rng root(seed);
    auto init = [&](const std::string& name, long rows, long cols) {
        m.params[name] = xavier_uniform(rows, cols, root.fork(name));
    };
    switch (config.encoder) {
        case EncoderKind::gru:
            init("gru.Wx", 3 * h, in);
            m.params["gru.bx"] = Matrix::Zero(3 * h, 1);
            init("gru.Uzr", 2 * h, h);
            init("gru.Un", h, h);
            break;
        case EncoderKind::attention: {
            if (config.num_heads < 1 || m.hidden_dim % config.num_heads != 0)
                throw ConfigError("model: num_heads must divide the hidden dimension");
            init("attn.pos", h, static_cast<long>(config.max_seq_len));
            m.params["attn.ln1.g"] = Matrix::Ones(h, 1);
            m.params["attn.ln1.b"] = Matrix::Zero(h, 1);
            init("attn.Wq", h, h);
            init("attn.Wk", h, h);
            init("attn.Wv", h, h);
            init("attn.Wo", h, h);
            m.params["attn.ln2.g"] = Matrix::Ones(h, 1);
            m.params["attn.ln2.b"] = Matrix::Zero(h, 1);
            init("attn.ffn.W1", h, h);
            m.params["attn.ffn.b1"] = Matrix::Zero(h, 1);
            init("attn.ffn.W2", h, h);
            m.params["attn.ffn.b2"] = Matrix::Zero(h, 1);
            break;
        }
    }
    return m;
}

namespace {

struct GraphLeaves {
    std::map<std::string, Graph::Id> params;
    Graph::Id base = 0;
    Graph::Id refined = 0;
};

GraphLeaves make_leaves(Graph& g, const Model& model, const guided::EmbeddingTable& table) {
    GraphLeaves leaves;
    for (const auto& [name, value] : model.params) leaves.params[name] = g.leaf(value);
    leaves.base = g.leaf(table.base);
    if (table.config.guided_dim > 0) {
        Graph::Id guided = g.leaf(table.config.mu * table.guided);
        leaves.refined = g.vstack(leaves.base, guided);
    } else {
        leaves.refined = leaves.base;
    }
    return leaves;
}

struct DropoutCtx {
    double rate = 0.0;
    Rng* rng = nullptr;
};

Graph::Id apply_dropout(Graph& g, Graph::Id x, DropoutCtx* drop) {
    if (!drop || drop->rate <= 0.0 || !drop->rng) return x;
    const Matrix& v = g.value(x);
    double keep = 1.0 - drop->rate;
    Matrix mask(v.rows(), v.cols());
    for (long c = 0; c < v.cols(); ++c)
        for (long r = 0; r < v.rows(); ++r)
            mask(r, c) = drop->rng->uniform01() < keep ? 1.0 / keep : 0.0;
    return g.hadamard(x, g.leaf(std::move(mask)));
}

Graph::Id encode_gru(Graph& g, const Model& model, const GraphLeaves& leaves, Graph::Id x,
                     std::size_t seq_len, DropoutCtx* drop) {
    const std::size_t h = model.hidden_dim;
    Graph::Id xw = g.add_col(g.matmul(leaves.params.at("gru.Wx"), x),
                             leaves.params.at("gru.bx"));
    Graph::Id uzr = leaves.params.at("gru.Uzr");
    Graph::Id un = leaves.params.at("gru.Un");
    Graph::Id hidden = g.leaf(Matrix::Zero(static_cast<long>(h), 1));
    std::vector<Graph::Id> states;
    states.reserve(seq_len);
    for (std::size_t t = 0; t < seq_len; ++t) {
        Graph::Id c = g.col(xw, t);
        Graph::Id zx = g.rows(c, 0, h);
        Graph::Id rx = g.rows(c, h, h);
        Graph::Id nx = g.rows(c, 2 * h, h);
        Graph::Id u = g.matmul(uzr, hidden);
        Graph::Id z = g.sigmoid(g.add(zx, g.rows(u, 0, h)));
        Graph::Id r = g.sigmoid(g.add(rx, g.rows(u, h, h)));
        Graph::Id n = g.tanh(g.add(nx, g.matmul(un, g.hadamard(r, hidden))));
        Graph::Id keep = g.add_scalar(g.scale(z, -1.0), 1.0);
        hidden = g.add(g.hadamard(keep, hidden), g.hadamard(z, n));
        states.push_back(hidden);
    }
    Graph::Id out = g.hstack(states);
    return apply_dropout(g, out, drop);
}

Graph::Id encode_attention(Graph& g, const Model& model, const GraphLeaves& leaves,
                           Graph::Id x, std::size_t seq_len, DropoutCtx* drop) {
    const std::size_t d = model.hidden_dim;
    const std::size_t heads = model.config.num_heads;
    const std::size_t dh = d / heads;
    std::vector<int> pos_idx(seq_len);
    std::iota(pos_idx.begin(), pos_idx.end(), 0);
    Graph::Id x1 = g.add(x, g.gather_cols(leaves.params.at("attn.pos"), pos_idx));
    Graph::Id xn = g.layernorm_cols(x1, leaves.params.at("attn.ln1.g"),
                                    leaves.params.at("attn.ln1.b"));
    Graph::Id q = g.matmul(leaves.params.at("attn.Wq"), xn);
    Graph::Id k = g.matmul(leaves.params.at("attn.Wk"), xn);
    Graph::Id v = g.matmul(leaves.params.at("attn.Wv"), xn);
    Graph::Id merged = 0;
    for (std::size_t head = 0; head < heads; ++head) {
        Graph::Id qh = heads == 1 ? q : g.rows(q, head * dh, dh);
        Graph::Id kh = heads == 1 ? k : g.rows(k, head * dh, dh);
        Graph::Id vh = heads == 1 ? v : g.rows(v, head * dh, dh);
        Graph::Id scores = g.scale(g.matmul_tn(qh, kh),
                                   1.0 / std::sqrt(static_cast<double>(dh)));
        Graph::Id probs = g.causal_softmax_rows(scores);
        Graph::Id oh = g.matmul_nt(vh, probs);
        merged = head == 0 ? oh : g.vstack(merged, oh);
    }
    Graph::Id attn = apply_dropout(g, g.matmul(leaves.params.at("attn.Wo"), merged), drop);
    Graph::Id x2 = g.add(x1, attn);
    Graph::Id x3 = g.layernorm_cols(x2, leaves.params.at("attn.ln2.g"),
                                    leaves.params.at("attn.ln2.b"));
    Graph::Id f1 = g.relu(g.add_col(g.matmul(leaves.params.at("attn.ffn.W1"), x3),
                                    leaves.params.at("attn.ffn.b1")));
    Graph::Id f2 = g.add_col(g.matmul(leaves.params.at("attn.ffn.W2"), f1),
                             leaves.params.at("attn.ffn.b2"));
    return g.add(x2, apply_dropout(g, f2, drop));
}

Graph::Id encode(Graph& g, const Model& model, const GraphLeaves& leaves, Graph::Id x,
                 std::size_t seq_len, DropoutCtx* drop) {
    return model.config.encoder == EncoderKind::gru
               ? encode_gru(g, model, leaves, x, seq_len, drop)
               : encode_attention(g, model, leaves, x, seq_len, drop);
}

struct SeqSample {
    std::vector<int> inputs;
    std::vector<int> targets;
    const std::vector<double>* user_guided = nullptr;
};

Graph::Id sequence_loss(Graph& g, const Model& model, const guided::EmbeddingTable& table,
                        const GraphLeaves& leaves, const SeqSample& sample, DropoutCtx* drop) {
    bool concat = model.config.user_variant == UserVariant::concat_user;
    Graph::Id x = g.gather_cols(concat ? leaves.base : leaves.refined, sample.inputs);
    Graph::Id hidden = encode(g, model, leaves, x, sample.inputs.size(), drop);
    Graph::Id rep = hidden;
    if (concat && table.config.guided_dim > 0) {
        Matrix tile(static_cast<long>(table.config.guided_dim),
                    static_cast<long>(sample.inputs.size()));
        for (long c = 0; c < tile.cols(); ++c)
            for (long r = 0; r < tile.rows(); ++r)
                tile(r, c) = table.config.mu * (*sample.user_guided)[static_cast<std::size_t>(r)];
        rep = g.vstack(hidden, g.leaf(std::move(tile)));
    }
    Graph::Id logits = g.matmul_tn(leaves.refined, rep);
    return g.softmax_xent_cols(logits, sample.targets);
}

void check_dims(const Model& model, const guided::EmbeddingTable& table) {
    std::size_t expect = model.config.user_variant == UserVariant::concat_user
                             ? table.config.base_dim
                             : table.config.refined_dim();
    if (model.input_dim != expect)
        throw Error("model/table dimension mismatch: encoder expects input " +
                    std::to_string(model.input_dim) + ", table provides " +
                    std::to_string(expect));
}

std::vector<int> to_indices(const guided::EmbeddingTable& table,
                            const std::vector<std::string>& ids) {
    std::vector<int> idx(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        idx[i] = static_cast<int>(table.item_index(ids[i]));
    return idx;
}

Eigen::VectorXd forward_hidden(const Model& model, const guided::EmbeddingTable& table,
                               const std::vector<int>& inputs) {
    Graph g;
    GraphLeaves leaves = make_leaves(g, model, table);
    bool concat = model.config.user_variant == UserVariant::concat_user;
    Graph::Id x = g.gather_cols(concat ? leaves.base : leaves.refined, inputs);
    Graph::Id hidden = encode(g, model, leaves, x, inputs.size(), nullptr);
    return g.value(hidden).col(static_cast<long>(inputs.size()) - 1);
}

}  // namespace

Eigen::VectorXd forward_user(const Model& model, const guided::EmbeddingTable& table,
                             const std::vector<std::string>& item_sequence,
                             const std::vector<double>* user_guided) {
    if (item_sequence.empty()) throw Error("forward_user: empty item sequence");
    check_dims(model, table);
    bool concat = model.config.user_variant == UserVariant::concat_user;
    if (concat && table.config.guided_dim > 0) {
        if (!user_guided)
            throw Error("forward_user: concat_user with guided dimensions needs user scores");
        if (user_guided->size() != table.config.guided_dim)
            throw Error("forward_user: user guided vector has wrong length");
    }
    std::vector<std::string> window = item_sequence;
    if (window.size() > model.config.max_seq_len)
        window.erase(window.begin(),
                     window.end() - static_cast<long>(model.config.max_seq_len));
    Eigen::VectorXd hidden = forward_hidden(model, table, to_indices(table, window));
    if (!(concat && table.config.guided_dim > 0)) return hidden;
    Eigen::VectorXd rep(static_cast<long>(table.config.refined_dim()));
    rep.head(hidden.size()) = hidden;
    for (std::size_t j = 0; j < table.config.guided_dim; ++j)
        rep(hidden.size() + static_cast<long>(j)) = table.config.mu * (*user_guided)[j];
    return rep;
}

std::vector<double> score_candidates(const Eigen::VectorXd& user_rep,
                                     const guided::EmbeddingTable& table,
                                     const std::vector<std::string>& candidates) {
    if (candidates.empty()) throw Error("score_candidates: empty candidate list");
    if (static_cast<std::size_t>(user_rep.size()) != table.config.refined_dim())
        throw Error("score_candidates: user representation has wrong length");
    std::vector<double> scores(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        scores[i] = table.refined_col(table.item_index(candidates[i])).dot(user_rep);
    return scores;
}

std::vector<std::size_t> ranking(const std::vector<double>& scores,
                                 const std::vector<std::string>& ids) {
    if (scores.size() != ids.size()) throw Error("ranking: scores/ids size mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    return order;
}

namespace {

struct AdamState {
    Matrix m;
    Matrix v;
};

void adam_step(Matrix& param, const Matrix& grad, AdamState& state, double lr, long t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (state.m.size() == 0) {
        state.m = Matrix::Zero(param.rows(), param.cols());
        state.v = Matrix::Zero(param.rows(), param.cols());
    }
    state.m = b1 * state.m + (1.0 - b1) * grad;
    state.v = b2 * state.v + (1.0 - b2) * grad.cwiseProduct(grad);
    double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    param.array() -=
        lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + eps);
}

std::vector<SeqSample> training_samples(const guided::EmbeddingTable& table,
                                        const corpus::Dataset& dataset,
                                        const corpus::SplitDataset& split,
                                        const UserGuidedMap& users_guided,
                                        const Model& model) {
    bool needs_guided = model.config.user_variant == UserVariant::concat_user &&
                        table.config.guided_dim > 0;
    std::vector<SeqSample> samples;
    for (const auto& [user_id, us] : split.users) {
        if (us.train_len < 2) continue;
        const std::vector<corpus::Interaction>& seq = dataset.users.at(user_id);
        std::size_t window = std::min(us.train_len, model.config.max_seq_len + 1);
        std::size_t first = us.train_len - window;
        SeqSample s;
        for (std::size_t k = first; k < us.train_len; ++k) {
            int idx = static_cast<int>(table.item_index(seq[k].item_id));
            if (k > first) s.targets.push_back(idx);
            if (k + 1 < us.train_len) s.inputs.push_back(idx);
        }
        if (needs_guided) {
            auto git = users_guided.find(user_id);
            if (git == users_guided.end())
                throw Error("train: no guided scores for user " + user_id);
            s.user_guided = &git->second;
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace

TrainResult train(Model model, guided::EmbeddingTable table, const corpus::Dataset& dataset,
                  const corpus::SplitDataset& split, const UserGuidedMap& users_guided,
                  const TrainConfig& config) {
    check_dims(model, table);
    if (config.learning_rate <= 0) throw ConfigError("train: learning_rate must be > 0");
    if (config.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (split.users.empty()) throw Error("train: empty split");

    std::vector<SeqSample> samples = training_samples(table, dataset, split, users_guided, model);
    TrainResult result;
    if (samples.empty() || config.epochs == 0) {
        result.model = std::move(model);
        result.table = std::move(table);
        return result;
    }

    std::map<std::string, AdamState> opt;
    AdamState base_opt;
    long step = 0;
    Rng shuffle_rng = Rng(config.seed).fork("train-shuffle");
    Rng dropout_rng = Rng(config.seed).fork("train-dropout");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t target_count = 0;
        for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
            std::size_t end = std::min(order.size(), at + config.batch_size);
            Graph g;
            GraphLeaves leaves = make_leaves(g, model, table);
            DropoutCtx drop{model.config.dropout, &dropout_rng};
            DropoutCtx* drop_ptr = model.config.dropout > 0.0 ? &drop : nullptr;
            std::size_t batch_targets = 0;
            Graph::Id total = 0;
            bool first = true;
            for (std::size_t i = at; i < end; ++i) {
                const SeqSample& s = samples[order[i]];
                Graph::Id loss = sequence_loss(g, model, table, leaves, s, drop_ptr);
                batch_targets += s.targets.size();
                total = first ? loss : g.add(total, loss);
                first = false;
            }
            Graph::Id mean = g.scale(total, 1.0 / static_cast<double>(batch_targets));
            double value = g.value(mean)(0, 0);
            if (!std::isfinite(value))
                throw Error(
                    "train: non-finite loss; lower learning_rate or check embedding scales");
            g.backward(mean);
            ++step;
            for (auto& [name, param] : model.params)
                adam_step(param, g.grad(leaves.params.at(name)), opt[name],
                          config.learning_rate, step);
            adam_step(table.base, g.grad(leaves.base), base_opt, config.learning_rate, step);
            loss_sum += value * static_cast<double>(batch_targets);
            target_count += batch_targets;
        }
        result.loss_curve.push_back(loss_sum / static_cast<double>(target_count));
    }
    result.model = std::move(model);
    result.table = std::move(table);
    return result;
}

metrics::MetricReport evaluate(const Model& model, const guided::EmbeddingTable& table,
                               const corpus::Dataset& dataset, const corpus::SplitDataset& split,
                               const UserGuidedMap& users_guided, const std::vector<int>& ks,
                               EvalTarget target) {
    check_dims(model, table);
    Matrix refined = table.refined_matrix();
    bool concat = model.config.user_variant == UserVariant::concat_user;
    std::vector<metrics::Rank> ranks;
    for (const auto& [user_id, us] : split.users) {
        std::optional<std::size_t> target_idx =
            target == EvalTarget::test ? us.test_target : us.validation_target;
        if (!target_idx) continue;
        const std::vector<corpus::Interaction>& seq = dataset.users.at(user_id);
        std::vector<std::string> context;
        for (std::size_t k = 0; k < *target_idx; ++k) context.push_back(seq[k].item_id);
        if (context.empty()) continue;
        const std::vector<double>* ug = nullptr;
        if (concat && table.config.guided_dim > 0) {
            auto git = users_guided.find(user_id);
            if (git == users_guided.end())
                throw Error("evaluate: no guided scores for user " + user_id);
            ug = &git->second;
        }
        Eigen::VectorXd rep = forward_user(model, table, context, ug);
        Eigen::VectorXd scores = refined.transpose() * rep;
        std::size_t t = table.item_index(seq[*target_idx].item_id);
        double target_score = scores(static_cast<long>(t));
        std::size_t rank = 1;
        for (long i = 0; i < scores.size(); ++i) {
            if (static_cast<std::size_t>(i) == t) continue;
            if (scores(i) > target_score ||
                (scores(i) == target_score && static_cast<std::size_t>(i) < t))
                ++rank;
        }
        ranks.push_back(rank);
    }
    if (ranks.empty()) throw Error("evaluate: no users with evaluation targets");
    return metrics::report_from_ranks(ranks, ks);
}

GradCheckReport grad_check(const ModelConfig& config, const guided::RefinedConfig& dims,
                           double epsilon, double tolerance) {
    dims.validate();
    if (dims.refined_dim() > 8)
        throw ConfigError("grad_check: intended for refined_dim <= 8");

    corpus::SyntheticSpec spec;
    spec.num_users = 4;
    spec.num_items = 10;
    spec.num_aspects = std::max<std::size_t>(dims.guided_dim, 1);
    spec.seq_len_min = 3;
    spec.seq_len_max = 5;
    spec.noise_scale = 1.0;
    spec.seed = 20240817;
    corpus::Dataset data = corpus::generate_synthetic(spec);
    corpus::SplitDataset split = corpus::split_leave_one_out(data);

    std::map<std::string, std::vector<double>> item_scores;
    Eigen::MatrixXd score_matrix(static_cast<long>(data.items.size()),
                                 static_cast<long>(spec.num_aspects));
    long row = 0;
    for (const auto& [id, rec] : data.items) {
        const std::vector<double>& v = data.planted->item_aspects.at(id);
        item_scores[id] = v;
        for (std::size_t j = 0; j < spec.num_aspects; ++j)
            score_matrix(row, static_cast<long>(j)) = v[j];
        ++row;
    }
    guided::Normalizer norm =
        guided::fit_normalizer(score_matrix, dims.refined_dim(), 1e-8);
    guided::EmbeddingTable table =
        dims.guided_dim > 0
            ? guided::build_table(data.items, item_scores, &norm, dims, 7)
            : guided::build_table(data.items, {}, nullptr, dims, 7);

    UserGuidedMap users_guided;
    if (dims.guided_dim > 0)
        for (const auto& [uid, prefs] : data.planted->user_prefs)
            users_guided[uid] = guided::normalize(norm, prefs);

    ModelConfig cfg = config;
    cfg.max_seq_len = std::min<std::size_t>(cfg.max_seq_len, 5);
    Model model = init_model(cfg, dims, 11);
    std::vector<SeqSample> samples =
        training_samples(table, data, split, users_guided, model);

    auto loss_value = [&]() {
        Graph g;
        GraphLeaves leaves = make_leaves(g, model, table);
        Graph::Id total = 0;
        bool first = true;
        std::size_t n = 0;
        for (const SeqSample& s : samples) {
            Graph::Id l = sequence_loss(g, model, table, leaves, s, nullptr);
            total = first ? l : g.add(total, l);
            first = false;
            n += s.targets.size();
        }
        return g.value(g.scale(total, 1.0 / static_cast<double>(n)))(0, 0);
    };

    // analytic gradients from one tape
    Graph g;
    GraphLeaves leaves = make_leaves(g, model, table);
    Graph::Id total = 0;
    bool first = true;
    std::size_t n = 0;
    for (const SeqSample& s : samples) {
        Graph::Id l = sequence_loss(g, model, table, leaves, s, nullptr);
        total = first ? l : g.add(total, l);
        first = false;
        n += s.targets.size();
    }
    Graph::Id mean = g.scale(total, 1.0 / static_cast<double>(n));
    g.backward(mean);

    GradCheckReport report;
    auto check_matrix = [&](Matrix& param, const Matrix& analytic) {
        for (long c = 0; c < param.cols(); ++c) {
            for (long r = 0; r < param.rows(); ++r) {
                double keep = param(r, c);
                param(r, c) = keep + epsilon;
                double up = loss_value();
                param(r, c) = keep - epsilon;
                double down = loss_value();
                param(r, c) = keep;
                double fd = (up - down) / (2.0 * epsilon);
                double a = analytic(r, c);
                double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
                report.max_rel_err = std::max(report.max_rel_err, rel);
                ++report.entries_checked;
            }
        }
    };
    for (auto& [name, param] : model.params)
        check_matrix(param, g.grad(leaves.params.at(name)));
    check_matrix(table.base, g.grad(leaves.base));

    // a real optimizer step must leave the guided block untouched
    Matrix guided_before = table.guided;
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 2;
    tc.learning_rate = 1e-3;
    tc.seed = 3;
    TrainResult tr = train(model, table, data, split, users_guided, tc);
    report.frozen_guided_update_max =
        tr.table.guided.size() == 0
            ? 0.0
            : (tr.table.guided - guided_before).cwiseAbs().maxCoeff();

    report.passed =
        report.max_rel_err < tolerance && report.frozen_guided_update_max == 0.0;
    return report;
}

namespace {

using json = nlohmann::ordered_json;

json matrix_to_json(const Matrix& m) {
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

Matrix matrix_from_json(const json& j) {
    long rows = j.at("rows").get<long>();
    long cols = j.at("cols").get<long>();
    Matrix m(rows, cols);
    const auto& data = j.at("data");
    if (static_cast<long>(data.size()) != rows * cols)
        throw IoError("model blob size mismatch");
    std::size_t k = 0;
    for (long c = 0; c < cols; ++c)
        for (long r = 0; r < rows; ++r) m(r, c) = data[k++].get<double>();
    return m;
}

json config_to_json(const Model& m) {
    json j;
    j["encoder"] = encoder_name(m.config.encoder);
    j["user_variant"] = variant_name(m.config.user_variant);
    j["max_seq_len"] = m.config.max_seq_len;
    j["num_heads"] = m.config.num_heads;
    j["dropout"] = m.config.dropout;
    j["input_dim"] = m.input_dim;
    j["hidden_dim"] = m.hidden_dim;
    return j;
}

}  // namespace

std::string model_fingerprint(const Model& model) {
    return hex64(fnv1a64(config_to_json(model).dump()));
}

void save_model(const Model& model, const std::string& path) {
    json j;
    j["format"] = "ger.model.v1";
    j["config"] = config_to_json(model);
    j["config_fingerprint"] = model_fingerprint(model);
    json params;
    for (const auto& [name, value] : model.params) params[name] = matrix_to_json(value);
    j["params"] = std::move(params);
    write_text_file(path, j.dump());
}

Model load_model(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("model checkpoint " + path + ": " + e.what());
    }
    if (j.value("format", "") != "ger.model.v1")
        throw IoError("model checkpoint " + path + ": unsupported format tag");
    Model m;
    const json& c = j.at("config");
    m.config.encoder = parse_encoder(c.at("encoder").get<std::string>());
    m.config.user_variant = parse_variant(c.at("user_variant").get<std::string>());
    m.config.max_seq_len = c.at("max_seq_len").get<std::size_t>();
    m.config.num_heads = c.at("num_heads").get<std::size_t>();
    m.config.dropout = c.at("dropout").get<double>();
    m.input_dim = c.at("input_dim").get<std::size_t>();
    m.hidden_dim = c.at("hidden_dim").get<std::size_t>();
    for (const auto& [name, blob] : j.at("params").items())
        m.params[name] = matrix_from_json(blob);
    return m;
}

}  // namespace ger::seqrec
