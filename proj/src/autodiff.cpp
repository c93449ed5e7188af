// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#include "ger/autodiff.hpp"

#include <cmath>

#include "ger/common.hpp"

namespace ger::autodiff {

Graph::Id Graph::push(Matrix value, std::function<void(Graph&)> back) {
    Node n;
    n.grad = Matrix::Zero(value.rows(), value.cols());
    n.val = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

Graph::Id Graph::leaf(Matrix value) { return push(std::move(value)); }

Graph::Id Graph::matmul(Id a, Id b) {
    Id out = push(nodes_[a].val * nodes_[b].val);
    nodes_[out].back = [a, b, out](Graph& g) {
        const Matrix& go = g.nodes_[out].grad;
        g.grad_mut(a).noalias() += go * g.nodes_[b].val.transpose();
        g.grad_mut(b).noalias() += g.nodes_[a].val.transpose() * go;
    };
    return out;
}

Graph::Id Graph::matmul_tn(Id a, Id b) {
    Id out = push(nodes_[a].val.transpose() * nodes_[b].val);
    nodes_[out].back = [a, b, out](Graph& g) {
        const Matrix& go = g.nodes_[out].grad;
        g.grad_mut(a).noalias() += g.nodes_[b].val * go.transpose();
        g.grad_mut(b).noalias() += g.nodes_[a].val * go;
    };
    return out;
}

Graph::Id Graph::matmul_nt(Id a, Id b) {
    Id out = push(nodes_[a].val * nodes_[b].val.transpose());
    nodes_[out].back = [a, b, out](Graph& g) {
        const Matrix& go = g.nodes_[out].grad;
        g.grad_mut(a).noalias() += go * g.nodes_[b].val;
        g.grad_mut(b).noalias() += go.transpose() * g.nodes_[a].val;
    };
    return out;
}

Graph::Id Graph::add(Id a, Id b) {
    Id out = push(nodes_[a].val + nodes_[b].val);
    nodes_[out].back = [a, b, out](Graph& g) {
        g.grad_mut(a) += g.nodes_[out].grad;
        g.grad_mut(b) += g.nodes_[out].grad;
    };
    return out;
}

Graph::Id Graph::sub(Id a, Id b) {
    Id out = push(nodes_[a].val - nodes_[b].val);
    nodes_[out].back = [a, b, out](Graph& g) {
        g.grad_mut(a) += g.nodes_[out].grad;
        g.grad_mut(b) -= g.nodes_[out].grad;
    };
    return out;
}

Graph::Id Graph::add_col(Id a, Id bias) {
    Id out = push(nodes_[a].val.colwise() + Eigen::VectorXd(nodes_[bias].val.col(0)));
    nodes_[out].back = [a, bias, out](Graph& g) {
        g.grad_mut(a) += g.nodes_[out].grad;
        g.grad_mut(bias) += g.nodes_[out].grad.rowwise().sum();
    };
    return out;
}

Graph::Id Graph::hadamard(Id a, Id b) {
    Id out = push(nodes_[a].val.cwiseProduct(nodes_[b].val));
    nodes_[out].back = [a, b, out](Graph& g) {
        g.grad_mut(a) += g.nodes_[out].grad.cwiseProduct(g.nodes_[b].val);
        g.grad_mut(b) += g.nodes_[out].grad.cwiseProduct(g.nodes_[a].val);
    };
    return out;
}

Graph::Id Graph::scale(Id a, double c) {
    Id out = push(nodes_[a].val * c);
    nodes_[out].back = [a, c, out](Graph& g) { g.grad_mut(a) += c * g.nodes_[out].grad; };
    return out;
}

Graph::Id Graph::add_scalar(Id a, double c) {
    Id out = push(nodes_[a].val.array() + c);
    nodes_[out].back = [a, out](Graph& g) { g.grad_mut(a) += g.nodes_[out].grad; };
    return out;
}

Graph::Id Graph::sigmoid(Id a) {
    Matrix s = (1.0 / (1.0 + (-nodes_[a].val.array()).exp())).matrix();
    Id out = push(std::move(s));
    nodes_[out].back = [a, out](Graph& g) {
        const Matrix& s = g.nodes_[out].val;
        g.grad_mut(a).array() +=
            g.nodes_[out].grad.array() * s.array() * (1.0 - s.array());
    };
    return out;
}

Graph::Id Graph::tanh(Id a) {
    Id out = push(nodes_[a].val.array().tanh().matrix());
    nodes_[out].back = [a, out](Graph& g) {
        const Matrix& t = g.nodes_[out].val;
        g.grad_mut(a).array() += g.nodes_[out].grad.array() * (1.0 - t.array().square());
    };
    return out;
}

Graph::Id Graph::relu(Id a) {
    Id out = push(nodes_[a].val.cwiseMax(0.0));
    nodes_[out].back = [a, out](Graph& g) {
        g.grad_mut(a).array() +=
            g.nodes_[out].grad.array() * (g.nodes_[a].val.array() > 0.0).cast<double>();
    };
    return out;
}

Graph::Id Graph::col(Id a, std::size_t j) {
    Id out = push(nodes_[a].val.col(static_cast<long>(j)));
    nodes_[out].back = [a, j, out](Graph& g) {
        g.grad_mut(a).col(static_cast<long>(j)) += g.nodes_[out].grad.col(0);
    };
    return out;
}

Graph::Id Graph::rows(Id a, std::size_t first, std::size_t count) {
    Id out = push(nodes_[a].val.middleRows(static_cast<long>(first), static_cast<long>(count)));
    nodes_[out].back = [a, first, count, out](Graph& g) {
        g.grad_mut(a).middleRows(static_cast<long>(first), static_cast<long>(count)) +=
            g.nodes_[out].grad;
    };
    return out;
}

Graph::Id Graph::hstack(const std::vector<Id>& parts) {
    if (parts.empty()) throw Error("autodiff: hstack of nothing");
    long rows = nodes_[parts[0]].val.rows();
    long cols = 0;
    for (Id p : parts) cols += nodes_[p].val.cols();
    Matrix v(rows, cols);
    long at = 0;
    for (Id p : parts) {
        v.middleCols(at, nodes_[p].val.cols()) = nodes_[p].val;
        at += nodes_[p].val.cols();
    }
    Id out = push(std::move(v));
    std::vector<Id> copy(parts);
    nodes_[out].back = [copy, out](Graph& g) {
        long at = 0;
        for (Id p : copy) {
            long c = g.nodes_[p].val.cols();
            g.grad_mut(p) += g.nodes_[out].grad.middleCols(at, c);
            at += c;
        }
    };
    return out;
}

Graph::Id Graph::vstack(Id a, Id b) {
    Matrix v(nodes_[a].val.rows() + nodes_[b].val.rows(), nodes_[a].val.cols());
    v.topRows(nodes_[a].val.rows()) = nodes_[a].val;
    v.bottomRows(nodes_[b].val.rows()) = nodes_[b].val;
    Id out = push(std::move(v));
    nodes_[out].back = [a, b, out](Graph& g) {
        long ra = g.nodes_[a].val.rows();
        long rb = g.nodes_[b].val.rows();
        g.grad_mut(a) += g.nodes_[out].grad.topRows(ra);
        g.grad_mut(b) += g.nodes_[out].grad.bottomRows(rb);
    };
    return out;
}

Graph::Id Graph::gather_cols(Id a, const std::vector<int>& indices) {
    Matrix v(nodes_[a].val.rows(), static_cast<long>(indices.size()));
    for (std::size_t t = 0; t < indices.size(); ++t)
        v.col(static_cast<long>(t)) = nodes_[a].val.col(indices[t]);
    Id out = push(std::move(v));
    std::vector<int> copy(indices);
    nodes_[out].back = [a, copy, out](Graph& g) {
        for (std::size_t t = 0; t < copy.size(); ++t)
            g.grad_mut(a).col(copy[t]) += g.nodes_[out].grad.col(static_cast<long>(t));
    };
    return out;
}

Graph::Id Graph::causal_softmax_rows(Id a) {
    const Matrix& s = nodes_[a].val;
    Matrix p = Matrix::Zero(s.rows(), s.cols());
    for (long i = 0; i < s.rows(); ++i) {
        long allowed = std::min<long>(i + 1, s.cols());
        double mx = s.row(i).head(allowed).maxCoeff();
        double denom = 0.0;
        for (long j = 0; j < allowed; ++j) {
            p(i, j) = std::exp(s(i, j) - mx);
            denom += p(i, j);
        }
        for (long j = 0; j < allowed; ++j) p(i, j) /= denom;
    }
    Id out = push(std::move(p));
    nodes_[out].back = [a, out](Graph& g) {
        const Matrix& p = g.nodes_[out].val;
        const Matrix& go = g.nodes_[out].grad;
        Matrix& ga = g.grad_mut(a);
        for (long i = 0; i < p.rows(); ++i) {
            long allowed = std::min<long>(i + 1, p.cols());
            double dot = 0.0;
            for (long j = 0; j < allowed; ++j) dot += go(i, j) * p(i, j);
            for (long j = 0; j < allowed; ++j) ga(i, j) += p(i, j) * (go(i, j) - dot);
        }
    };
    return out;
}

Graph::Id Graph::layernorm_cols(Id x, Id gain, Id bias, double eps) {
    const Matrix& v = nodes_[x].val;
    const long d = v.rows();
    Matrix xhat(d, v.cols());
    Eigen::VectorXd inv_std(v.cols());
    for (long t = 0; t < v.cols(); ++t) {
        double mean = v.col(t).mean();
        double var = (v.col(t).array() - mean).square().mean();
        double istd = 1.0 / std::sqrt(var + eps);
        inv_std(t) = istd;
        xhat.col(t) = (v.col(t).array() - mean) * istd;
    }
    Eigen::ArrayXd garr = nodes_[gain].val.col(0).array();
    Eigen::ArrayXd barr = nodes_[bias].val.col(0).array();
    Matrix y = ((xhat.array().colwise() * garr).colwise() + barr).matrix();
    Id out = push(std::move(y));
    nodes_[out].back = [x, gain, bias, out, xhat, inv_std](Graph& g) {
        const Matrix& go = g.nodes_[out].grad;
        const Eigen::VectorXd gvec = g.nodes_[gain].val.col(0);
        g.grad_mut(bias).col(0) += go.rowwise().sum();
        g.grad_mut(gain).col(0) += (go.array() * xhat.array()).rowwise().sum().matrix();
        Matrix& gx = g.grad_mut(x);
        const long d = xhat.rows();
        for (long t = 0; t < xhat.cols(); ++t) {
            Eigen::VectorXd dxhat = go.col(t).cwiseProduct(gvec);
            double mean_dxhat = dxhat.mean();
            double mean_dxhat_x = dxhat.cwiseProduct(xhat.col(t)).mean();
            gx.col(t) += inv_std(t) * (dxhat.array() - mean_dxhat -
                                       xhat.col(t).array() * mean_dxhat_x)
                             .matrix();
            (void)d;
        }
    };
    return out;
}

Graph::Id Graph::softmax_xent_cols(Id logits, const std::vector<int>& targets) {
    const Matrix& z = nodes_[logits].val;
    if (static_cast<long>(targets.size()) != z.cols())
        throw Error("autodiff: one target per logits column required");
    Matrix probs(z.rows(), z.cols());
    double loss = 0.0;
    for (long t = 0; t < z.cols(); ++t) {
        double mx = z.col(t).maxCoeff();
        Eigen::ArrayXd e = (z.col(t).array() - mx).exp();
        double denom = e.sum();
        probs.col(t) = (e / denom).matrix();
        loss -= z(targets[static_cast<std::size_t>(t)], t) - mx - std::log(denom);
    }
    Matrix out(1, 1);
    out(0, 0) = loss;
    Id id = push(std::move(out));
    std::vector<int> copy(targets);
    nodes_[id].back = [logits, copy, id, probs](Graph& g) {
        double go = g.nodes_[id].grad(0, 0);
        Matrix& gl = g.grad_mut(logits);
        gl += go * probs;
        for (long t = 0; t < gl.cols(); ++t)
            gl(copy[static_cast<std::size_t>(t)], t) -= go;
    };
    return id;
}

void Graph::backward(Id loss) {
    if (nodes_[loss].val.rows() != 1 || nodes_[loss].val.cols() != 1)
        throw Error("autodiff: backward expects a scalar node");
    nodes_[loss].grad(0, 0) = 1.0;
    for (std::size_t i = loss + 1; i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

}  // namespace ger::autodiff
