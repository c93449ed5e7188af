// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace ger::autodiff {

using Matrix = Eigen::MatrixXd;

/// Minimal reverse-mode tape over dense matrices. Nodes are appended in
/// topological order; backward() seeds the final scalar node and replays
/// the tape in reverse. Columns are sequence positions throughout.
class Graph {
public:
    using Id = std::size_t;

    /// Constant or parameter leaf. Gradients accumulate for every node;
    /// callers decide which leaves they treat as trainable.
    Id leaf(Matrix value);

    const Matrix& value(Id id) const { return nodes_[id].val; }
    const Matrix& grad(Id id) const { return nodes_[id].grad; }

    Id matmul(Id a, Id b);
    Id matmul_tn(Id a, Id b);  // A^T * B
    Id matmul_nt(Id a, Id b);  // A * B^T
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id add_col(Id a, Id bias);  // bias is d x 1, broadcast over columns
    Id hadamard(Id a, Id b);
    Id scale(Id a, double c);
    Id add_scalar(Id a, double c);
    Id sigmoid(Id a);
    Id tanh(Id a);
    Id relu(Id a);
    Id col(Id a, std::size_t j);
    Id rows(Id a, std::size_t first, std::size_t count);
    Id hstack(const std::vector<Id>& parts);
    Id vstack(Id a, Id b);
    Id gather_cols(Id a, const std::vector<int>& indices);

    /// Row-wise softmax where row i only attends to columns j <= i.
    Id causal_softmax_rows(Id a);

    /// Column-wise layer normalization with elementwise gain and bias.
    Id layernorm_cols(Id x, Id gain, Id bias, double eps = 1e-5);

    /// Summed softmax cross-entropy over columns: column t's target row
    /// is targets[t]. Returns a 1x1 node.
    Id softmax_xent_cols(Id logits, const std::vector<int>& targets);

    void backward(Id loss);
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix val;
        Matrix grad;
        std::function<void(Graph&)> back;
    };

    Id push(Matrix value, std::function<void(Graph&)> back = nullptr);
    Matrix& grad_mut(Id id) { return nodes_[id].grad; }

    std::deque<Node> nodes_;
};

}  // namespace ger::autodiff
