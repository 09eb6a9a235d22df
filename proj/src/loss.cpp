// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/loss.hpp"

#include <cmath>
#include <string>

namespace cultdiff {

double weighted_margin_loss(std::span<const PairTerm<double>> batch, double margin) {
    return weighted_margin_loss<double>(batch, margin);
}

double pair_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size())
        fail(ErrorCode::DimensionMismatch,
             "embedding sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " differ");
    return (a - b).norm();
}

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
    const double n = v.norm();
    return n > 0 ? Eigen::VectorXd(v / n) : v;
}

namespace {

// Backprop through v / ||v||.
Eigen::VectorXd normalize_backward(const Eigen::VectorXd& raw, const Eigen::VectorXd& unit, const Eigen::VectorXd& g) {
    const double n = raw.norm();
    if (n == 0) return Eigen::VectorXd::Zero(raw.size());
    return (g - unit * unit.dot(g)) / n;
}

}  // namespace

PairLossGrad margin_loss_and_grad(std::span<const Eigen::VectorXd> emb_a, std::span<const Eigen::VectorXd> emb_b,
                                  std::span<const int> labels, std::span<const double> weights, double margin,
                                  bool normalize) {
    const std::size_t n = emb_a.size();
    if (n == 0) fail(ErrorCode::EmptyBatch, "loss over an empty batch");
    if (emb_b.size() != n || labels.size() != n || weights.size() != n)
        fail(ErrorCode::DimensionMismatch, "batch components have different lengths");

    PairLossGrad out;
    out.distances.resize(n);
    out.grad_a.resize(n);
    out.grad_b.resize(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<PairTerm<double>> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd a = normalize ? l2_normalize(emb_a[i]) : emb_a[i];
        const Eigen::VectorXd b = normalize ? l2_normalize(emb_b[i]) : emb_b[i];
        const double d = pair_distance(a, b);
        out.distances[i] = d;
        terms[i] = {d, labels[i], weights[i]};

        // dL/da for the distance term; b gets the negative.
        Eigen::VectorXd ga = Eigen::VectorXd::Zero(a.size());
        if (labels[i] == 1) {
            ga = 2.0 * weights[i] * inv_n * (a - b);
        } else if (d < margin && d > 0) {
            ga = -2.0 * weights[i] * inv_n * (margin - d) / d * (a - b);
        }
        const Eigen::VectorXd gb = -ga;
        out.grad_a[i] = normalize ? normalize_backward(emb_a[i], a, ga) : ga;
        out.grad_b[i] = normalize ? normalize_backward(emb_b[i], b, gb) : gb;
    }
    out.loss = weighted_margin_loss<double>(terms, margin);
    return out;
}

}  // namespace cultdiff
