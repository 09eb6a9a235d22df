// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cultdiff/error.hpp"

namespace cultdiff {

template <class T>
struct PairTerm {
    T d;  // distance, >= 0
    int y;  // 1 positive, 0 negative
    T w;  // weight in [0, 1]
};

/// L = (1/N) sum w_i (y_i d_i^2 + (1 - y_i) max(0, m - d_i)^2).
/// Generic over the scalar so it can be checked in exact arithmetic.
template <class T>
T weighted_margin_loss(std::span<const PairTerm<T>> batch, T margin) {
    if (batch.empty()) fail(ErrorCode::EmptyBatch, "loss over an empty batch");
    T sum = T(0);
    for (const auto& p : batch) {
        if (p.y == 1) {
            sum = sum + p.w * p.d * p.d;
        } else {
            const T gap = margin - p.d;
            if (gap > T(0)) sum = sum + p.w * gap * gap;
        }
    }
    return sum / T(static_cast<long>(batch.size()));
}

double weighted_margin_loss(std::span<const PairTerm<double>> batch, double margin);

/// ||a - b||_2. Throws Error(DimensionMismatch).
double pair_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// L2-normalizes; zero vectors stay zero.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);

struct PairLossGrad {
    double loss = 0;
    std::vector<double> distances;
    std::vector<Eigen::VectorXd> grad_a;  // dL/d(raw embedding a_i)
    std::vector<Eigen::VectorXd> grad_b;
};

/// Loss and its gradient with respect to the raw (pre-normalization) embeddings.
PairLossGrad margin_loss_and_grad(std::span<const Eigen::VectorXd> emb_a, std::span<const Eigen::VectorXd> emb_b,
                                  std::span<const int> labels, std::span<const double> weights, double margin,
                                  bool normalize);

}  // namespace cultdiff
