// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cultdiff/error.hpp"

namespace cultdiff {

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) return std::nullopt;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = midranks(x);
    const auto ry = midranks(y);
    return pearson(rx, ry);
}

namespace {

std::int64_t tie_pairs(std::int64_t run) {
    return run * (run - 1) / 2;
}

// Sorts v in place, returning the number of inversions (strictly greater before smaller).
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = merge_count(v, scratch, lo, mid) + merge_count(v, scratch, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<std::int64_t>(mid - i);
            scratch[k++] = v[j++];
        } else {
            scratch[k++] = v[i++];
        }
    }
    while (i < mid) scratch[k++] = v[i++];
    while (j < hi) scratch[k++] = v[j++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

}  // namespace

KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) fail(ErrorCode::LengthMismatch, "kendall inputs differ in length");
    KendallCounts c;
    const std::size_t n = x.size();
    c.n = static_cast<std::int64_t>(n);
    c.pairs = tie_pairs(c.n);
    if (n == 0) return c;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::ranges::sort(order, [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
    });

    // Ties in x and joint ties, from runs in the (x, y)-sorted order.
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        c.ties_x += tie_pairs(static_cast<std::int64_t>(j - i + 1));
        ++c.distinct_x;
        for (std::size_t a = i; a <= j;) {
            std::size_t b = a;
            while (b + 1 <= j && y[order[b + 1]] == y[order[a]]) ++b;
            c.ties_xy += tie_pairs(static_cast<std::int64_t>(b - a + 1));
            a = b + 1;
        }
        i = j + 1;
    }

    std::vector<double> ys(n);
    for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
    std::vector<double> scratch(n);
    const std::int64_t swaps = merge_count(ys, scratch, 0, n);

    // ys is now sorted; count ties in y.
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && ys[j + 1] == ys[i]) ++j;
        c.ties_y += tie_pairs(static_cast<std::int64_t>(j - i + 1));
        ++c.distinct_y;
        i = j + 1;
    }

    c.score = c.pairs - c.ties_x - c.ties_y + c.ties_xy - 2 * swaps;
    return c;
}

std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
    const auto c = kendall_counts(x, y);
    const double denom =
        std::sqrt(static_cast<double>(c.pairs - c.ties_x)) * std::sqrt(static_cast<double>(c.pairs - c.ties_y));
    if (denom == 0.0) return std::nullopt;
    return std::clamp(static_cast<double>(c.score) / denom, -1.0, 1.0);
}

std::optional<double> kendall_tau_c(std::span<const double> x, std::span<const double> y) {
    const auto c = kendall_counts(x, y);
    const std::int64_t m = std::min({c.distinct_x, c.distinct_y, c.n});
    if (m < 2) return std::nullopt;
    const double n = static_cast<double>(c.n);
    const double md = static_cast<double>(m);
    return 2.0 * static_cast<double>(c.score) / (n * n * (md - 1.0) / md);
}

nlohmann::json CorrelationReport::to_json() const {
    auto opt = [](const std::optional<double>& v) -> nlohmann::json {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    return {{"metric", metric},
            {"spearman", opt(spearman)},
            {"pearson", opt(pearson)},
            {"kendall_tau_b", opt(kendall_tau_b)},
            {"kendall_tau_c", opt(kendall_tau_c)},
            {"n", n},
            {"tau_c_m", tau_c_m},
            {"undefined", undefined}};
}

CorrelationReport correlate(std::string metric, std::span<const double> metric_values,
                            std::span<const double> human_values) {
    if (metric_values.size() != human_values.size())
        fail(ErrorCode::LengthMismatch, metric + ": " + std::to_string(metric_values.size()) + " metric values vs " +
                                            std::to_string(human_values.size()) + " human values");
    if (metric_values.size() < 2) fail(ErrorCode::LengthMismatch, metric + ": need at least two samples");
    for (std::size_t i = 0; i < metric_values.size(); ++i)
        if (!std::isfinite(metric_values[i]) || !std::isfinite(human_values[i]))
            fail(ErrorCode::OutOfRange, metric + ": non-finite value at index " + std::to_string(i));

    CorrelationReport r;
    r.metric = std::move(metric);
    r.n = metric_values.size();
    r.spearman = spearman(metric_values, human_values);
    r.pearson = pearson(metric_values, human_values);
    const auto counts = kendall_counts(metric_values, human_values);
    r.tau_c_m = std::min({counts.distinct_x, counts.distinct_y, counts.n});
    r.kendall_tau_b = kendall_tau_b(metric_values, human_values);
    r.kendall_tau_c = kendall_tau_c(metric_values, human_values);
    if (!r.spearman) r.undefined.emplace_back("spearman");
    if (!r.pearson) r.undefined.emplace_back("pearson");
    if (!r.kendall_tau_b) r.undefined.emplace_back("kendall_tau_b");
    if (!r.kendall_tau_c) r.undefined.emplace_back("kendall_tau_c");
    return r;
}

}  // namespace cultdiff
