// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cultdiff {

/// 1-based ranks with ties assigned the mean of the ranks they span.
std::vector<double> midranks(std::span<const double> values);

/// Each returns nullopt when the statistic is undefined (a zero-variance input).
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// Pair counts for Kendall statistics, computed in O(n log n) (Knight's algorithm).
struct KendallCounts {
    std::int64_t n = 0;
    std::int64_t pairs = 0;          // n(n-1)/2
    std::int64_t ties_x = 0;         // pairs tied in x
    std::int64_t ties_y = 0;         // pairs tied in y
    std::int64_t ties_xy = 0;        // pairs tied in both
    std::int64_t score = 0;          // concordant - discordant
    std::int64_t distinct_x = 0;
    std::int64_t distinct_y = 0;
};

KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y);
std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y);
/// Stuart's tau-c with m = min(distinct x, distinct y), capped at n.
std::optional<double> kendall_tau_c(std::span<const double> x, std::span<const double> y);

struct CorrelationReport {
    std::string metric;
    std::optional<double> spearman;
    std::optional<double> pearson;
    std::optional<double> kendall_tau_b;
    std::optional<double> kendall_tau_c;
    std::size_t n = 0;
    std::int64_t tau_c_m = 0;
    std::vector<std::string> undefined;  // names of statistics that had zero variance

    nlohmann::json to_json() const;
};

/// Throws Error(LengthMismatch) for unequal lengths or n < 2 and Error(OutOfRange) for
/// non-finite values. Undefined statistics are reported as absent, never as zero.
CorrelationReport correlate(std::string metric, std::span<const double> metric_values,
                            std::span<const double> human_values);

}  // namespace cultdiff
