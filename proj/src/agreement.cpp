// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/agreement.hpp"

#include "cultdiff/error.hpp"

namespace cultdiff {

double fleiss_kappa(const CountMatrix& counts) {
    if (counts.size() < 2) fail(ErrorCode::OutOfRange, "fleiss kappa needs at least two items");
    const std::size_t k = counts.front().size();
    if (k == 0) fail(ErrorCode::OutOfRange, "fleiss kappa needs at least one category");

    long long raters = -1;
    std::vector<long long> column_totals(k, 0);
    double p_bar = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto& row = counts[i];
        if (row.size() != k) fail(ErrorCode::UnequalRaterCounts, "row " + std::to_string(i) + " has wrong width");
        long long n = 0;
        long long sum_sq = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (row[j] < 0) fail(ErrorCode::OutOfRange, "negative count in row " + std::to_string(i));
            n += row[j];
            sum_sq += static_cast<long long>(row[j]) * row[j];
            column_totals[j] += row[j];
        }
        if (raters < 0) raters = n;
        if (n != raters)
            fail(ErrorCode::UnequalRaterCounts,
                 "row " + std::to_string(i) + " has " + std::to_string(n) + " ratings, expected " + std::to_string(raters));
        if (n < 2) fail(ErrorCode::UnequalRaterCounts, "at least two raters per item are required");
        p_bar += static_cast<double>(sum_sq - n) / static_cast<double>(n * (n - 1));
    }
    p_bar /= static_cast<double>(counts.size());

    const double total = static_cast<double>(raters) * static_cast<double>(counts.size());
    double p_e = 0.0;
    for (long long t : column_totals) {
        const double p = static_cast<double>(t) / total;
        p_e += p * p;
    }
    if (p_e >= 1.0) fail(ErrorCode::DegenerateAgreement, "all ratings fall in one category; kappa is undefined");
    return (p_bar - p_e) / (1.0 - p_e);
}

nlohmann::json AgreementReport::to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [q, v] : per_question) per[q] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    return {{"country", country},
            {"kappa", kappa ? nlohmann::json(*kappa) : nlohmann::json(nullptr)},
            {"per_question", per},
            {"n_items", n_items},
            {"n_raters", n_raters},
            {"n_categories", n_categories},
            {"dropped_items", dropped_items},
            {"aggregation", aggregation}};
}

}  // namespace cultdiff
