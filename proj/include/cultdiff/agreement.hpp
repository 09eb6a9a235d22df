// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cultdiff {

/// items x categories matrix of rater counts.
using CountMatrix = std::vector<std::vector<int>>;

/// Fleiss' kappa, (P_bar - P_e) / (1 - P_e).
/// Throws Error(UnequalRaterCounts) when rows sum differently (or to fewer than two raters),
/// Error(OutOfRange) for fewer than two items or negative counts, and
/// Error(DegenerateAgreement) when P_e = 1 (every rating in one category).
double fleiss_kappa(const CountMatrix& counts);

struct AgreementReport {
    std::string country;
    /// Headline value: mean of the defined per-question kappas.
    std::optional<double> kappa;
    std::map<std::string, std::optional<double>> per_question;  // q1_1 ... q3
    std::size_t n_items = 0;
    std::size_t n_raters = 0;
    std::size_t n_categories = 5;
    std::size_t dropped_items = 0;  // items whose rater count differs from n_raters
    std::string aggregation = "mean_of_per_question_kappa";

    nlohmann::json to_json() const;
};

}  // namespace cultdiff
