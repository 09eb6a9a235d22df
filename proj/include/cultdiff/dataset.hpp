// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cultdiff/evalsuite.hpp"
#include "cultdiff/pairs.hpp"
#include "cultdiff/survey.hpp"

namespace cultdiff {

struct DatasetOptions {
    SplitCounts counts;
    std::uint64_t split_seed = 13;
    /// Real pairs are always restricted to train prompts; allowed_artifacts is overwritten.
    RealPairOptions real{1.0, 7, 2, 0.5, std::nullopt};
    NegativeWeighting weighting = NegativeWeighting::Literal;
    std::vector<std::string> countries;  // empty: every country in the catalog configuration
};

struct Dataset {
    SplitPlan plan;
    SplitResult splits;
    std::size_t real_pairs = 0;
    std::size_t synthetic_pairs = 0;
    std::vector<ImageId> unannotated;
};

/// Split plan, synthetic pairs from the survey store, real pairs over train prompts, and
/// the per-split assignment.
Dataset build_dataset(const Catalog& catalog, const SurveyStore& store, const DatasetOptions& options = {});

/// FID reference set of a real-synthetic pair: the three references of its survey question.
std::function<std::vector<ImageId>(const ImagePair&)> question_references(const SurveyStore& store);

}  // namespace cultdiff
