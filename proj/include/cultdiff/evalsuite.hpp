// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cultdiff/catalog.hpp"
#include "cultdiff/correlation.hpp"
#include "cultdiff/metrics.hpp"
#include "cultdiff/pairs.hpp"
#include "cultdiff/simtrain.hpp"

namespace cultdiff {

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Mean cosine similarity between the generated image and each reference.
/// Throws Error(EncoderNotLoaded) or Error(EmptyReferences).
double similarity_score(const Embedder& embedder, const Image& generated, std::span<const Image> references);

struct PairScore {
    std::string pair_id;
    double cultdiff_s = 0;
    std::optional<double> fid;
    double lpips = 0;
    double ssim = 0;
    std::optional<double> human;
};

struct ScoreOptions {
    int parallelism = 4;
    /// FID is left empty when null.
    const FeatureExtractor* extractor = nullptr;
    /// Reference set for the per-pair FID Gaussian. Defaults to the pair's own image_a.
    std::function<std::vector<ImageId>(const ImagePair&)> fid_references;
};

/// Scores every pair: image_b is the candidate, image_a the reference.
std::vector<PairScore> score_pairs(const Catalog& catalog, std::span<const ImagePair> pairs, const Embedder& embedder,
                                   const ScoreOptions& options = {});

/// Columns: pair_id,cultdiff_s,fid,lpips,ssim,human. Absent values are empty cells.
void write_scores_csv(std::ostream& out, std::span<const PairScore> scores);
std::vector<PairScore> read_scores_csv(std::istream& in);

inline constexpr std::array<const char*, 4> kMetricNames = {"cultdiff_s", "fid", "lpips", "ssim"};

struct CorrelationTable {
    /// One report per metric over every annotated pair.
    std::vector<CorrelationReport> overall;
    /// Same, per slice label; slices with fewer than two annotated pairs are omitted.
    std::map<std::string, std::vector<CorrelationReport>> slices;
    nlohmann::json to_json() const;
    void write_csv(std::ostream& out) const;
};

/// Correlates each metric against the human score. Pairs without a human score, and
/// pairs without FID for the FID row, are left out of that row.
CorrelationTable correlation_table(std::span<const PairScore> scores,
                                   const std::function<std::string(const PairScore&)>& slice = {});

}  // namespace cultdiff
