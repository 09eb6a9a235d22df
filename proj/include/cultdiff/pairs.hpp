// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cultdiff/catalog.hpp"
#include "cultdiff/survey.hpp"
#include "cultdiff/types.hpp"

namespace cultdiff {

struct ImagePair {
    std::string id;  // "rr:<a>:<b>" or "rs:<generated>:<reference>"
    ImageId image_a;
    ImageId image_b;
    int label = 0;  // 1 positive, 0 negative
    double weight = 1.0;
    PairOrigin origin = PairOrigin::RealReal;
    Split split = Split::Train;
    std::optional<double> source_score;  // mean Likert, real_synthetic only
    ArtifactId artifact_a;
    ArtifactId artifact_b;
    std::optional<std::string> model_id;
    std::optional<QuestionId> question_id;
};

nlohmann::json to_json(const ImagePair& pair);
ImagePair pair_from_json(const nlohmann::json& j);
void write_pairs_jsonl(std::ostream& out, std::span<const ImagePair> pairs);
std::vector<ImagePair> read_pairs_jsonl(std::istream& in);

/// (s - 1) / 4. Throws Error(OutOfRange) outside [1, 5].
double normalize_score(double mean_likert);

/// Mean over annotators of the mean of Q1.1-Q1.4. Throws Error(NoAnnotations).
double human_pair_score(std::span<const std::array<int, 4>> q1_answers);
double human_pair_score(std::span<const AnnotationRecord> annotations);

struct RealPairOptions {
    double negatives_per_positive = 1.0;
    std::uint64_t seed = 7;
    /// 0 keeps every within-artifact combination; otherwise a seeded sample of this many.
    int max_positives_per_artifact = 0;
    /// Share of negatives drawn from a different artifact of the same country.
    double same_country_fraction = 0.5;
    /// Restrict both images to these artifacts (e.g. the train prompts).
    std::optional<std::set<ArtifactId>> allowed_artifacts;
};

/// Positives pair real images of one artifact; negatives pair real images of different
/// artifacts. All weights are 1.
std::vector<ImagePair> build_real_pairs(const Catalog& catalog, const RealPairOptions& options = {});

enum class NegativeWeighting {
    Literal,   // w = normalize(score) for every pair
    Inverted,  // negatives use 1 - normalize(score)
};

/// One generated image with its survey references and the Q1 answers it received.
struct AnnotatedImage {
    ImageId generated;
    ArtifactId artifact;
    std::string model_id;
    QuestionId question;
    std::array<ImageId, 3> references;
    std::vector<std::array<int, 4>> q1_answers;
};

std::vector<ImagePair> synthetic_pairs_for(const AnnotatedImage& image,
                                           NegativeWeighting weighting = NegativeWeighting::Literal);

struct SyntheticPairResult {
    std::vector<ImagePair> pairs;
    std::vector<ImageId> unannotated;  // generated images shown in a survey but never answered
};

/// Gathers annotated images from every survey in the store. Annotations of a generated image
/// that appears in several questions are pooled; references come from its first question.
/// Throws Error(MissingReferences) when a reference image is no longer in the catalog.
std::vector<AnnotatedImage> collect_annotated_images(const SurveyStore& store);
SyntheticPairResult build_synthetic_pairs(const SurveyStore& store,
                                          NegativeWeighting weighting = NegativeWeighting::Literal);

struct SplitCounts {
    int train = 30;
    int val = 10;
    int test = 10;
    int total() const { return train + val + test; }
};

/// Prompt-level split assignment. Prompts and artifacts are one-to-one, so the plan is
/// keyed by artifact.
struct SplitPlan {
    std::uint64_t seed = 0;
    SplitCounts counts;
    std::map<ArtifactId, Split> assignment;

    std::optional<Split> of(ArtifactId artifact) const;
    std::set<ArtifactId> artifacts_in(Split split) const;
    nlohmann::json to_json() const;
    /// Throws Error(SplitOverlap) when one prompt is listed under two splits.
    static SplitPlan from_json(const nlohmann::json& j);
};

/// Per (country, category) cell: shuffle the cell's artifacts and take train/val/test
/// prompts in that order. Throws Error(InvalidConfig) for a cell smaller than counts.total().
SplitPlan make_split_plan(const Catalog& catalog, SplitCounts counts, std::uint64_t seed,
                          const std::vector<std::string>& countries = {});

struct SplitResult {
    std::vector<ImagePair> train;
    std::vector<ImagePair> val;
    std::vector<ImagePair> test;
    std::size_t dropped_real_pairs = 0;

    std::vector<ImagePair>& operator[](Split s) { return s == Split::Train ? train : s == Split::Val ? val : test; }
    const std::vector<ImagePair>& operator[](Split s) const {
        return s == Split::Train ? train : s == Split::Val ? val : test;
    }
};

/// Assigns each pair the split owning its prompt. Real-real pairs go to train only and are
/// dropped when either artifact is outside train. Throws Error(UnplannedPrompt) or
/// Error(SplitOverlap) if an image would land in two splits.
SplitResult split_dataset(std::span<const ImagePair> pairs, const SplitPlan& plan);

}  // namespace cultdiff
