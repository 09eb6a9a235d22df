// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cultdiff/survey.hpp"

namespace cultdiff {

/// One annotation joined with the context of the question it answers.
struct AnnotationView {
    QuestionId question;
    std::string country;
    Category category = Category::Architecture;
    std::string model_id;
    ArtifactId artifact;
    ImageId generated;
    std::string annotator_id;
    std::array<int, 6> answers{};  // kQuestionKeys order
};

std::vector<AnnotationView> annotation_views(const SurveyStore& store);

/// Index into kQuestionKeys for "q1_1" ... "q3". Throws Error(InvalidConfig).
int question_index(std::string_view key);

/// The six answers, or only Q1.x.
std::vector<int> question_set(std::string_view name);

struct CountryRank {
    int rank = 0;  // 1-based; tied countries share consecutive ranks in lexicographic order
    std::string country;
    double mean = 0;
    std::size_t n = 0;
    bool tied = false;  // another country has exactly the same mean
};

/// Countries sorted by descending mean of one question within the (model, category)
/// slice; unset filters match everything. Throws Error(EmptySlice).
std::vector<CountryRank> rank_countries(std::span<const AnnotationView> annotations, int question,
                                        const std::optional<std::string>& model,
                                        const std::optional<Category>& category);

enum class GroupKey { Country, Category, Model, Question };

std::optional<GroupKey> parse_group_key(std::string_view name);
std::string_view to_string(GroupKey key);

struct AggregateRow {
    std::map<std::string, std::string> group;  // key name -> value
    double mean = 0;
    std::optional<double> sem;  // absent for n = 1
    std::size_t n = 0;
};

/// Mean and standard error of the mean per group. An observation is one annotation's mean
/// over `questions`, or, when grouping by question, one annotation's answer to it.
std::vector<AggregateRow> aggregate_report(std::span<const AnnotationView> annotations,
                                           std::span<const GroupKey> grouping, std::span<const int> questions);

/// Sample standard deviation over the square root of n; absent for n < 2.
std::optional<double> standard_error(std::span<const double> values);

struct QuestionCorrelation {
    std::string country;
    std::optional<double> pearson;  // absent when either side has zero variance
    std::size_t n = 0;              // artifacts
};

/// Per country, Pearson r between per-artifact averages (over models and annotators) of two
/// questions. Countries with fewer than two artifacts are reported with n and no r.
std::vector<QuestionCorrelation> question_correlations(std::span<const AnnotationView> annotations, int question_a,
                                                       int question_b);

void write_rankings_csv(std::ostream& out, std::span<const CountryRank> ranks);
void write_aggregate_csv(std::ostream& out, std::span<const AggregateRow> rows, std::span<const GroupKey> grouping);
void write_question_correlations_csv(std::ostream& out, std::span<const QuestionCorrelation> rows);

struct Bar {
    std::string label;
    double value = 0;
    std::optional<double> error;
};

/// PNG bar chart with optional symmetric error bars.
void write_bar_chart(const std::filesystem::path& path, const std::string& title, std::span<const Bar> bars,
                     double y_min, double y_max);

/// PNG scatter plot with a free-text annotation (for example "r = 0.42").
void write_scatter_plot(const std::filesystem::path& path, const std::string& title, std::span<const double> x,
                        std::span<const double> y, const std::string& annotation);

}  // namespace cultdiff
