// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cultdiff/agreement.hpp"
#include "cultdiff/catalog.hpp"
#include "cultdiff/error.hpp"
#include "cultdiff/types.hpp"

namespace cultdiff {

inline constexpr int kLikertMin = 1;
inline constexpr int kLikertMax = 5;
inline constexpr std::array<const char*, 5> kLikertAnchors = {"Not at all", "Slightly", "Somewhat", "Mostly",
                                                              "Completely"};
/// Column names of the six Likert answers, in storage order.
inline constexpr std::array<const char*, 6> kQuestionKeys = {"q1_1", "q1_2", "q1_3", "q1_4", "q2", "q3"};

/// Display labels for the four similarity aspects (Q1.1 is always overall similarity).
std::array<std::string, 4> aspect_labels(Category category);

struct SurveyQuestion {
    QuestionId id;
    SurveyId survey_id;
    int position = 0;
    ArtifactId artifact_id;
    std::array<ImageId, 3> reference_image_ids;
    ImageId generated_image_id;
    std::string model_id;
    /// Identity used as the agreement item: the artifact, or artifact/model when every
    /// model's image gets its own question.
    std::string item_key;
};

enum class SurveyLayout {
    RandomModel,  // one question per artifact; generator picked uniformly at random
    AllModels,    // one question per (artifact, model)
};

struct SurveyOptions {
    std::vector<std::string> models = default_models();
    int artifacts_per_category = 50;
    SurveyLayout layout = SurveyLayout::RandomModel;
    bool shuffle = false;  // seed-controlled question order; catalog order otherwise
};

struct Survey {
    SurveyId id;
    std::string country;
    std::uint64_t seed = 0;
    SurveyLayout layout = SurveyLayout::RandomModel;
    std::vector<SurveyQuestion> questions;
};

struct AnnotationRecord {
    QuestionId question_id;
    std::string annotator_id;
    std::array<int, 4> q1{};
    int q2 = 0;
    int q3 = 0;
    bool inappropriate = false;
    std::int64_t submitted_at = 0;  // unix seconds

    /// The six answers in kQuestionKeys order.
    std::array<int, 6> answers() const { return {q1[0], q1[1], q1[2], q1[3], q2, q3}; }
};

/// One unvalidated input row (CSV line or HTTP body). Missing fields are nullopt.
struct AnnotationRow {
    std::size_t row_number = 0;
    std::optional<std::int64_t> question_id;
    std::string annotator_id;
    std::array<std::optional<int>, 4> q1;
    std::optional<int> q2;
    std::optional<int> q3;
    std::optional<bool> inappropriate;
};

struct IngestError {
    std::size_t row_number = 0;
    ErrorCode code;
    std::string reason;
};

struct IngestResult {
    std::vector<AnnotationRecord> accepted;
    std::vector<IngestError> rejected;
};

struct AnnotatorProgress {
    std::string annotator_id;
    std::size_t answered = 0;
    std::size_t total = 0;
};

/// Surveys, annotator rosters and annotations, persisted next to the catalog.
class SurveyStore {
public:
    explicit SurveyStore(const Catalog& catalog);

    /// Builds and persists a survey for one country. Deterministic given the seed.
    /// Throws Error(InsufficientImages) naming the offending artifact or cell.
    Survey build_survey(std::string_view country, std::uint64_t seed, const SurveyOptions& options = {});

    std::optional<Survey> survey(SurveyId id) const;
    std::vector<Survey> surveys() const;
    std::optional<SurveyQuestion> question(QuestionId id) const;

    void register_annotator(SurveyId survey, std::string_view annotator_id);
    bool has_annotator(SurveyId survey, std::string_view annotator_id) const;
    std::vector<std::string> annotators(SurveyId survey) const;

    /// Validates one row and persists it atomically. Throws Error with
    /// LikertOutOfRange, SchemaViolation, UnknownQuestion, UnknownAnnotator or DuplicateResponse.
    AnnotationRecord submit(const AnnotationRow& row, std::optional<SurveyId> expected_survey = std::nullopt);

    /// All-or-nothing per row, never per file.
    IngestResult ingest(std::span<const AnnotationRow> rows, bool register_unknown_annotators = false);

    std::vector<AnnotationRecord> annotations() const;
    std::vector<AnnotationRecord> annotations(SurveyId survey) const;

    std::optional<SurveyQuestion> next_question(SurveyId survey, std::string_view annotator_id) const;
    std::vector<AnnotatorProgress> progress(SurveyId survey) const;

    /// Fleiss' kappa per country over every survey of that country.
    AgreementReport agreement(std::string_view country) const;

    const Catalog& catalog() const { return m_catalog; }

private:
    const Catalog& m_catalog;
    Database& m_db;
};

/// Parses `question_id, annotator_id, q1_1, q1_2, q1_3, q1_4, q2, q3, inappropriate`.
/// Malformed cells become nullopt so ingestion reports them per row.
std::vector<AnnotationRow> parse_annotation_csv(std::istream& in);
std::vector<AnnotationRow> read_annotation_csv(const std::filesystem::path& path);
void write_annotation_csv(std::ostream& out, std::span<const AnnotationRecord> records);

nlohmann::json to_json(const Survey& survey);
nlohmann::json to_json(const AnnotationRecord& record);

}  // namespace cultdiff
