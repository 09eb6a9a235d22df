// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/survey.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cultdiff/rng.hpp"

namespace cultdiff {

std::array<std::string, 4> aspect_labels(Category category) {
    switch (category) {
    case Category::Architecture: return {"Overall similarity", "Shapes", "Materials / textures", "Background / surroundings"};
    case Category::Clothing: return {"Overall similarity", "Color / texture", "Design / patterns", "Background elements"};
    case Category::Food: return {"Overall similarity", "Presentation / plating", "Colors / textures", "Ingredients / components"};
    }
    return {};
}

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS surveys (
    id INTEGER PRIMARY KEY,
    country TEXT NOT NULL,
    seed INTEGER NOT NULL,
    layout TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS survey_questions (
    id INTEGER PRIMARY KEY,
    survey_id INTEGER NOT NULL REFERENCES surveys(id),
    position INTEGER NOT NULL,
    artifact_id INTEGER NOT NULL,
    ref1 INTEGER NOT NULL,
    ref2 INTEGER NOT NULL,
    ref3 INTEGER NOT NULL,
    generated_image_id INTEGER NOT NULL,
    model_id TEXT NOT NULL,
    item_key TEXT NOT NULL,
    UNIQUE (survey_id, position)
);
CREATE TABLE IF NOT EXISTS annotators (
    survey_id INTEGER NOT NULL REFERENCES surveys(id),
    annotator_id TEXT NOT NULL,
    PRIMARY KEY (survey_id, annotator_id)
);
CREATE TABLE IF NOT EXISTS annotations (
    question_id INTEGER NOT NULL REFERENCES survey_questions(id),
    annotator_id TEXT NOT NULL,
    q1_1 INTEGER NOT NULL, q1_2 INTEGER NOT NULL, q1_3 INTEGER NOT NULL, q1_4 INTEGER NOT NULL,
    q2 INTEGER NOT NULL, q3 INTEGER NOT NULL,
    inappropriate INTEGER NOT NULL,
    submitted_at INTEGER NOT NULL,
    PRIMARY KEY (question_id, annotator_id)
);
)sql";

constexpr const char* kQuestionColumns =
    "id, survey_id, position, artifact_id, ref1, ref2, ref3, generated_image_id, model_id, item_key";
constexpr const char* kAnnotationColumns =
    "question_id, annotator_id, q1_1, q1_2, q1_3, q1_4, q2, q3, inappropriate, submitted_at";

SurveyQuestion read_question(const Statement& s) {
    SurveyQuestion q;
    q.id = QuestionId(s.column_int(0));
    q.survey_id = SurveyId(s.column_int(1));
    q.position = static_cast<int>(s.column_int(2));
    q.artifact_id = ArtifactId(s.column_int(3));
    q.reference_image_ids = {ImageId(s.column_int(4)), ImageId(s.column_int(5)), ImageId(s.column_int(6))};
    q.generated_image_id = ImageId(s.column_int(7));
    q.model_id = s.column_text(8);
    q.item_key = s.column_text(9);
    return q;
}

AnnotationRecord read_annotation(const Statement& s) {
    AnnotationRecord r;
    r.question_id = QuestionId(s.column_int(0));
    r.annotator_id = s.column_text(1);
    for (int i = 0; i < 4; ++i) r.q1[i] = static_cast<int>(s.column_int(2 + i));
    r.q2 = static_cast<int>(s.column_int(6));
    r.q3 = static_cast<int>(s.column_int(7));
    r.inappropriate = s.column_int(8) != 0;
    r.submitted_at = s.column_int(9);
    return r;
}

std::string_view layout_name(SurveyLayout layout) {
    return layout == SurveyLayout::RandomModel ? "random_model" : "all_models";
}

SurveyLayout parse_layout(std::string_view name) {
    if (name == "random_model") return SurveyLayout::RandomModel;
    if (name == "all_models") return SurveyLayout::AllModels;
    fail(ErrorCode::InvalidConfig, "unknown survey layout '" + std::string(name) + "'");
}

std::int64_t unix_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

}  // namespace

SurveyStore::SurveyStore(const Catalog& catalog) : m_catalog(catalog), m_db(catalog.database()) {
    std::lock_guard lock(m_db.writer());
    m_db.exec(kSchema);
}

Survey SurveyStore::build_survey(std::string_view country, std::uint64_t seed, const SurveyOptions& options) {
    const auto code = m_catalog.resolve_country(country);
    if (!code) fail(ErrorCode::UnknownCountry, "'" + std::string(country) + "' is not a configured country");
    if (options.models.empty()) fail(ErrorCode::InvalidConfig, "survey needs at least one generator model");

    Rng rng(seed);
    Survey survey;
    survey.country = *code;
    survey.seed = seed;
    survey.layout = options.layout;

    const auto all = m_catalog.artifacts();
    for (Category category : kAllCategories) {
        std::vector<Artifact> cell;
        for (const auto& a : all)
            if (a.country == *code && a.category == category) cell.push_back(a);
        if (static_cast<int>(cell.size()) < options.artifacts_per_category)
            fail(ErrorCode::InsufficientImages, *code + "/" + std::string(to_string(category)) + " has " +
                                                    std::to_string(cell.size()) + " artifacts, need " +
                                                    std::to_string(options.artifacts_per_category));
        cell.resize(static_cast<std::size_t>(options.artifacts_per_category));

        for (const auto& artifact : cell) {
            const std::string label = "artifact " + std::to_string(artifact.id.value) + " (" + artifact.name + ")";
            auto real = m_catalog.images_of(artifact.id, ImageSource::Real);
            if (real.size() < 3)
                fail(ErrorCode::InsufficientImages,
                     label + " has " + std::to_string(real.size()) + " real images, need 3");
            const auto generated = m_catalog.images_of(artifact.id, ImageSource::Generated);
            std::map<std::string, std::vector<ImageId>> by_model;
            for (const auto& g : generated) by_model[*g.model_id].push_back(g.id);
            for (const auto& model : options.models)
                if (by_model[model].empty())
                    fail(ErrorCode::InsufficientImages, label + " has no image generated by " + model);

            // Partial Fisher-Yates over the real images, sorted by id.
            for (std::size_t i = 0; i < 3; ++i) std::swap(real[i], real[i + rng.index(real.size() - i)]);
            const std::array<ImageId, 3> refs{real[0].id, real[1].id, real[2].id};

            auto add = [&](const std::string& model, std::string item_key) {
                const auto& candidates = by_model[model];
                SurveyQuestion q;
                q.artifact_id = artifact.id;
                q.reference_image_ids = refs;
                q.generated_image_id = candidates[rng.index(candidates.size())];
                q.model_id = model;
                q.item_key = std::move(item_key);
                survey.questions.push_back(std::move(q));
            };
            if (options.layout == SurveyLayout::RandomModel) {
                add(options.models[rng.index(options.models.size())], std::to_string(artifact.id.value));
            } else {
                for (const auto& model : options.models) add(model, std::to_string(artifact.id.value) + "/" + model);
            }
        }
    }
    if (options.shuffle) rng.shuffle(std::span(survey.questions));

    m_db.transaction([&] {
        m_db.prepare("INSERT INTO surveys (country, seed, layout) VALUES (?, ?, ?)")
            .bind(1, survey.country)
            .bind(2, static_cast<std::int64_t>(seed))
            .bind(3, layout_name(options.layout))
            .run();
        survey.id = SurveyId(m_db.last_insert_id());
        auto insert = m_db.prepare(
            "INSERT INTO survey_questions (survey_id, position, artifact_id, ref1, ref2, ref3, generated_image_id, "
            "model_id, item_key) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)");
        for (std::size_t i = 0; i < survey.questions.size(); ++i) {
            auto& q = survey.questions[i];
            q.survey_id = survey.id;
            q.position = static_cast<int>(i);
            insert.reset();
            insert.bind(1, survey.id.value)
                .bind(2, q.position)
                .bind(3, q.artifact_id.value)
                .bind(4, q.reference_image_ids[0].value)
                .bind(5, q.reference_image_ids[1].value)
                .bind(6, q.reference_image_ids[2].value)
                .bind(7, q.generated_image_id.value)
                .bind(8, q.model_id)
                .bind(9, q.item_key)
                .run();
            q.id = QuestionId(m_db.last_insert_id());
        }
    });
    return survey;
}

std::optional<Survey> SurveyStore::survey(SurveyId id) const {
    auto s = m_db.prepare("SELECT id, country, seed, layout FROM surveys WHERE id = ?");
    s.bind(1, id.value);
    if (!s.step()) return std::nullopt;
    Survey out;
    out.id = SurveyId(s.column_int(0));
    out.country = s.column_text(1);
    out.seed = static_cast<std::uint64_t>(s.column_int(2));
    out.layout = parse_layout(s.column_text(3));
    auto q = m_db.prepare(std::string("SELECT ") + kQuestionColumns +
                          " FROM survey_questions WHERE survey_id = ? ORDER BY position");
    q.bind(1, id.value);
    while (q.step()) out.questions.push_back(read_question(q));
    return out;
}

std::vector<Survey> SurveyStore::surveys() const {
    std::vector<SurveyId> ids;
    auto s = m_db.prepare("SELECT id FROM surveys ORDER BY id");
    while (s.step()) ids.emplace_back(s.column_int(0));
    std::vector<Survey> out;
    for (auto id : ids) out.push_back(*survey(id));
    return out;
}

std::optional<SurveyQuestion> SurveyStore::question(QuestionId id) const {
    auto q = m_db.prepare(std::string("SELECT ") + kQuestionColumns + " FROM survey_questions WHERE id = ?");
    q.bind(1, id.value);
    if (!q.step()) return std::nullopt;
    return read_question(q);
}

void SurveyStore::register_annotator(SurveyId survey, std::string_view annotator_id) {
    if (annotator_id.empty()) fail(ErrorCode::SchemaViolation, "annotator id is empty");
    std::lock_guard lock(m_db.writer());
    auto s = m_db.prepare("SELECT 1 FROM surveys WHERE id = ?");
    s.bind(1, survey.value);
    if (!s.step()) fail(ErrorCode::UnknownSurvey, "survey " + std::to_string(survey.value));
    m_db.prepare("INSERT OR IGNORE INTO annotators (survey_id, annotator_id) VALUES (?, ?)")
        .bind(1, survey.value)
        .bind(2, annotator_id)
        .run();
}

bool SurveyStore::has_annotator(SurveyId survey, std::string_view annotator_id) const {
    auto s = m_db.prepare("SELECT 1 FROM annotators WHERE survey_id = ? AND annotator_id = ?");
    s.bind(1, survey.value).bind(2, annotator_id);
    return s.step();
}

std::vector<std::string> SurveyStore::annotators(SurveyId survey) const {
    auto s = m_db.prepare("SELECT annotator_id FROM annotators WHERE survey_id = ? ORDER BY annotator_id");
    s.bind(1, survey.value);
    std::vector<std::string> out;
    while (s.step()) out.push_back(s.column_text(0));
    return out;
}

AnnotationRecord SurveyStore::submit(const AnnotationRow& row, std::optional<SurveyId> expected_survey) {
    const std::string at = "row " + std::to_string(row.row_number) + ": ";
    if (!row.question_id) fail(ErrorCode::SchemaViolation, at + "missing question_id");
    if (row.annotator_id.empty()) fail(ErrorCode::SchemaViolation, at + "missing annotator_id");

    AnnotationRecord rec;
    rec.question_id = QuestionId(*row.question_id);
    rec.annotator_id = row.annotator_id;
    auto likert = [&](const std::optional<int>& v, const char* name) {
        if (!v) fail(ErrorCode::SchemaViolation, at + "missing " + name);
        if (*v < kLikertMin || *v > kLikertMax)
            fail(ErrorCode::LikertOutOfRange, at + name + " = " + std::to_string(*v) + " is outside 1..5");
        return *v;
    };
    for (int i = 0; i < 4; ++i) rec.q1[i] = likert(row.q1[i], kQuestionKeys[i]);
    rec.q2 = likert(row.q2, "q2");
    rec.q3 = likert(row.q3, "q3");
    if (!row.inappropriate) fail(ErrorCode::SchemaViolation, at + "missing inappropriate");
    rec.inappropriate = *row.inappropriate;

    std::lock_guard lock(m_db.writer());
    const auto q = question(rec.question_id);
    if (!q || (expected_survey && q->survey_id != *expected_survey))
        fail(ErrorCode::UnknownQuestion, at + "question " + std::to_string(rec.question_id.value) + " does not exist");
    if (!has_annotator(q->survey_id, rec.annotator_id))
        fail(ErrorCode::UnknownAnnotator,
             at + "annotator '" + rec.annotator_id + "' is not registered for survey " + std::to_string(q->survey_id.value));
    auto dup = m_db.prepare("SELECT 1 FROM annotations WHERE question_id = ? AND annotator_id = ?");
    dup.bind(1, rec.question_id.value).bind(2, rec.annotator_id);
    if (dup.step())
        fail(ErrorCode::DuplicateResponse, at + "annotator '" + rec.annotator_id + "' already answered question " +
                                               std::to_string(rec.question_id.value));
    rec.submitted_at = unix_now();
    m_db.prepare(std::string("INSERT INTO annotations (") + kAnnotationColumns + ") VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)")
        .bind(1, rec.question_id.value)
        .bind(2, rec.annotator_id)
        .bind(3, rec.q1[0])
        .bind(4, rec.q1[1])
        .bind(5, rec.q1[2])
        .bind(6, rec.q1[3])
        .bind(7, rec.q2)
        .bind(8, rec.q3)
        .bind(9, rec.inappropriate ? 1 : 0)
        .bind(10, rec.submitted_at)
        .run();
    return rec;
}

IngestResult SurveyStore::ingest(std::span<const AnnotationRow> rows, bool register_unknown_annotators) {
    IngestResult result;
    m_db.transaction([&] {
        for (const auto& row : rows) {
            try {
                if (register_unknown_annotators && row.question_id && !row.annotator_id.empty()) {
                    if (const auto q = question(QuestionId(*row.question_id)))
                        register_annotator(q->survey_id, row.annotator_id);
                }
                result.accepted.push_back(submit(row));
            } catch (const Error& e) {
                result.rejected.push_back({row.row_number, e.code(), e.what()});
            }
        }
    });
    return result;
}

std::vector<AnnotationRecord> SurveyStore::annotations() const {
    auto s = m_db.prepare(std::string("SELECT ") + kAnnotationColumns +
                          " FROM annotations ORDER BY question_id, annotator_id");
    std::vector<AnnotationRecord> out;
    while (s.step()) out.push_back(read_annotation(s));
    return out;
}

std::vector<AnnotationRecord> SurveyStore::annotations(SurveyId survey) const {
    auto s = m_db.prepare(std::string("SELECT a.") + kAnnotationColumns +
                          " FROM annotations a JOIN survey_questions q ON q.id = a.question_id "
                          "WHERE q.survey_id = ? ORDER BY a.question_id, a.annotator_id");
    s.bind(1, survey.value);
    std::vector<AnnotationRecord> out;
    while (s.step()) out.push_back(read_annotation(s));
    return out;
}

std::optional<SurveyQuestion> SurveyStore::next_question(SurveyId survey, std::string_view annotator_id) const {
    auto q = m_db.prepare(std::string("SELECT ") + kQuestionColumns +
                          " FROM survey_questions WHERE survey_id = ? AND id NOT IN "
                          "(SELECT question_id FROM annotations WHERE annotator_id = ?) ORDER BY position LIMIT 1");
    q.bind(1, survey.value).bind(2, annotator_id);
    if (!q.step()) return std::nullopt;
    return read_question(q);
}

std::vector<AnnotatorProgress> SurveyStore::progress(SurveyId survey) const {
    auto total_q = m_db.prepare("SELECT COUNT(*) FROM survey_questions WHERE survey_id = ?");
    total_q.bind(1, survey.value).step();
    const auto total = static_cast<std::size_t>(total_q.column_int(0));
    auto s = m_db.prepare(
        "SELECT n.annotator_id, (SELECT COUNT(*) FROM annotations a JOIN survey_questions q ON q.id = a.question_id "
        "WHERE q.survey_id = n.survey_id AND a.annotator_id = n.annotator_id) "
        "FROM annotators n WHERE n.survey_id = ? ORDER BY n.annotator_id");
    s.bind(1, survey.value);
    std::vector<AnnotatorProgress> out;
    while (s.step()) out.push_back({s.column_text(0), static_cast<std::size_t>(s.column_int(1)), total});
    return out;
}

AgreementReport SurveyStore::agreement(std::string_view country) const {
    const auto code = m_catalog.resolve_country(country);
    if (!code) fail(ErrorCode::UnknownCountry, "'" + std::string(country) + "' is not a configured country");

    // item_key -> answers of every annotator who saw that item
    std::map<std::string, std::vector<std::array<int, 6>>> items;
    auto s = m_db.prepare(
        "SELECT q.item_key, a.q1_1, a.q1_2, a.q1_3, a.q1_4, a.q2, a.q3 FROM annotations a "
        "JOIN survey_questions q ON q.id = a.question_id JOIN surveys v ON v.id = q.survey_id "
        "WHERE v.country = ? ORDER BY q.item_key, a.annotator_id");
    s.bind(1, *code);
    while (s.step()) {
        std::array<int, 6> answers{};
        for (int i = 0; i < 6; ++i) answers[i] = static_cast<int>(s.column_int(1 + i));
        items[s.column_text(0)].push_back(answers);
    }

    AgreementReport report;
    report.country = *code;
    std::map<std::size_t, std::size_t> rater_histogram;
    for (const auto& [key, ratings] : items) ++rater_histogram[ratings.size()];
    std::size_t raters = 0, best = 0;
    for (const auto& [n, count] : rater_histogram)
        if (n >= 2 && count >= best) {
            best = count;
            raters = n;
        }
    report.n_raters = raters;

    std::vector<const std::vector<std::array<int, 6>>*> used;
    for (const auto& [key, ratings] : items) {
        if (ratings.size() == raters)
            used.push_back(&ratings);
        else
            ++report.dropped_items;
    }
    report.n_items = used.size();

    double sum = 0.0;
    int defined = 0;
    for (int question = 0; question < 6; ++question) {
        std::optional<double> kappa;
        if (used.size() >= 2) {
            CountMatrix counts(used.size(), std::vector<int>(5, 0));
            for (std::size_t i = 0; i < used.size(); ++i)
                for (const auto& answers : *used[i]) ++counts[i][answers[question] - 1];
            try {
                kappa = fleiss_kappa(counts);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DegenerateAgreement) throw;
            }
        }
        report.per_question[kQuestionKeys[question]] = kappa;
        if (kappa) {
            sum += *kappa;
            ++defined;
        }
    }
    if (defined > 0) report.kappa = sum / defined;
    return report;
}

std::vector<AnnotationRow> parse_annotation_csv(std::istream& in) {
    std::vector<AnnotationRow> rows;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t\r\"");
            const auto e = cell.find_last_not_of(" \t\r\"");
            cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
        }
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    auto parse_int = [](const std::string& s) -> std::optional<long long> {
        if (s.empty()) return std::nullopt;
        std::size_t pos = 0;
        try {
            const long long v = std::stoll(s, &pos);
            if (pos != s.size()) return std::nullopt;
            return v;
        } catch (...) {
            return std::nullopt;
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split(line);
        if (header.empty()) {
            header = cells;
            continue;
        }
        auto cell = [&](std::string_view name) -> std::string {
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == name) return i < cells.size() ? cells[i] : std::string();
            return {};
        };
        AnnotationRow row;
        row.row_number = line_no;
        row.question_id = parse_int(cell("question_id"));
        row.annotator_id = cell("annotator_id");
        for (int i = 0; i < 4; ++i)
            if (auto v = parse_int(cell(kQuestionKeys[i]))) row.q1[i] = static_cast<int>(*v);
        if (auto v = parse_int(cell("q2"))) row.q2 = static_cast<int>(*v);
        if (auto v = parse_int(cell("q3"))) row.q3 = static_cast<int>(*v);
        std::string flag = cell("inappropriate");
        std::ranges::transform(flag, flag.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (flag == "1" || flag == "true" || flag == "yes") row.inappropriate = true;
        if (flag == "0" || flag == "false" || flag == "no") row.inappropriate = false;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<AnnotationRow> read_annotation_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
    return parse_annotation_csv(in);
}

void write_annotation_csv(std::ostream& out, std::span<const AnnotationRecord> records) {
    out << "question_id,annotator_id,q1_1,q1_2,q1_3,q1_4,q2,q3,inappropriate\n";
    for (const auto& r : records)
        out << r.question_id.value << ',' << r.annotator_id << ',' << r.q1[0] << ',' << r.q1[1] << ',' << r.q1[2] << ','
            << r.q1[3] << ',' << r.q2 << ',' << r.q3 << ',' << (r.inappropriate ? 1 : 0) << '\n';
}

nlohmann::json to_json(const Survey& survey) {
    nlohmann::json qs = nlohmann::json::array();
    for (const auto& q : survey.questions)
        qs.push_back({{"id", q.id.value},
                      {"position", q.position},
                      {"artifact_id", q.artifact_id.value},
                      {"reference_image_ids",
                       {q.reference_image_ids[0].value, q.reference_image_ids[1].value, q.reference_image_ids[2].value}},
                      {"generated_image_id", q.generated_image_id.value},
                      {"model_id", q.model_id},
                      {"item_key", q.item_key}});
    return {{"id", survey.id.value},
            {"country", survey.country},
            {"seed", survey.seed},
            {"layout", layout_name(survey.layout)},
            {"questions", std::move(qs)}};
}

nlohmann::json to_json(const AnnotationRecord& r) {
    return {{"question_id", r.question_id.value},
            {"annotator_id", r.annotator_id},
            {"q1", r.q1},
            {"q2", r.q2},
            {"q3", r.q3},
            {"inappropriate", r.inappropriate},
            {"submitted_at", r.submitted_at}};
}

}  // namespace cultdiff
