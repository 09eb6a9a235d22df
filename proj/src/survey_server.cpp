// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/survey_server.hpp"

#include <mutex>
#include <thread>

#include <httplib.h>

#include "cultdiff/error.hpp"

namespace cultdiff {

namespace {

nlohmann::json error_body(ErrorCode code, const std::string& message) {
    return {{"error", std::string(to_string(code))}, {"message", message}};
}

std::string image_url(ImageId id) { return "/api/images/" + std::to_string(id.value); }

std::optional<int> int_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer()) return std::nullopt;
    return j[key].get<int>();
}

}  // namespace

int SurveyApi::status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownSurvey:
        case ErrorCode::UnknownAnnotator: return 404;
        case ErrorCode::DuplicateResponse: return 409;
        case ErrorCode::LikertOutOfRange:
        case ErrorCode::SchemaViolation:
        case ErrorCode::UnknownQuestion: return 422;
        default: return 500;
    }
}

ApiResponse SurveyApi::next(std::int64_t survey_id, const std::string& annotator_id) const {
    const auto survey = m_store.survey(SurveyId(survey_id));
    if (!survey) return {404, error_body(ErrorCode::UnknownSurvey, "no survey " + std::to_string(survey_id))};
    if (!m_store.has_annotator(survey->id, annotator_id))
        return {404, error_body(ErrorCode::UnknownAnnotator, "annotator '" + annotator_id + "' is not registered")};

    std::size_t answered = 0;
    for (const auto& p : m_store.progress(survey->id))
        if (p.annotator_id == annotator_id) answered = p.answered;
    const auto total = survey->questions.size();
    const auto q = m_store.next_question(survey->id, annotator_id);
    if (!q) return {200, {{"complete", true}, {"answered", answered}, {"total", total}}};

    const auto artifact = m_store.catalog().artifact(q->artifact_id);
    const auto labels = aspect_labels(artifact ? artifact->category : Category::Architecture);
    nlohmann::json refs = nlohmann::json::array();
    for (auto id : q->reference_image_ids) refs.push_back(image_url(id));
    nlohmann::json questions = nlohmann::json::array();
    const std::array<std::string, 6> texts{labels[0], labels[1], labels[2], labels[3], "Description match", "Realism"};
    for (std::size_t i = 0; i < kQuestionKeys.size(); ++i)
        questions.push_back({{"key", kQuestionKeys[i]}, {"label", texts[i]}, {"scale", kLikertAnchors}});
    return {200,
            {{"complete", false},
             {"question_id", q->id.value},
             {"position", q->position},
             {"total", total},
             {"answered", answered},
             {"category", artifact ? std::string(to_string(artifact->category)) : ""},
             {"image_urls", {{"references", refs}, {"candidate", image_url(q->generated_image_id)}}},
             {"questions", questions}}};
}

ApiResponse SurveyApi::respond(std::int64_t survey_id, const std::string& annotator_id, const std::string& body) {
    const auto survey = m_store.survey(SurveyId(survey_id));
    if (!survey) return {404, error_body(ErrorCode::UnknownSurvey, "no survey " + std::to_string(survey_id))};
    if (!m_store.has_annotator(survey->id, annotator_id))
        return {404, error_body(ErrorCode::UnknownAnnotator, "annotator '" + annotator_id + "' is not registered")};

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
        return {422, error_body(ErrorCode::SchemaViolation, "body is not valid JSON")};
    }
    if (!j.is_object()) return {422, error_body(ErrorCode::SchemaViolation, "body must be a JSON object")};

    AnnotationRow row;
    row.row_number = 1;
    row.annotator_id = annotator_id;
    if (j.contains("question_id") && j["question_id"].is_number_integer()) row.question_id = j["question_id"].get<std::int64_t>();
    if (!j.contains("q1") || !j["q1"].is_array() || j["q1"].size() != 4)
        return {422, error_body(ErrorCode::SchemaViolation, "q1 must hold exactly four answers")};
    for (std::size_t i = 0; i < 4; ++i)
        if (j["q1"][i].is_number_integer()) row.q1[i] = j["q1"][i].get<int>();
    row.q2 = int_field(j, "q2");
    row.q3 = int_field(j, "q3");
    if (j.contains("inappropriate") && j["inappropriate"].is_boolean()) row.inappropriate = j["inappropriate"].get<bool>();

    try {
        const auto rec = m_store.submit(row, survey->id);
        std::size_t answered = 0;
        for (const auto& p : m_store.progress(survey->id))
            if (p.annotator_id == annotator_id) answered = p.answered;
        return {201, {{"record", to_json(rec)}, {"answered", answered}, {"total", survey->questions.size()}}};
    } catch (const Error& e) {
        return {status_for(e.code()), error_body(e.code(), e.what())};
    }
}

ApiResponse SurveyApi::progress(std::int64_t survey_id) const {
    const auto survey = m_store.survey(SurveyId(survey_id));
    if (!survey) return {404, error_body(ErrorCode::UnknownSurvey, "no survey " + std::to_string(survey_id))};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& p : m_store.progress(survey->id))
        rows.push_back({{"annotator_id", p.annotator_id}, {"answered", p.answered}, {"total", p.total}});
    return {200, {{"survey_id", survey_id}, {"country", survey->country}, {"total", survey->questions.size()}, {"annotators", rows}}};
}

struct SurveyServer::Impl {
    SurveyStore& store;
    SurveyApi api;
    SurveyServerOptions options;
    httplib::Server http;
    std::thread thread;
    std::mutex mutex;  // serializes store access across handler threads
    int bound_port = -1;

    Impl(SurveyStore& s, SurveyServerOptions o) : store(s), api(s), options(std::move(o)) {}

    void send(httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    }

    void routes() {
        if (!options.allow_origin.empty()) {
            http.set_default_headers({{"Access-Control-Allow-Origin", options.allow_origin},
                                      {"Access-Control-Allow-Headers", "Content-Type"}});
            http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        }
        http.Get(R"(/api/surveys/(\d+)/annotators/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mutex);
            send(res, api.next(std::stoll(req.matches[1]), req.matches[2]));
        });
        http.Post(R"(/api/surveys/(\d+)/annotators/([^/]+)/responses)",
                  [this](const httplib::Request& req, httplib::Response& res) {
                      std::lock_guard lock(mutex);
                      send(res, api.respond(std::stoll(req.matches[1]), req.matches[2], req.body));
                  });
        http.Get(R"(/api/surveys/(\d+)/progress)", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mutex);
            send(res, api.progress(std::stoll(req.matches[1])));
        });
        http.Get(R"(/api/images/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(mutex);
            const ImageId id(std::stoll(req.matches[1]));
            if (!store.catalog().image(id)) {
                send(res, {404, error_body(ErrorCode::UnreadableImage, "no image " + req.matches[1].str())});
                return;
            }
            try {
                const auto bytes = store.catalog().load_bytes(id);
                const bool png = bytes.size() > 4 && bytes[0] == 0x89 && bytes[1] == 'P';
                const bool jpeg = bytes.size() > 2 && bytes[0] == 0xFF && bytes[1] == 0xD8;
                res.set_content(std::string(bytes.begin(), bytes.end()),
                                png ? "image/png" : jpeg ? "image/jpeg" : "application/octet-stream");
            } catch (const Error& e) {
                send(res, {404, error_body(e.code(), e.what())});
            }
        });
        http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) res.set_content(R"({"error":"NotFound"})", "application/json");
        });
    }

    void bind() {
        if (bound_port >= 0) return;
        if (options.port == 0) {
            bound_port = http.bind_to_any_port(options.host);
        } else {
            if (!http.bind_to_port(options.host, options.port))
                fail(ErrorCode::Io, "cannot bind " + options.host + ":" + std::to_string(options.port));
            bound_port = options.port;
        }
        if (bound_port < 0) fail(ErrorCode::Io, "cannot bind " + options.host);
    }
};

SurveyServer::SurveyServer(SurveyStore& store, SurveyServerOptions options)
    : m_impl(std::make_unique<Impl>(store, std::move(options))) {
    m_impl->routes();
}

SurveyServer::~SurveyServer() { stop(); }

int SurveyServer::start() {
    m_impl->bind();
    m_impl->thread = std::thread([this] { m_impl->http.listen_after_bind(); });
    m_impl->http.wait_until_ready();
    return m_impl->bound_port;
}

void SurveyServer::run() {
    m_impl->bind();
    m_impl->http.listen_after_bind();
}

void SurveyServer::stop() {
    m_impl->http.stop();
    if (m_impl->thread.joinable()) m_impl->thread.join();
}

int SurveyServer::port() const { return m_impl->bound_port; }

}  // namespace cultdiff
