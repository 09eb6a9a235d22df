// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "cultdiff/survey.hpp"

namespace cultdiff {

/// Status and JSON body of one API call; the HTTP layer only forwards these.
struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Transport-independent survey API, shared by the HTTP server and tests.
class SurveyApi {
public:
    explicit SurveyApi(SurveyStore& store) : m_store(store) {}

    /// 200 with the next question (or {"complete": true}); 404 for an unknown survey or annotator.
    ApiResponse next(std::int64_t survey_id, const std::string& annotator_id) const;
    /// 201 with the stored record and progress; 422 schema or Likert errors; 409 duplicates;
    /// 404 unknown survey or annotator.
    ApiResponse respond(std::int64_t survey_id, const std::string& annotator_id, const std::string& body);
    ApiResponse progress(std::int64_t survey_id) const;

    /// Error code to HTTP status.
    static int status_for(ErrorCode code);

private:
    SurveyStore& m_store;
};

struct SurveyServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    /// Value of Access-Control-Allow-Origin; empty disables the header.
    std::string allow_origin = "*";
};

/// HTTP JSON service:
///   GET  /api/surveys/{sid}/annotators/{aid}/next
///   POST /api/surveys/{sid}/annotators/{aid}/responses
///   GET  /api/surveys/{sid}/progress
///   GET  /api/images/{id}
class SurveyServer {
public:
    SurveyServer(SurveyStore& store, SurveyServerOptions options = {});
    ~SurveyServer();
    SurveyServer(const SurveyServer&) = delete;
    SurveyServer& operator=(const SurveyServer&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
};

}  // namespace cultdiff
