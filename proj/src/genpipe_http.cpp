// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include "cultdiff/error.hpp"
#include "cultdiff/genpipe.hpp"

namespace cultdiff {

namespace {

httplib::Client make_client(const HttpEndpoint& ep) {
    httplib::Client cli(ep.base_url);
    cli.set_connection_timeout(ep.timeout_seconds, 0);
    cli.set_read_timeout(ep.timeout_seconds, 0);
    cli.set_write_timeout(ep.timeout_seconds, 0);
    if (!ep.token.empty()) cli.set_bearer_token_auth(ep.token);
    return cli;
}

[[noreturn]] void fail_status(const httplib::Result& res, const std::string& what) {
    if (!res) fail(ErrorCode::ClientUnavailable, what + ": " + httplib::to_string(res.error()));
    const std::string detail = what + " returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (res->status == 429) fail(ErrorCode::QuotaExceeded, detail);
    if (res->status == 400 || res->status == 403 || res->status == 451) fail(ErrorCode::GenerationRejected, detail);
    fail(ErrorCode::ClientUnavailable, detail);
}

}  // namespace

std::vector<std::vector<std::uint8_t>> HttpSearchClient::search(const std::string& query, int k) {
    auto cli = make_client(m_endpoint);
    httplib::Params params{{"q", query}, {"k", std::to_string(k)}};
    const auto res = cli.Get(m_endpoint.path, params, httplib::Headers{});
    if (!res || res->status != 200) fail_status(res, "search");
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ClientUnavailable, std::string("search response is not JSON: ") + e.what());
    }
    std::vector<std::vector<std::uint8_t>> out;
    for (const auto& img : body.value("images", nlohmann::json::array())) out.push_back(base64_decode(img.get<std::string>()));
    return out;
}

std::vector<std::uint8_t> HttpGenerationClient::generate(const GenerationRequest& request) {
    auto cli = make_client(m_endpoint);
    const nlohmann::json body{{"prompt", request.prompt},
                              {"model_id", request.model_id},
                              {"seed", request.seed},
                              {"width", request.width},
                              {"height", request.height}};
    const auto res = cli.Post(m_endpoint.path, body.dump(), "application/json");
    if (!res || res->status != 200) fail_status(res, "generation");
    return {res->body.begin(), res->body.end()};
}

}  // namespace cultdiff
