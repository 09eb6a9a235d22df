// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cultdiff/catalog.hpp"

namespace cultdiff {

inline constexpr const char* kPromptTemplateVersion = "v1";

/// How a country is written inside prompts.
struct CountryLexicon {
    std::string country;  // e.g. "the United States"
    std::string demonym;  // e.g. "American"; empty when unknown

    bool operator==(const CountryLexicon&) const = default;
};

/// Keyed by country code. Shipped as editable configuration.
using DemonymTable = std::map<std::string, CountryLexicon>;

DemonymTable default_demonym_table();
/// Accepts {"KR": {"country": "...", "demonym": "..."}, ...}; entries override the defaults.
DemonymTable load_demonym_table(const nlohmann::json& j, DemonymTable base = default_demonym_table());
nlohmann::json to_json(const DemonymTable& table);

/// Instantiates the category template. Throws Error(MissingDemonym).
std::string render_prompt(const Artifact& artifact, const DemonymTable& table);

/// Renders and stores a prompt for every artifact. Returns the number rendered.
std::size_t render_all_prompts(Catalog& catalog, const DemonymTable& table);

// ---- external clients ---------------------------------------------------------------

struct GenerationRequest {
    std::int64_t prompt_id = 0;
    std::string prompt;
    std::string model_id;
    std::int64_t seed = 0;
    int width = 1024;
    int height = 1024;
};

class SearchClient {
public:
    virtual ~SearchClient() = default;
    /// Up to `k` encoded images for the query. Throws ClientUnavailable or QuotaExceeded.
    virtual std::vector<std::vector<std::uint8_t>> search(const std::string& query, int k) = 0;
};

class GenerationClient {
public:
    virtual ~GenerationClient() = default;
    /// One encoded image. Throws ClientUnavailable, QuotaExceeded or GenerationRejected.
    virtual std::vector<std::uint8_t> generate(const GenerationRequest& request) = 0;
};

/// Offline search backed by in-memory fixtures keyed by query.
class StubSearchClient final : public SearchClient {
public:
    void add_fixture(const std::string& query, std::vector<std::uint8_t> image);
    void set_offline(bool offline) { m_offline = offline; }
    /// Number of calls allowed before QuotaExceeded; unlimited when unset.
    void set_quota(std::optional<int> calls) { m_quota = calls; }
    int calls() const {
        std::lock_guard lock(m_mutex);
        return m_calls;
    }

    std::vector<std::vector<std::uint8_t>> search(const std::string& query, int k) override;

private:
    std::map<std::string, std::vector<std::vector<std::uint8_t>>> m_fixtures;
    bool m_offline = false;
    std::optional<int> m_quota;
    int m_calls = 0;
    mutable std::mutex m_mutex;
};

/// Offline generator: a deterministic image derived from (prompt, model, seed).
class StubGenerationClient final : public GenerationClient {
public:
    explicit StubGenerationClient(int size = 16) : m_size(size) {}
    void set_offline(bool offline) { m_offline = offline; }
    /// Prompts containing this substring are rejected as by a content filter.
    void reject_containing(std::string needle) { m_reject.push_back(std::move(needle)); }
    int calls() const { return m_calls.load(); }

    std::vector<std::uint8_t> generate(const GenerationRequest& request) override;

private:
    int m_size;
    bool m_offline = false;
    std::vector<std::string> m_reject;
    std::atomic<int> m_calls{0};
};

struct HttpEndpoint {
    std::string base_url;  // scheme://host[:port]
    std::string path = "/";
    std::string token;     // sent as "Authorization: Bearer <token>" when nonempty
    int timeout_seconds = 120;

    /// Reads <PREFIX>_URL (full URL) and <PREFIX>_TOKEN. Nullopt when the URL is unset.
    static std::optional<HttpEndpoint> from_env(const std::string& prefix);
    static HttpEndpoint parse(const std::string& url);
};

/// GET <path>?q=<query>&k=<k> returning {"images": ["<base64>", ...]}.
class HttpSearchClient final : public SearchClient {
public:
    explicit HttpSearchClient(HttpEndpoint endpoint) : m_endpoint(std::move(endpoint)) {}
    std::vector<std::vector<std::uint8_t>> search(const std::string& query, int k) override;

private:
    HttpEndpoint m_endpoint;
};

/// POST {prompt, model_id, seed, width, height} returning the image bytes.
class HttpGenerationClient final : public GenerationClient {
public:
    explicit HttpGenerationClient(HttpEndpoint endpoint) : m_endpoint(std::move(endpoint)) {}
    std::vector<std::uint8_t> generate(const GenerationRequest& request) override;

private:
    HttpEndpoint m_endpoint;
};

// ---- collection and generation ------------------------------------------------------

struct FetchResult {
    std::vector<ImageRecord> records;
    std::size_t skipped_undecodable = 0;
    std::optional<std::string> warning;  // set on shortfall
};

/// Queries the search client with the artifact's prompt (or name) and registers up to k images.
FetchResult fetch_reference_images(Catalog& catalog, ArtifactId artifact, SearchClient& client, int k = 5);

/// Registers one generated image. Throws Error(UnknownModel) before contacting the client.
ImageRecord generate_image(Catalog& catalog, ArtifactId artifact, const GenerationRequest& request,
                           GenerationClient& client, const std::vector<std::string>& models = default_models());

struct GenerationPlan {
    std::vector<std::string> models = default_models();
    std::int64_t seed_base = 0;
    int width = 1024;
    int height = 1024;
    int parallelism = 4;
    bool skip_existing = true;
};

struct GenerationSummary {
    std::size_t generated = 0;
    std::size_t skipped = 0;
    std::vector<std::string> failures;  // "artifact/model: reason"
};

/// Generates every (artifact, model) image that is missing. Requires rendered prompts.
/// Client calls run on at most plan.parallelism threads; registration is serialized.
GenerationSummary generate_all(Catalog& catalog, GenerationClient& client, const GenerationPlan& plan,
                               const std::vector<ArtifactId>& artifacts = {});

struct CollectionSummary {
    std::size_t registered = 0;
    std::vector<std::string> warnings;
};

CollectionSummary collect_all(Catalog& catalog, SearchClient& client, int k = 5, int parallelism = 4);

}  // namespace cultdiff
