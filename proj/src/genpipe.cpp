// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "cultdiff/genpipe.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>

#include "cultdiff/error.hpp"
#include "cultdiff/parallel.hpp"
#include "cultdiff/rng.hpp"

namespace cultdiff {

DemonymTable default_demonym_table() {
    return {
        {"AZ", {"Azerbaijan", "Azerbaijani"}},   {"CN", {"China", "Chinese"}},
        {"ET", {"Ethiopia", "Ethiopian"}},       {"ID", {"Indonesia", "Indonesian"}},
        {"MX", {"Mexico", "Mexican"}},           {"PK", {"Pakistan", "Pakistani"}},
        {"KR", {"South Korea", "Korean"}},       {"ES", {"Spain", "Spanish"}},
        {"GB", {"the United Kingdom", "British"}}, {"US", {"the United States", "American"}},
    };
}

DemonymTable load_demonym_table(const nlohmann::json& j, DemonymTable base) {
    if (!j.is_object()) fail(ErrorCode::InvalidConfig, "demonym table must be a JSON object");
    for (const auto& [code, entry] : j.items()) {
        auto& e = base[code];
        if (entry.contains("country")) e.country = entry.at("country").get<std::string>();
        if (entry.contains("demonym")) e.demonym = entry.at("demonym").get<std::string>();
    }
    return base;
}

nlohmann::json to_json(const DemonymTable& table) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [code, e] : table) j[code] = {{"country", e.country}, {"demonym", e.demonym}};
    return j;
}

std::string render_prompt(const Artifact& artifact, const DemonymTable& table) {
    const auto it = table.find(artifact.country);
    switch (artifact.category) {
    case Category::Architecture:
        if (it == table.end() || it->second.country.empty())
            fail(ErrorCode::MissingDemonym, "no prompt name for country " + artifact.country);
        return "A panoramic view of " + artifact.name + " in " + it->second.country + ", realistic";
    case Category::Clothing:
    case Category::Food: {
        if (it == table.end() || it->second.demonym.empty())
            fail(ErrorCode::MissingDemonym, "no demonym for country " + artifact.country);
        const char* noun = artifact.category == Category::Clothing ? " clothing" : " cuisine";
        return "An image of " + artifact.name + " from " + it->second.demonym + noun + ", realistic";
    }
    }
    fail(ErrorCode::InvalidConfig, "unhandled category");
}

std::size_t render_all_prompts(Catalog& catalog, const DemonymTable& table) {
    std::size_t n = 0;
    catalog.batch([&] {
        for (const auto& a : catalog.artifacts()) {
            catalog.upsert_prompt(a.id, render_prompt(a, table), kPromptTemplateVersion);
            ++n;
        }
    });
    return n;
}

// ---- stubs ----------------------------------------------------------------------------

void StubSearchClient::add_fixture(const std::string& query, std::vector<std::uint8_t> image) {
    std::lock_guard lock(m_mutex);
    m_fixtures[query].push_back(std::move(image));
}

std::vector<std::vector<std::uint8_t>> StubSearchClient::search(const std::string& query, int k) {
    std::lock_guard lock(m_mutex);
    if (m_offline) fail(ErrorCode::ClientUnavailable, "search client is offline");
    if (m_quota && m_calls >= *m_quota) fail(ErrorCode::QuotaExceeded, "search quota of " + std::to_string(*m_quota) + " calls used");
    ++m_calls;
    auto it = m_fixtures.find(query);
    if (it == m_fixtures.end()) it = m_fixtures.find("");
    if (it == m_fixtures.end()) return {};
    const auto n = std::min<std::size_t>(it->second.size(), static_cast<std::size_t>(std::max(k, 0)));
    return {it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<std::uint8_t> StubGenerationClient::generate(const GenerationRequest& request) {
    if (m_offline) fail(ErrorCode::ClientUnavailable, "generation client is offline");
    for (const auto& needle : m_reject)
        if (request.prompt.find(needle) != std::string::npos)
            fail(ErrorCode::GenerationRejected, "content filter rejected prompt: " + request.prompt);
    ++m_calls;
    std::uint64_t h = std::hash<std::string>{}(request.prompt);
    h = Rng::mix(h ^ std::hash<std::string>{}(request.model_id));
    h = Rng::mix(h ^ static_cast<std::uint64_t>(request.seed));
    Rng rng(h);
    const float base[3] = {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                           static_cast<float>(rng.uniform())};
    Image img(m_size, m_size);
    for (int y = 0; y < m_size; ++y)
        for (int x = 0; x < m_size; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = base[c] + 0.25f * static_cast<float>(rng.uniform() - 0.5);
                img.at(x, y, c) = std::clamp(v, 0.0f, 1.0f);
            }
    return encode_png(img);
}

std::optional<HttpEndpoint> HttpEndpoint::from_env(const std::string& prefix) {
    const char* url = std::getenv((prefix + "_URL").c_str());
    if (!url || !*url) return std::nullopt;
    auto ep = parse(url);
    if (const char* tok = std::getenv((prefix + "_TOKEN").c_str())) ep.token = tok;
    return ep;
}

HttpEndpoint HttpEndpoint::parse(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(ErrorCode::InvalidConfig, "endpoint '" + url + "' has no scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    HttpEndpoint ep;
    ep.base_url = url.substr(0, path_start);
    ep.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    return ep;
}

// ---- collection and generation ------------------------------------------------------

FetchResult fetch_reference_images(Catalog& catalog, ArtifactId artifact, SearchClient& client, int k) {
    if (k < 1) fail(ErrorCode::InvalidConfig, "k must be at least 1");
    const auto a = catalog.artifact(artifact);
    if (!a) fail(ErrorCode::MissingArtifact, "artifact " + std::to_string(artifact.value));
    const auto prompt = catalog.prompt_for(artifact);
    const std::string query = prompt ? prompt->text : a->name;

    FetchResult result;
    for (const auto& bytes : client.search(query, k)) {
        if (static_cast<int>(result.records.size()) >= k) break;
        try {
            const auto id = catalog.register_image_bytes(artifact, ImageSource::Real, bytes);
            result.records.push_back(*catalog.image(id));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UnreadableImage) throw;
            ++result.skipped_undecodable;
        }
    }
    if (static_cast<int>(result.records.size()) < k)
        result.warning = "artifact " + std::to_string(artifact.value) + " (" + a->name + "): " +
                         std::to_string(result.records.size()) + " of " + std::to_string(k) + " reference images";
    return result;
}

ImageRecord generate_image(Catalog& catalog, ArtifactId artifact, const GenerationRequest& request,
                           GenerationClient& client, const std::vector<std::string>& models) {
    if (std::find(models.begin(), models.end(), request.model_id) == models.end())
        fail(ErrorCode::UnknownModel, "model '" + request.model_id + "' is not configured");
    if (!catalog.artifact(artifact)) fail(ErrorCode::MissingArtifact, "artifact " + std::to_string(artifact.value));
    const auto bytes = client.generate(request);
    const auto id = catalog.register_image_bytes(artifact, ImageSource::Generated, bytes, request.model_id,
                                                 request.seed,
                                                 request.prompt_id ? std::optional(request.prompt_id) : std::nullopt);
    return *catalog.image(id);
}

GenerationSummary generate_all(Catalog& catalog, GenerationClient& client, const GenerationPlan& plan,
                               const std::vector<ArtifactId>& artifacts) {
    for (const auto& m : plan.models)
        if (m.empty()) fail(ErrorCode::UnknownModel, "empty model id");
    std::vector<Artifact> targets;
    if (artifacts.empty()) {
        targets = catalog.artifacts();
    } else {
        for (auto id : artifacts)
            if (auto a = catalog.artifact(id)) targets.push_back(*a);
    }

    struct Task {
        Artifact artifact;
        GenerationRequest request;
    };
    std::vector<Task> tasks;
    GenerationSummary summary;
    for (const auto& a : targets) {
        const auto prompt = catalog.prompt_for(a.id);
        if (!prompt) fail(ErrorCode::StageDependency, "artifact " + std::to_string(a.id.value) + " has no rendered prompt");
        std::set<std::string> have;
        for (const auto& r : catalog.images_of(a.id, ImageSource::Generated)) have.insert(*r.model_id);
        for (const auto& m : plan.models) {
            if (plan.skip_existing && have.count(m)) {
                ++summary.skipped;
                continue;
            }
            GenerationRequest req{prompt->id, prompt->text, m, plan.seed_base + a.id.value, plan.width, plan.height};
            tasks.push_back({a, std::move(req)});
        }
    }

    std::mutex mu;
    parallel_for(tasks.size(), plan.parallelism, [&](std::size_t i) {
        const auto& t = tasks[i];
        try {
            generate_image(catalog, t.artifact.id, t.request, client, plan.models);
            std::lock_guard lock(mu);
            ++summary.generated;
        } catch (const Error& e) {
            // A rejected prompt is recorded; an unreachable or exhausted client aborts the run.
            if (e.code() != ErrorCode::GenerationRejected) throw;
            std::lock_guard lock(mu);
            summary.failures.push_back(t.artifact.name + "/" + t.request.model_id + ": " + e.what());
        }
    });
    std::sort(summary.failures.begin(), summary.failures.end());
    return summary;
}

CollectionSummary collect_all(Catalog& catalog, SearchClient& client, int k, int parallelism) {
    const auto artifacts = catalog.artifacts();
    std::vector<std::optional<FetchResult>> results(artifacts.size());
    parallel_for(artifacts.size(), parallelism, [&](std::size_t i) {
        const auto have = catalog.images_of(artifacts[i].id, ImageSource::Real).size();
        if (static_cast<int>(have) >= k) return;
        results[i] = fetch_reference_images(catalog, artifacts[i].id, client, k - static_cast<int>(have));
    });
    CollectionSummary summary;
    for (const auto& r : results) {
        if (!r) continue;
        summary.registered += r->records.size();
        if (r->warning) summary.warnings.push_back(*r->warning);
    }
    return summary;
}

}  // namespace cultdiff
