// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "../test_support.hpp"
#include "cultdiff/error.hpp"
#include "cultdiff/genpipe.hpp"

using namespace cultdiff;
using cultdiff::testing::noise_png;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Io;
}

Artifact make(const std::string& country, Category c, const std::string& name) {
    Artifact a;
    a.country = country;
    a.category = c;
    a.name = name;
    return a;
}

}  // namespace

TEST(Prompts, GoldenStrings) {
    const auto table = default_demonym_table();
    EXPECT_EQ(render_prompt(make("US", Category::Architecture, "the Empire State Building"), table),
              "A panoramic view of the Empire State Building in the United States, realistic");
    EXPECT_EQ(render_prompt(make("CN", Category::Clothing, "Hanfu"), table),
              "An image of Hanfu from Chinese clothing, realistic");
    EXPECT_EQ(render_prompt(make("AZ", Category::Food, "plov"), table),
              "An image of plov from Azerbaijani cuisine, realistic");
}

TEST(Prompts, MissingDemonym) {
    auto table = default_demonym_table();
    table["KR"].demonym.clear();
    EXPECT_EQ(code_of([&] { render_prompt(make("KR", Category::Food, "kimchi"), table); }), ErrorCode::MissingDemonym);
    // Architecture only needs the country name.
    EXPECT_EQ(render_prompt(make("KR", Category::Architecture, "Gyeongbokgung"), table),
              "A panoramic view of Gyeongbokgung in South Korea, realistic");
    table.erase("KR");
    EXPECT_EQ(code_of([&] { render_prompt(make("KR", Category::Architecture, "x"), table); }),
              ErrorCode::MissingDemonym);
}

TEST(Prompts, TableIsConfigurable) {
    const auto table = load_demonym_table(nlohmann::json::parse(R"({"KR": {"demonym": "South Korean"}})"));
    EXPECT_EQ(table.at("KR").demonym, "South Korean");
    EXPECT_EQ(table.at("KR").country, "South Korea");
    EXPECT_EQ(load_demonym_table(to_json(table), {}), table);
}

TEST(Prompts, RenderAllStoresPrompts) {
    auto cat = Catalog::in_memory();
    const auto id = cat.register_artifact("CN", Category::Clothing, "Hanfu");
    EXPECT_EQ(render_all_prompts(cat, default_demonym_table()), 1u);
    const auto p = cat.prompt_for(id);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->text, "An image of Hanfu from Chinese clothing, realistic");
    EXPECT_EQ(p->template_version, kPromptTemplateVersion);
    // Deterministic on rerender.
    render_all_prompts(cat, default_demonym_table());
    EXPECT_EQ(cat.prompt_for(id)->id, p->id);
    EXPECT_EQ(cat.prompts().size(), 1u);
}

TEST(Collect, StubWithEnoughFixtures) {
    auto cat = Catalog::in_memory();
    const auto ft = cat.register_artifact("AZ", Category::Architecture, "the Flame Towers");
    StubSearchClient client;
    for (int i = 0; i < 7; ++i) client.add_fixture("", noise_png(i));
    const auto r = fetch_reference_images(cat, ft, client, 5);
    EXPECT_EQ(r.records.size(), 5u);
    EXPECT_FALSE(r.warning);
    for (const auto& rec : r.records) EXPECT_EQ(rec.source, ImageSource::Real);
}

TEST(Collect, ShortfallIsWarning) {
    auto cat = Catalog::in_memory();
    const auto ft = cat.register_artifact("AZ", Category::Architecture, "the Flame Towers");
    StubSearchClient client;
    for (int i = 0; i < 3; ++i) client.add_fixture("the Flame Towers", noise_png(i));
    client.add_fixture("the Flame Towers", {1, 2, 3});  // undecodable, skipped
    const auto r = fetch_reference_images(cat, ft, client, 5);
    EXPECT_EQ(r.records.size(), 3u);
    EXPECT_EQ(r.skipped_undecodable, 1u);
    ASSERT_TRUE(r.warning);
}

TEST(Collect, ClientFailuresPropagate) {
    auto cat = Catalog::in_memory();
    const auto ft = cat.register_artifact("AZ", Category::Architecture, "the Flame Towers");
    StubSearchClient client;
    client.set_offline(true);
    EXPECT_EQ(code_of([&] { fetch_reference_images(cat, ft, client, 5); }), ErrorCode::ClientUnavailable);
    client.set_offline(false);
    client.set_quota(0);
    EXPECT_EQ(code_of([&] { collect_all(cat, client, 5, 4); }), ErrorCode::QuotaExceeded);
}

TEST(Generate, StubIsDeterministic) {
    auto cat = Catalog::in_memory();
    const auto h = cat.register_artifact("CN", Category::Clothing, "Hanfu");
    render_all_prompts(cat, default_demonym_table());
    const auto p = *cat.prompt_for(h);
    StubGenerationClient client;
    GenerationRequest req{p.id, p.text, "sdxl", 1, 1024, 1024};
    const auto a = generate_image(cat, h, req, client);
    const auto b = generate_image(cat, h, req, client);
    EXPECT_EQ(a.checksum, b.checksum);
    EXPECT_EQ(a.model_id, "sdxl");
    EXPECT_EQ(a.seed, 1);
    EXPECT_EQ(a.prompt_id, p.id);
    req.seed = 2;
    EXPECT_NE(generate_image(cat, h, req, client).checksum, a.checksum);
}

TEST(Generate, UnknownModelFailsBeforeCall) {
    auto cat = Catalog::in_memory();
    const auto h = cat.register_artifact("CN", Category::Clothing, "Hanfu");
    StubGenerationClient client;
    GenerationRequest req{0, "x", "dalle9", 1};
    EXPECT_EQ(code_of([&] { generate_image(cat, h, req, client); }), ErrorCode::UnknownModel);
    EXPECT_EQ(client.calls(), 0);
}

TEST(Generate, RejectionAndOffline) {
    auto cat = Catalog::in_memory();
    const auto h = cat.register_artifact("CN", Category::Clothing, "Hanfu");
    StubGenerationClient client;
    client.reject_containing("Hanfu");
    GenerationRequest req{0, "An image of Hanfu", "flux", 1};
    EXPECT_EQ(code_of([&] { generate_image(cat, h, req, client); }), ErrorCode::GenerationRejected);
    client.set_offline(true);
    EXPECT_EQ(code_of([&] { generate_image(cat, h, req, client); }), ErrorCode::ClientUnavailable);
}

TEST(Generate, FullCellCount) {
    auto cat = Catalog::in_memory();
    cat.batch([&] {
        for (int i = 0; i < 50; ++i) cat.register_artifact("KR", Category::Food, "dish " + std::to_string(i));
    });
    render_all_prompts(cat, default_demonym_table());
    StubGenerationClient client(4);
    GenerationPlan plan;
    plan.parallelism = 4;
    const auto s = generate_all(cat, client, plan);
    EXPECT_EQ(s.generated, 150u);
    EXPECT_TRUE(s.failures.empty());
    std::size_t gen = 0;
    for (const auto& r : cat.images()) gen += r.source == ImageSource::Generated;
    EXPECT_EQ(gen, 150u);
    // Every generated record traces to its artifact's prompt.
    for (const auto& r : cat.images()) EXPECT_EQ(r.prompt_id, cat.prompt_for(r.artifact_id)->id);
    // Rerun skips existing.
    const auto again = generate_all(cat, client, plan);
    EXPECT_EQ(again.generated, 0u);
    EXPECT_EQ(again.skipped, 150u);
}

TEST(Generate, RequiresPrompts) {
    auto cat = Catalog::in_memory();
    cat.register_artifact("KR", Category::Food, "kimchi");
    StubGenerationClient client;
    EXPECT_EQ(code_of([&] { generate_all(cat, client, {}); }), ErrorCode::StageDependency);
}

TEST(Http, EndpointParsing) {
    const auto ep = HttpEndpoint::parse("http://127.0.0.1:9000/v1/generate");
    EXPECT_EQ(ep.base_url, "http://127.0.0.1:9000");
    EXPECT_EQ(ep.path, "/v1/generate");
    EXPECT_EQ(HttpEndpoint::parse("https://example.org").path, "/");
    EXPECT_THROW(HttpEndpoint::parse("example.org"), Error);
}

TEST(Http, AdaptersTalkToServer) {
    httplib::Server svr;
    nlohmann::json last;
    const auto png = noise_png(42);
    svr.Post("/gen", [&](const httplib::Request& req, httplib::Response& res) {
        last = nlohmann::json::parse(req.body);
        if (last["prompt"] == "blocked") {
            res.status = 400;
            res.set_content("content policy", "text/plain");
            return;
        }
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    });
    svr.Get("/search", [&](const httplib::Request& req, httplib::Response& res) {
        const int k = std::stoi(req.get_param_value("k"));
        nlohmann::json body{{"images", nlohmann::json::array()}};
        for (int i = 0; i < std::min(k, 2); ++i) body["images"].push_back(base64_encode(png));
        res.set_content(body.dump(), "application/json");
    });
    const int port = svr.bind_to_any_port("127.0.0.1");
    std::thread th([&] { svr.listen_after_bind(); });
    svr.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    HttpGenerationClient gen(HttpEndpoint::parse(base + "/gen"));
    GenerationRequest req{3, "An image of plov", "sd3m", 9, 1024, 1024};
    EXPECT_EQ(gen.generate(req), png);
    EXPECT_EQ(last["model_id"], "sd3m");
    EXPECT_EQ(last["seed"], 9);
    EXPECT_EQ(last["width"], 1024);
    req.prompt = "blocked";
    EXPECT_EQ(code_of([&] { gen.generate(req); }), ErrorCode::GenerationRejected);

    HttpSearchClient search(HttpEndpoint::parse(base + "/search"));
    const auto imgs = search.search("plov", 5);
    ASSERT_EQ(imgs.size(), 2u);
    EXPECT_EQ(imgs[0], png);

    svr.stop();
    th.join();

    HttpGenerationClient dead(HttpEndpoint::parse(base + "/gen"));
    EXPECT_EQ(code_of([&] { dead.generate(req); }), ErrorCode::ClientUnavailable);
}
