// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "../test_support.hpp"
#include "cultdiff/pipeline.hpp"

using namespace cultdiff;
using cultdiff::testing::TempDir;
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json without_timestamp(nlohmann::json j) {
    j.erase("created_at");
    return j;
}

PipelineConfig fixture_config(const fs::path& dir) {
    write_fixture_workdir(dir);
    return PipelineConfig::load(dir / "pipeline.json");
}

std::ostringstream g_log;

RunOptions quiet() {
    RunOptions o;
    o.log = &g_log;
    return o;
}

}  // namespace

TEST(Pipeline, StagesParseAndDepend) {
    EXPECT_EQ(parse_stages("all").size(), 7u);
    const auto s = parse_stages("train,prompts");
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0], Stage::Prompts);
    EXPECT_EQ(s[1], Stage::Train);
    EXPECT_THROW(parse_stages("prompts,bogus"), Error);
    EXPECT_EQ(stage_dependencies(Stage::Train), std::vector<Stage>{Stage::Pairs});
    for (auto st : kAllStages)
        for (auto dep : stage_dependencies(st)) EXPECT_LT(dep, st);
}

TEST(Pipeline, ExitCodes) {
    EXPECT_EQ(exit_code_for(ErrorCode::ClientUnavailable), 3);
    EXPECT_EQ(exit_code_for(ErrorCode::QuotaExceeded), 3);
    EXPECT_EQ(exit_code_for(ErrorCode::GenerationRejected), 3);
    EXPECT_EQ(exit_code_for(ErrorCode::SchemaViolation), 2);
    EXPECT_EQ(exit_code_for(ErrorCode::StageDependency), 2);
}

TEST(Pipeline, ConfigDefaultsValidationAndRoundTrip) {
    PipelineConfig c;
    EXPECT_EQ(c.artifacts_per_cell, 50);
    EXPECT_EQ(c.references_per_artifact, 5);
    EXPECT_EQ(c.models, (std::vector<std::string>{"sdxl", "sd3m", "flux"}));
    EXPECT_EQ(c.split.train, 30);
    EXPECT_EQ(c.split.val, 10);
    EXPECT_EQ(c.split.test, 10);
    EXPECT_EQ(c.effective_countries().size(), 10u);
    EXPECT_NO_THROW(c.validate());

    c.split.train = 29;
    try {
        c.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    }
    c.split.train = 30;
    c.countries = {"XX"};
    EXPECT_THROW(c.validate(), Error);

    PipelineConfig d;
    d.countries = {"KR", "US"};
    d.seeds.split = 99;
    d.train.epochs = 3;
    d.annotations = "/data/a.csv";
    const auto back = PipelineConfig::from_json(d.to_json());
    EXPECT_EQ(back.to_json(), d.to_json());
    EXPECT_THROW(PipelineConfig::from_json({{"wrokdir", "x"}}), Error);
    EXPECT_THROW(PipelineConfig::from_json({{"split", {{"train", "many"}}}}), Error);
}

TEST(Pipeline, EnvironmentOverridesSecrets) {
    PipelineConfig c;
    c.generation.kind = "http";
    ::setenv("CULTDIFF_GENERATION_URL", "http://127.0.0.1:9/gen", 1);
    ::setenv("CULTDIFF_GENERATION_TOKEN", "sekrit", 1);
    c.apply_env();
    ::unsetenv("CULTDIFF_GENERATION_URL");
    ::unsetenv("CULTDIFF_GENERATION_TOKEN");
    EXPECT_EQ(c.generation.url, "http://127.0.0.1:9/gen");
    EXPECT_EQ(c.generation.token, "sekrit");
    EXPECT_EQ(c.to_json().dump().find("sekrit"), std::string::npos);
}

TEST(Pipeline, PromptsStageAlone) {
    TempDir tmp;
    const auto cfg = fixture_config(tmp.path);
    const auto r = run_pipeline(cfg, {Stage::Prompts}, quiet());
    ASSERT_TRUE(r.ok()) << r.message;
    const WorkdirLayout l{tmp.path};
    EXPECT_TRUE(fs::exists(l.manifest(Stage::Prompts)));
    for (auto s : kAllStages)
        if (s != Stage::Prompts) EXPECT_FALSE(fs::exists(l.manifest(s))) << to_string(s);
    EXPECT_EQ(read_json(l.manifest(Stage::Prompts))["outputs"]["rendered"], 48);
    EXPECT_FALSE(fs::exists(l.lock()));
}

TEST(Pipeline, PromptsFromArtifactsFile) {
    TempDir tmp;
    {
        Catalog src = Catalog::in_memory();
        src.register_artifact("US", Category::Architecture, "the Empire State Building");
        src.register_artifact("CN", Category::Clothing, "Hanfu");
        std::ofstream(tmp.path / "catalog.json") << src.export_manifest().dump();
    }
    PipelineConfig cfg;
    cfg.workdir = tmp.path / "run";
    cfg.artifacts = tmp.path / "catalog.json";
    const auto r = run_pipeline(cfg, {Stage::Prompts}, quiet());
    ASSERT_TRUE(r.ok()) << r.message;
    Catalog cat = Catalog::open(cfg.workdir);
    std::set<std::string> texts;
    for (const auto& p : cat.prompts()) texts.insert(p.text);
    EXPECT_TRUE(texts.count("A panoramic view of the Empire State Building in the United States, realistic"));
    EXPECT_TRUE(texts.count("An image of Hanfu from Chinese clothing, realistic"));
}

TEST(Pipeline, EmptyCatalogWithoutArtifactsIsAValidationFailure) {
    TempDir tmp;
    PipelineConfig cfg;
    cfg.workdir = tmp.path;
    const auto r = run_pipeline(cfg, {Stage::Prompts}, quiet());
    EXPECT_EQ(r.exit_code, 2);
    ASSERT_TRUE(r.failed_stage);
    EXPECT_EQ(*r.failed_stage, Stage::Prompts);
    EXPECT_TRUE(fs::exists(WorkdirLayout{tmp.path}.incomplete(Stage::Prompts)));
}

TEST(Pipeline, TrainWithoutPairsFailsFast) {
    TempDir tmp;
    const auto cfg = fixture_config(tmp.path);
    const auto r = run_pipeline(cfg, {Stage::Train}, quiet());
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.message.find("StageDependency"), std::string::npos);
    EXPECT_NE(r.message.find("'pairs'"), std::string::npos) << r.message;
    EXPECT_TRUE(r.stages.empty());
    EXPECT_FALSE(fs::exists(WorkdirLayout{tmp.path}.checkpoint_dir()));
}

TEST(Pipeline, RejectedGenerationExitsThreeAndKeepsPartialOutputs) {
    TempDir tmp;
    auto cfg = fixture_config(tmp.path);
    ASSERT_TRUE(run_pipeline(cfg, {Stage::Prompts}, quiet()).ok());
    cfg.models.push_back("extra");
    auto opts = quiet();
    StubGenerationClient rejecting(8);
    rejecting.reject_containing(" ");
    opts.generation_client = &rejecting;
    const auto r = run_pipeline(cfg, {Stage::Generate}, opts);
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.message.find("stage generate failed"), std::string::npos);
    EXPECT_NE(r.message.find("/extra"), std::string::npos) << r.message;
    const WorkdirLayout l{tmp.path};
    EXPECT_TRUE(fs::exists(l.incomplete(Stage::Generate)));
    EXPECT_FALSE(fs::exists(l.manifest(Stage::Generate)));
    EXPECT_NE(read_text(l.incomplete(Stage::Generate)).find("GenerationRejected"), std::string::npos);

    StubGenerationClient offline(8);
    offline.set_offline(true);
    opts.generation_client = &offline;
    EXPECT_EQ(run_pipeline(cfg, {Stage::Generate}, opts).exit_code, 3);

    StubGenerationClient gen(8);
    opts.generation_client = &gen;
    const auto ok = run_pipeline(cfg, {Stage::Generate}, opts);
    ASSERT_TRUE(ok.ok()) << ok.message;
    EXPECT_EQ(ok.stages[0].manifest["outputs"]["generated"], 48);
    EXPECT_FALSE(fs::exists(l.incomplete(Stage::Generate)));
}

TEST(Pipeline, LockExcludesConcurrentRuns) {
    TempDir tmp;
    const auto cfg = fixture_config(tmp.path);
    {
        WorkdirLock held(tmp.path);
        const auto r = run_pipeline(cfg, {Stage::Prompts}, quiet());
        EXPECT_EQ(r.exit_code, 2);
        EXPECT_NE(r.message.find("locked"), std::string::npos);
    }
    std::ofstream(tmp.path / ".lock") << "999999999\n";  // no such process
    EXPECT_TRUE(run_pipeline(cfg, {Stage::Prompts}, quiet()).ok());
}

TEST(Pipeline, FullFixtureRunIsIdempotentAndReproducible) {
    TempDir a, b;
    const auto ca = fixture_config(a.path);
    const auto cb = fixture_config(b.path);
    const auto all = parse_stages("all");

    const auto ra = run_pipeline(ca, all, quiet());
    ASSERT_TRUE(ra.ok()) << ra.message;
    ASSERT_EQ(ra.stages.size(), 7u);
    for (const auto& s : ra.stages) EXPECT_FALSE(s.skipped);
    const WorkdirLayout la{a.path}, lb{b.path};
    for (auto s : kAllStages) {
        const auto m = read_json(la.manifest(s));
        EXPECT_EQ(m["seeds"]["pipeline"]["survey"], 2026u) << to_string(s);
        EXPECT_TRUE(m["seeds"].contains("train"));
    }
    const auto eval = read_json(la.manifest(Stage::Eval));
    EXPECT_EQ(eval["outputs"]["pairs_scored"], 108);
    for (const char* f : {"scores.csv", "correlations.csv", "rankings_q1_1.csv", "aggregate_country.csv",
                          "aggregate_country.png"})
        EXPECT_TRUE(fs::exists(la.eval_dir() / f)) << f;
    EXPECT_GT(eval["outputs"]["spearman"]["cultdiff_s"].get<double>(), 0.5);

    const auto again = run_pipeline(ca, all, quiet());
    ASSERT_TRUE(again.ok());
    for (const auto& s : again.stages) EXPECT_TRUE(s.skipped) << to_string(s.stage);

    const auto rb = run_pipeline(cb, all, quiet());
    ASSERT_TRUE(rb.ok()) << rb.message;
    for (auto s : kAllStages)
        EXPECT_EQ(without_timestamp(read_json(la.manifest(s))).dump(), without_timestamp(read_json(lb.manifest(s))).dump())
            << to_string(s);
    EXPECT_EQ(read_text(la.eval_dir() / "scores.csv"), read_text(lb.eval_dir() / "scores.csv"));

    // A changed knob reruns its stage and everything downstream of it only.
    auto changed = ca;
    changed.eval_fid = false;
    const auto rc = run_pipeline(changed, all, quiet());
    ASSERT_TRUE(rc.ok());
    for (const auto& s : rc.stages) EXPECT_EQ(s.skipped, s.stage != Stage::Eval) << to_string(s.stage);

    // Deleting an output invalidates the stage.
    fs::remove(la.pairs_dir() / "val.jsonl");
    const auto rd = run_pipeline(ca, parse_stages("pairs"), quiet());
    ASSERT_TRUE(rd.ok());
    EXPECT_FALSE(rd.stages[0].skipped);
}
