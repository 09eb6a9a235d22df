// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <gtest/gtest.h>

#include "../test_support.hpp"
#include "cultdiff/survey_server.hpp"

using namespace cultdiff;

namespace {

std::string answer(std::int64_t qid, int q3 = 3) {
    nlohmann::json j{{"question_id", qid}, {"q1", {4, 4, 3, 5}}, {"q2", 2}, {"inappropriate", false}};
    if (q3 > 0) j["q3"] = q3;
    return j.dump();
}

struct ApiFixture : ::testing::Test {
    Catalog catalog = Catalog::in_memory();
    std::unique_ptr<SurveyStore> store;
    Survey survey;

    void SetUp() override {
        cultdiff::testing::populate(catalog, "KR", 2, 5);
        store = std::make_unique<SurveyStore>(catalog);
        SurveyOptions o;
        o.artifacts_per_category = 2;
        survey = store->build_survey("KR", 7, o);
        store->register_annotator(survey.id, "ann-1");
    }
};

}  // namespace

TEST_F(ApiFixture, FreshAnnotatorGetsFirstQuestion) {
    SurveyApi api(*store);
    const auto r = api.next(survey.id.value, "ann-1");
    ASSERT_EQ(r.status, 200);
    EXPECT_FALSE(r.body["complete"].get<bool>());
    EXPECT_EQ(r.body["position"], 0);
    EXPECT_EQ(r.body["question_id"], survey.questions[0].id.value);
    EXPECT_EQ(r.body["total"], survey.questions.size());
    EXPECT_EQ(r.body["image_urls"]["references"].size(), 3u);
    EXPECT_EQ(r.body["image_urls"]["candidate"],
              "/api/images/" + std::to_string(survey.questions[0].generated_image_id.value));
    ASSERT_EQ(r.body["questions"].size(), 6u);
    EXPECT_EQ(r.body["questions"][5]["scale"].size(), 5u);
}

TEST_F(ApiFixture, RespondPersistsAndAdvances) {
    SurveyApi api(*store);
    const auto qid = survey.questions[0].id.value;
    const auto r = api.respond(survey.id.value, "ann-1", answer(qid));
    ASSERT_EQ(r.status, 201) << r.body.dump();
    EXPECT_EQ(r.body["answered"], 1);
    EXPECT_EQ(store->annotations(survey.id).size(), 1u);
    EXPECT_EQ(api.next(survey.id.value, "ann-1").body["position"], 1);
    const auto p = api.progress(survey.id.value);
    EXPECT_EQ(p.body["annotators"][0]["answered"], 1);

    EXPECT_EQ(api.respond(survey.id.value, "ann-1", answer(qid)).status, 409);
    EXPECT_EQ(store->annotations(survey.id).size(), 1u);
}

TEST_F(ApiFixture, InvalidBodiesAreRejectedWithoutSideEffects) {
    SurveyApi api(*store);
    const auto qid = survey.questions[0].id.value;
    EXPECT_EQ(api.respond(survey.id.value, "ann-1", answer(qid, 0)).status, 422);
    EXPECT_EQ(api.respond(survey.id.value, "ann-1", answer(qid, 6)).status, 422);
    EXPECT_EQ(api.respond(survey.id.value, "ann-1", "{not json").status, 422);
    EXPECT_EQ(api.respond(survey.id.value, "ann-1", R"({"question_id":1,"q1":[1,2]})").status, 422);
    EXPECT_EQ(api.respond(survey.id.value, "ann-1", answer(999999)).status, 422);
    EXPECT_TRUE(store->annotations(survey.id).empty());
    EXPECT_EQ(api.next(survey.id.value, "ann-1").body["position"], 0);
}

TEST_F(ApiFixture, UnknownSurveyOrAnnotatorIs404) {
    SurveyApi api(*store);
    EXPECT_EQ(api.next(survey.id.value + 50, "ann-1").status, 404);
    EXPECT_EQ(api.next(survey.id.value, "stranger").status, 404);
    EXPECT_EQ(api.respond(survey.id.value, "stranger", answer(survey.questions[0].id.value)).status, 404);
    EXPECT_EQ(api.progress(survey.id.value + 50).status, 404);
}

TEST_F(ApiFixture, CompletesAfterLastQuestion) {
    SurveyApi api(*store);
    for (const auto& q : survey.questions) ASSERT_EQ(api.respond(survey.id.value, "ann-1", answer(q.id.value)).status, 201);
    const auto r = api.next(survey.id.value, "ann-1");
    EXPECT_TRUE(r.body["complete"].get<bool>());
    EXPECT_EQ(r.body["answered"], survey.questions.size());
}

TEST_F(ApiFixture, LiveServerRoundTrip) {
    SurveyServerOptions o;
    o.port = 0;
    SurveyServer server(*store, o);
    const int port = server.start();
    ASSERT_GT(port, 0);
    httplib::Client client("127.0.0.1", port);
    const std::string base = "/api/surveys/" + std::to_string(survey.id.value) + "/annotators/ann-1";

    auto got = client.Get(base + "/next");
    ASSERT_TRUE(got);
    EXPECT_EQ(got->status, 200);
    EXPECT_EQ(got->get_header_value("Access-Control-Allow-Origin"), "*");
    const auto q = nlohmann::json::parse(got->body);

    auto img = client.Get(q["image_urls"]["candidate"].get<std::string>());
    ASSERT_TRUE(img);
    EXPECT_EQ(img->status, 200);
    EXPECT_EQ(img->body.size(), catalog.load_bytes(survey.questions[0].generated_image_id).size());
    EXPECT_EQ(client.Get("/api/images/987654")->status, 404);

    auto posted = client.Post(base + "/responses", answer(q["question_id"].get<std::int64_t>()), "application/json");
    ASSERT_TRUE(posted);
    EXPECT_EQ(posted->status, 201);
    auto dup = client.Post(base + "/responses", answer(q["question_id"].get<std::int64_t>()), "application/json");
    EXPECT_EQ(dup->status, 409);
    auto prog = client.Get("/api/surveys/" + std::to_string(survey.id.value) + "/progress");
    EXPECT_EQ(nlohmann::json::parse(prog->body)["annotators"][0]["answered"], 1);
    EXPECT_EQ(client.Get("/api/nothing")->status, 404);
    server.stop();
}
