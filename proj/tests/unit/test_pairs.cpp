// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "../test_support.hpp"
#include "cultdiff/error.hpp"
#include "cultdiff/pairs.hpp"

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

AnnotatedImage annotated(std::vector<std::array<int, 4>> answers) {
    AnnotatedImage img;
    img.generated = ImageId(100);
    img.artifact = ArtifactId(1);
    img.model_id = "sdxl";
    img.question = QuestionId(5);
    img.references = {ImageId(1), ImageId(2), ImageId(3)};
    img.q1_answers = std::move(answers);
    return img;
}

}  // namespace

TEST(Pairs, NormalizeScore) {
    EXPECT_EQ(normalize_score(1.0), 0.0);
    EXPECT_EQ(normalize_score(5.0), 1.0);
    EXPECT_EQ(normalize_score(3.0), 0.5);
    EXPECT_EQ(normalize_score(2.75), 0.4375);
    EXPECT_EQ(code_of([] { normalize_score(0.99); }), ErrorCode::OutOfRange);
    EXPECT_EQ(code_of([] { normalize_score(5.01); }), ErrorCode::OutOfRange);
    EXPECT_EQ(code_of([] { normalize_score(NAN); }), ErrorCode::OutOfRange);
    double prev = -1;
    for (double s = 1.0; s <= 5.0; s += 0.125) {
        EXPECT_GT(normalize_score(s), prev);
        prev = normalize_score(s);
    }
}

TEST(Pairs, HumanPairScore) {
    using Q = std::array<int, 4>;
    EXPECT_EQ(human_pair_score(std::vector<Q>{{4, 4, 4, 4}}), 4.0);
    EXPECT_EQ(human_pair_score(std::vector<Q>{{5, 5, 5, 5}, {1, 1, 1, 1}}), 3.0);
    EXPECT_EQ(human_pair_score(std::vector<Q>{{4, 3, 3, 2}, {5, 4, 4, 3}}), 3.5);
    EXPECT_EQ(code_of([] { human_pair_score(std::vector<Q>{}); }), ErrorCode::NoAnnotations);
}

TEST(Pairs, SyntheticThresholdBoundary) {
    const auto pos = synthetic_pairs_for(annotated({{3, 3, 3, 3}}));
    ASSERT_EQ(pos.size(), 3u);
    for (const auto& p : pos) {
        EXPECT_EQ(p.label, 1);
        EXPECT_EQ(p.weight, 0.5);
        EXPECT_EQ(p.origin, PairOrigin::RealSynthetic);
        EXPECT_EQ(p.image_b, ImageId(100));
        EXPECT_EQ(*p.source_score, 3.0);
    }
    // mean 2.75 -> negative with weight 0.4375
    const auto neg = synthetic_pairs_for(annotated({{3, 3, 3, 2}}));
    for (const auto& p : neg) {
        EXPECT_EQ(p.label, 0);
        EXPECT_EQ(p.weight, 0.4375);
    }
    const auto inverted = synthetic_pairs_for(annotated({{3, 3, 3, 2}}), NegativeWeighting::Inverted);
    EXPECT_EQ(inverted[0].weight, 0.5625);
    // Score 1 keeps the pair at weight zero.
    EXPECT_EQ(synthetic_pairs_for(annotated({{1, 1, 1, 1}}))[0].weight, 0.0);
}

TEST(Pairs, RealPositivesAreAllCombinations) {
    auto cat = Catalog::in_memory();
    const auto a = cat.register_artifact("AZ", Category::Architecture, "the Flame Towers");
    for (int i = 0; i < 5; ++i) cat.register_image_bytes(a, ImageSource::Real, noise_png(i));
    RealPairOptions o;
    o.negatives_per_positive = 0;
    const auto pairs = build_real_pairs(cat, o);
    EXPECT_EQ(pairs.size(), 10u);
    std::set<std::pair<ImageId, ImageId>> uniq;
    for (const auto& p : pairs) {
        EXPECT_EQ(p.label, 1);
        EXPECT_EQ(p.weight, 1.0);
        EXPECT_NE(p.image_a, p.image_b);
        uniq.insert(std::minmax(p.image_a, p.image_b));
    }
    EXPECT_EQ(uniq.size(), 10u);
}

TEST(Pairs, CrossArtifactNegative) {
    auto cat = Catalog::in_memory();
    const auto ft = cat.register_artifact("AZ", Category::Architecture, "the Flame Towers");
    const auto es = cat.register_artifact("US", Category::Architecture, "the Empire State Building");
    for (int i = 0; i < 2; ++i) {
        cat.register_image_bytes(ft, ImageSource::Real, noise_png(10 + i));
        cat.register_image_bytes(es, ImageSource::Real, noise_png(20 + i));
    }
    const auto pairs = build_real_pairs(cat);
    std::size_t neg = 0;
    for (const auto& p : pairs)
        if (p.label == 0) {
            ++neg;
            EXPECT_EQ(p.weight, 1.0);
            EXPECT_NE(p.artifact_a, p.artifact_b);
        }
    EXPECT_EQ(neg, 2u);
}

TEST(Pairs, NegativeRatioIsExactAndStratified) {
    auto cat = Catalog::in_memory();
    cultdiff::testing::populate(cat, "KR", 4, 5, {});
    cultdiff::testing::populate(cat, "MX", 4, 5, {});
    const auto pairs = build_real_pairs(cat);
    std::size_t pos = 0, same = 0, cross = 0;
    std::set<std::pair<ImageId, ImageId>> uniq;
    for (const auto& p : pairs) {
        uniq.insert(std::minmax(p.image_a, p.image_b));
        if (p.label == 1) {
            ++pos;
            continue;
        }
        const bool same_country = cat.artifact(p.artifact_a)->country == cat.artifact(p.artifact_b)->country;
        (same_country ? same : cross)++;
    }
    EXPECT_EQ(pos, 24u * 10u);
    EXPECT_EQ(same + cross, pos);
    EXPECT_EQ(same, pos / 2);
    EXPECT_EQ(uniq.size(), pairs.size());
}

TEST(Pairs, PositiveCapAndAllowedArtifacts) {
    auto cat = Catalog::in_memory();
    cultdiff::testing::populate(cat, "KR", 2, 5, {});
    RealPairOptions o;
    o.max_positives_per_artifact = 2;
    o.allowed_artifacts = std::set<ArtifactId>{};
    for (const auto& a : cat.artifacts())
        if (a.category != Category::Food) o.allowed_artifacts->insert(a.id);
    const auto pairs = build_real_pairs(cat, o);
    std::size_t pos = 0;
    for (const auto& p : pairs) {
        pos += p.label;
        EXPECT_TRUE(o.allowed_artifacts->count(p.artifact_a));
        EXPECT_TRUE(o.allowed_artifacts->count(p.artifact_b));
    }
    EXPECT_EQ(pos, 8u);
}

TEST(Pairs, RealPairsDeterministic) {
    auto cat = Catalog::in_memory();
    cultdiff::testing::populate(cat, "ES", 3, 4, {});
    cultdiff::testing::populate(cat, "GB", 3, 4, {});
    const auto a = build_real_pairs(cat);
    const auto b = build_real_pairs(cat);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
    RealPairOptions o;
    o.seed = 8;
    const auto c = build_real_pairs(cat, o);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].id != c[i].id;
    EXPECT_TRUE(differs);
}

TEST(Pairs, EmptyWhenNoArtifactHasTwoImages) {
    auto cat = Catalog::in_memory();
    cultdiff::testing::populate(cat, "ES", 2, 1, {});
    EXPECT_TRUE(build_real_pairs(cat).empty());
}

TEST(Pairs, JsonlRoundTrip) {
    auto pairs = synthetic_pairs_for(annotated({{4, 3, 3, 2}}));
    ImagePair rr;
    rr.id = "rr:1:2";
    rr.image_a = ImageId(1);
    rr.image_b = ImageId(2);
    rr.label = 1;
    pairs.push_back(rr);
    std::stringstream ss;
    write_pairs_jsonl(ss, pairs);
    const auto back = read_pairs_jsonl(ss);
    ASSERT_EQ(back.size(), pairs.size());
    for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(to_json(back[i]), to_json(pairs[i]));
    std::istringstream bad("{\"id\": 3}\n");
    EXPECT_EQ(code_of([&] { read_pairs_jsonl(bad); }), ErrorCode::SchemaViolation);
}

TEST(Splits, PlanIsDisjointAndCovering) {
    auto cat = Catalog::in_memory();
    cultdiff::testing::populate(cat, "KR", 10, 1, {});
    const auto plan = make_split_plan(cat, {6, 2, 2}, 3);
    EXPECT_EQ(plan.assignment.size(), 30u);
    EXPECT_EQ(plan.artifacts_in(Split::Train).size(), 18u);
    EXPECT_EQ(plan.artifacts_in(Split::Val).size(), 6u);
    EXPECT_EQ(plan.artifacts_in(Split::Test).size(), 6u);
    const auto again = SplitPlan::from_json(plan.to_json());
    EXPECT_EQ(again.assignment, plan.assignment);
    EXPECT_EQ(make_split_plan(cat, {6, 2, 2}, 3).assignment, plan.assignment);
    EXPECT_EQ(code_of([&] { make_split_plan(cat, {30, 10, 10}, 3); }), ErrorCode::InvalidConfig);
}

TEST(Splits, OverlappingPlanFailsFast) {
    const auto j = nlohmann::json::parse(R"({"train": [1, 2], "val": [3], "test": [2]})");
    EXPECT_EQ(code_of([&] { SplitPlan::from_json(j); }), ErrorCode::SplitOverlap);
}

TEST(Splits, AssignmentRules) {
    SplitPlan plan;
    plan.assignment = {{ArtifactId(1), Split::Train}, {ArtifactId(2), Split::Val}, {ArtifactId(3), Split::Train}};
    auto syn = annotated({{4, 4, 4, 4}});
    syn.artifact = ArtifactId(2);
    std::vector<ImagePair> pairs = synthetic_pairs_for(syn);
    ImagePair keep, drop;
    keep.id = "rr:10:11";
    keep.image_a = ImageId(10);
    keep.image_b = ImageId(11);
    keep.artifact_a = ArtifactId(1);
    keep.artifact_b = ArtifactId(3);
    drop = keep;
    drop.id = "rr:10:12";
    drop.image_b = ImageId(12);
    drop.artifact_b = ArtifactId(2);
    pairs.push_back(keep);
    pairs.push_back(drop);

    const auto res = split_dataset(pairs, plan);
    EXPECT_EQ(res.val.size(), 3u);
    EXPECT_EQ(res.train.size(), 1u);
    EXPECT_EQ(res.dropped_real_pairs, 1u);
    for (const auto& p : res.val) EXPECT_EQ(p.split, Split::Val);

    ImagePair orphan = keep;
    orphan.artifact_b = ArtifactId(99);
    std::vector<ImagePair> bad{orphan};
    EXPECT_EQ(code_of([&] { split_dataset(bad, plan); }), ErrorCode::UnplannedPrompt);
}

TEST(Splits, SyntheticPairsFromSurvey) {
    auto cat = Catalog::in_memory();
    cultdiff::testing::populate(cat, "KR", 2, 5);
    SurveyStore store(cat);
    SurveyOptions so;
    so.artifacts_per_category = 2;
    const auto s = store.build_survey("KR", 9, so);
    store.register_annotator(s.id, "a");
    store.register_annotator(s.id, "b");
    // Answer all but the last question.
    for (std::size_t i = 0; i + 1 < s.questions.size(); ++i) {
        for (const char* who : {"a", "b"}) {
            AnnotationRow r;
            r.question_id = s.questions[i].id.value;
            r.annotator_id = who;
            const int v = 1 + static_cast<int>(i % 5);
            r.q1 = {v, v, v, v};
            r.q2 = r.q3 = v;
            r.inappropriate = false;
            store.submit(r);
        }
    }
    const auto res = build_synthetic_pairs(store);
    EXPECT_EQ(res.pairs.size(), 3 * (s.questions.size() - 1));
    ASSERT_EQ(res.unannotated.size(), 1u);
    EXPECT_EQ(res.unannotated[0], s.questions.back().generated_image_id);
    for (const auto& p : res.pairs) {
        const auto q = store.question(*p.question_id);
        EXPECT_EQ(p.image_b, q->generated_image_id);
        EXPECT_NE(std::find(q->reference_image_ids.begin(), q->reference_image_ids.end(), p.image_a),
                  q->reference_image_ids.end());
        EXPECT_EQ(p.label == 1, *p.source_score >= 3.0);
    }
}
