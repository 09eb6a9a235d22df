// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "cultdiff/dataset.hpp"
#include "cultdiff/fixture.hpp"

using namespace cultdiff;

TEST(Fixture, ShapeOfCatalogAndSurveys) {
    FixtureOptions fo;
    Catalog cat = Catalog::in_memory(fixture_catalog_config(fo));
    const auto truth = build_fixture_catalog(cat, fo);
    EXPECT_EQ(cat.artifacts().size(), 48u);
    for (const auto& a : cat.artifacts()) {
        EXPECT_EQ(cat.images_of(a.id, ImageSource::Real).size(), 5u);
        EXPECT_EQ(cat.images_of(a.id, ImageSource::Generated).size(), 3u);
    }
    EXPECT_EQ(truth.fidelity.size(), 144u);
    for (const auto& [id, q] : truth.fidelity) {
        EXPECT_GE(q, 0.0);
        EXPECT_LT(q, 1.0);
        const auto img = cat.load(id);
        EXPECT_EQ(img.width, 32);
    }
    ValidationTargets targets;
    targets.artifacts_per_cell = 4;
    targets.real_per_artifact = 5;
    EXPECT_TRUE(cat.validate(targets).ok()) << cat.validate(targets).to_json().dump();

    SurveyStore store(cat);
    const auto surveys = build_fixture_surveys(store, fo);
    ASSERT_EQ(surveys.size(), 4u);
    for (const auto& s : surveys) {
        EXPECT_EQ(s.questions.size(), 36u);
        EXPECT_EQ(store.annotators(s.id).size(), 3u);
    }
    const auto rows = oracle_annotations(surveys, truth, fo);
    EXPECT_EQ(rows.size(), 4u * 36u * 3u);
    const auto res = store.ingest(rows);
    EXPECT_EQ(res.accepted.size(), rows.size());
    EXPECT_TRUE(res.rejected.empty());
}

TEST(Fixture, Deterministic) {
    FixtureOptions fo;
    fo.artifacts_per_category = 1;
    Catalog a = Catalog::in_memory(fixture_catalog_config(fo));
    Catalog b = Catalog::in_memory(fixture_catalog_config(fo));
    const auto ta = build_fixture_catalog(a, fo);
    const auto tb = build_fixture_catalog(b, fo);
    EXPECT_EQ(ta.fidelity, tb.fidelity);
    const auto ia = a.images(), ib = b.images();
    ASSERT_EQ(ia.size(), ib.size());
    for (std::size_t i = 0; i < ia.size(); ++i) EXPECT_EQ(ia[i].checksum, ib[i].checksum);

    fo.seed += 1;
    Catalog c = Catalog::in_memory(fixture_catalog_config(fo));
    build_fixture_catalog(c, fo);
    EXPECT_NE(c.images()[0].checksum, ia[0].checksum);
}

TEST(Fixture, OracleAnnotatorIsMonotoneInFidelity) {
    FixtureOptions fo;
    Catalog cat = Catalog::in_memory(fixture_catalog_config(fo));
    const auto truth = build_fixture_catalog(cat, fo);
    SurveyStore store(cat);
    const auto surveys = build_fixture_surveys(store, fo);
    const auto rows = oracle_annotations(surveys, truth, fo);
    std::map<std::int64_t, ImageId> gen_of;
    for (const auto& s : surveys)
        for (const auto& q : s.questions) gen_of.emplace(q.id.value, q.generated_image_id);
    std::vector<double> q_true, q_mean;
    for (const auto& r : rows) {
        for (const auto& v : r.q1) {
            ASSERT_TRUE(v);
            EXPECT_GE(*v, 1);
            EXPECT_LE(*v, 5);
        }
        q_true.push_back(truth.fidelity.at(gen_of.at(*r.question_id)));
        q_mean.push_back((*r.q1[0] + *r.q1[1] + *r.q1[2] + *r.q1[3]) / 4.0);
    }
    EXPECT_GT(cultdiff::oracle::spearman(q_true, q_mean), 0.8);
}

TEST(Fixture, DatasetSplitsAtFixtureScale) {
    FixtureOptions fo;
    Catalog cat = Catalog::in_memory(fixture_catalog_config(fo));
    const auto truth = build_fixture_catalog(cat, fo);
    SurveyStore store(cat);
    const auto surveys = build_fixture_surveys(store, fo);
    store.ingest(oracle_annotations(surveys, truth, fo));
    DatasetOptions opts;
    opts.counts = {2, 1, 1};
    const auto d = build_dataset(cat, store, opts);
    // 12 cells x (2, 1, 1) prompts x 3 models x 3 references.
    EXPECT_EQ(d.synthetic_pairs, 48u * 9u);
    EXPECT_EQ(d.splits.val.size(), 108u);
    EXPECT_EQ(d.splits.test.size(), 108u);
    // 24 train prompts, 2 capped positives and as many negatives each.
    EXPECT_EQ(d.real_pairs, 96u);
    EXPECT_EQ(d.splits.train.size(), 216u + 96u);
    for (const auto& p : d.splits.val) EXPECT_EQ(p.origin, PairOrigin::RealSynthetic);
    for (const auto& p : d.splits.test) ASSERT_TRUE(p.question_id);
    const auto refs = question_references(store)(d.splits.test.front());
    EXPECT_EQ(refs.size(), 3u);
    EXPECT_NE(std::find(refs.begin(), refs.end(), d.splits.test.front().image_a), refs.end());
}
