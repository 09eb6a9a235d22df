// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "cultdiff/error.hpp"
#include "cultdiff/evalsuite.hpp"
#include "cultdiff/fixture.hpp"
#include "cultdiff/rng.hpp"

using namespace cultdiff;

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

EncoderSpec small_spec() {
    EncoderSpec s;
    s.image_size = 16;
    s.patch_size = 8;
    s.hidden_dim = 16;
    s.layers = 1;
    s.heads = 2;
    s.mlp_dim = 32;
    s.init_seed = 3;
    return s;
}

Image flat(float r, float g, float b, int size = 16) {
    Image img(size, size);
    for (int i = 0; i < size * size; ++i) {
        img.pixels[static_cast<std::size_t>(i) * 3] = r;
        img.pixels[static_cast<std::size_t>(i) * 3 + 1] = g;
        img.pixels[static_cast<std::size_t>(i) * 3 + 2] = b;
    }
    return img;
}

PairScore score(const std::string& id, double s, std::optional<double> fid, double lp, double ss, std::optional<double> h) {
    return {id, s, fid, lp, ss, h};
}

}  // namespace

TEST(Evalsuite, CosineSimilarity) {
    Eigen::VectorXd a(2), b(2);
    a << 1, 0;
    b << 0, 2;
    EXPECT_EQ(cosine_similarity(a, a), 1.0);
    EXPECT_EQ(cosine_similarity(a, b), 0.0);
    EXPECT_EQ(cosine_similarity(a, -a), -1.0);
    EXPECT_EQ(code_of([&] { cosine_similarity(a, Eigen::VectorXd::Zero(3)); }), ErrorCode::DimensionMismatch);
}

TEST(Evalsuite, SimilarityScoreContracts) {
    const Embedder e(VitEncoder(small_spec()), true);
    const Image x = flat(0.8f, 0.2f, 0.1f), y = flat(0.1f, 0.3f, 0.9f);
    const std::vector<Image> self{x};
    EXPECT_NEAR(similarity_score(e, x, self), 1.0, 1e-5);
    const std::vector<Image> three{y, y, y}, one{y};
    EXPECT_NEAR(similarity_score(e, x, three), similarity_score(e, x, one), 1e-12);
    const std::vector<Image> xs{x};
    EXPECT_NEAR(similarity_score(e, x, one), similarity_score(e, y, xs), 1e-12);
    const double s = similarity_score(e, x, one);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(code_of([&] { similarity_score(e, x, {}); }), ErrorCode::EmptyReferences);
    EXPECT_EQ(code_of([&] { similarity_score(Embedder{}, x, one); }), ErrorCode::EncoderNotLoaded);
}

TEST(Evalsuite, ScorePairsOnFixture) {
    FixtureOptions fo;
    fo.artifacts_per_category = 1;
    Catalog cat = Catalog::in_memory(fixture_catalog_config(fo));
    build_fixture_catalog(cat, fo);
    const Embedder e(VitEncoder(small_spec()), true);

    std::vector<ImagePair> pairs;
    for (const auto& a : cat.artifacts()) {
        const auto reals = cat.images_of(a.id, ImageSource::Real);
        const auto gens = cat.images_of(a.id, ImageSource::Generated);
        ImagePair p;
        p.id = "rs:" + std::to_string(gens[0].id.value) + ":" + std::to_string(reals[0].id.value);
        p.image_a = reals[0].id;
        p.image_b = gens[0].id;
        p.origin = PairOrigin::RealSynthetic;
        p.source_score = 2.5;
        pairs.push_back(p);
    }
    const HandcraftedFeatureExtractor fx;
    ScoreOptions opts;
    opts.parallelism = 3;
    opts.extractor = &fx;
    const auto scores = score_pairs(cat, pairs, e, opts);
    ASSERT_EQ(scores.size(), pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto ref = cat.load(pairs[i].image_a), gen = cat.load(pairs[i].image_b);
        EXPECT_EQ(scores[i].pair_id, pairs[i].id);
        EXPECT_NEAR(scores[i].cultdiff_s, cosine_similarity(e.embed(gen), e.embed(ref)), 1e-12);
        EXPECT_EQ(scores[i].ssim, ssim(gen, ref));
        EXPECT_EQ(scores[i].lpips, lpips_distance(gen, ref));
        ASSERT_TRUE(scores[i].fid);
        EXPECT_EQ(*scores[i].fid, (fx.extract(ref) - fx.extract(gen)).squaredNorm());
        EXPECT_EQ(scores[i].human, 2.5);
    }
    opts.extractor = nullptr;
    opts.parallelism = 1;
    for (const auto& s : score_pairs(cat, pairs, e, opts)) EXPECT_FALSE(s.fid);
}

TEST(Evalsuite, ScoresCsvRoundTrip) {
    const std::vector<PairScore> scores{score("rs:1:2", 0.25, 3.5, 0.1, 0.9, 4.0),
                                        score("rs:3:4", -0.125, std::nullopt, 0.2, -0.1, std::nullopt),
                                        score("rs:5:6", 1.0 / 3.0, 0.0, 0.0, 1.0, 1.0)};
    std::stringstream io;
    write_scores_csv(io, scores);
    EXPECT_EQ(io.str().substr(0, io.str().find('\n')), "pair_id,cultdiff_s,fid,lpips,ssim,human");
    const auto back = read_scores_csv(io);
    ASSERT_EQ(back.size(), scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        EXPECT_EQ(back[i].pair_id, scores[i].pair_id);
        EXPECT_EQ(back[i].cultdiff_s, scores[i].cultdiff_s);
        EXPECT_EQ(back[i].fid, scores[i].fid);
        EXPECT_EQ(back[i].lpips, scores[i].lpips);
        EXPECT_EQ(back[i].ssim, scores[i].ssim);
        EXPECT_EQ(back[i].human, scores[i].human);
    }
    std::stringstream bad("pair,x\n");
    EXPECT_EQ(code_of([&] { read_scores_csv(bad); }), ErrorCode::SchemaViolation);
    std::stringstream short_row("pair_id,cultdiff_s,fid,lpips,ssim,human\nrs:1:2,0.5,,0.1\n");
    EXPECT_EQ(code_of([&] { read_scores_csv(short_row); }), ErrorCode::SchemaViolation);
    std::stringstream bad_num("pair_id,cultdiff_s,fid,lpips,ssim,human\nrs:1:2,abc,,0.1,0.2,3\n");
    EXPECT_EQ(code_of([&] { read_scores_csv(bad_num); }), ErrorCode::SchemaViolation);
}

TEST(Evalsuite, CorrelationTableUsesAnnotatedPairsOnly) {
    Rng rng(12);
    std::vector<PairScore> scores;
    std::vector<double> cs, human, fid_v, fid_h;
    for (int i = 0; i < 40; ++i) {
        const bool annotated = i % 5 != 0;
        const bool has_fid = i % 3 != 0;
        const double h = 1 + rng.index(5) + 0.25 * static_cast<double>(rng.index(4));
        auto s = score("p" + std::to_string(i), rng.uniform(), has_fid ? std::optional(rng.uniform() * 10) : std::nullopt,
                       rng.uniform(), rng.uniform(), annotated ? std::optional(h) : std::nullopt);
        if (annotated) {
            cs.push_back(s.cultdiff_s);
            human.push_back(h);
            if (has_fid) {
                fid_v.push_back(*s.fid);
                fid_h.push_back(h);
            }
        }
        scores.push_back(s);
    }
    const auto table = correlation_table(scores, [](const PairScore& s) { return std::stoi(s.pair_id.substr(1)) % 2 ? "odd" : "even"; });
    ASSERT_EQ(table.overall.size(), 4u);
    EXPECT_EQ(table.overall[0].metric, "cultdiff_s");
    EXPECT_EQ(table.overall[0].n, cs.size());
    EXPECT_NEAR(*table.overall[0].spearman, cultdiff::oracle::spearman(cs, human), 1e-9);
    EXPECT_EQ(table.overall[1].metric, "fid");
    EXPECT_EQ(table.overall[1].n, fid_v.size());
    EXPECT_NEAR(*table.overall[1].kendall_tau_b, cultdiff::oracle::tau_b(fid_v, fid_h), 1e-9);
    EXPECT_EQ(table.slices.size(), 2u);
    EXPECT_EQ(table.slices.at("odd")[0].n + table.slices.at("even")[0].n, cs.size());

    std::ostringstream csv;
    table.write_csv(csv);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "slice,metric,spearman,pearson,kendall_tau_b,kendall_tau_c,n");
    EXPECT_TRUE(table.to_json().contains("slices"));
}
