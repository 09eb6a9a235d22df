// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "../test_support.hpp"
#include "cultdiff/catalog.hpp"
#include "cultdiff/error.hpp"

using namespace cultdiff;
using cultdiff::testing::noise_png;
using cultdiff::testing::TempDir;

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

}  // namespace

TEST(Catalog, RegisterArtifactAndLookup) {
    auto cat = Catalog::in_memory();
    const auto id = cat.register_artifact("Azerbaijan", Category::Architecture, "Flame Towers");
    const auto found = cat.find_artifact("AZ", Category::Architecture, "Flame Towers");
    ASSERT_TRUE(found);
    EXPECT_EQ(*found, id);
    const auto a = cat.artifact(id);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->country, "AZ");
    EXPECT_EQ(a->name, "Flame Towers");
    EXPECT_EQ(a->category, Category::Architecture);
}

TEST(Catalog, ArtifactErrors) {
    auto cat = Catalog::in_memory();
    cat.register_artifact("Azerbaijan", Category::Architecture, "Flame Towers");
    EXPECT_EQ(code_of([&] { cat.register_artifact("AZ", Category::Architecture, "  Flame Towers "); }),
              ErrorCode::DuplicateArtifact);
    EXPECT_EQ(code_of([&] { cat.register_artifact("Atlantis", Category::Food, "ambrosia"); }),
              ErrorCode::UnknownCountry);
    EXPECT_EQ(code_of([&] { cat.register_artifact("KR", Category::Food, "   "); }), ErrorCode::EmptyName);
    EXPECT_EQ(cat.artifacts().size(), 1u);
}

TEST(Catalog, CountryAliases) {
    auto cat = Catalog::in_memory();
    EXPECT_EQ(cat.resolve_country("usa"), "US");
    EXPECT_EQ(cat.resolve_country("South Korea"), "KR");
    EXPECT_EQ(cat.resolve_country("the United Kingdom"), "GB");
    EXPECT_FALSE(cat.resolve_country("Atlantis"));
}

TEST(Catalog, RegisterImagesFromFiles) {
    TempDir tmp;
    auto cat = Catalog::open(tmp.path / "store");
    const auto ft = cat.register_artifact("AZ", Category::Architecture, "Flame Towers");
    const auto real_path = tmp.path / "img/az/ft_1.png";
    const auto gen_path = tmp.path / "gen/ft_sdxl.png";
    write_file_bytes(real_path, noise_png(1, 6, 4));
    write_file_bytes(gen_path, noise_png(2));

    const auto r = cat.register_image(ft, ImageSource::Real, real_path);
    const auto g = cat.register_image(ft, ImageSource::Generated, gen_path, "sdxl", 7);
    const auto rec = cat.image(r);
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->source, ImageSource::Real);
    EXPECT_EQ(rec->width, 6);
    EXPECT_EQ(rec->height, 4);
    EXPECT_FALSE(rec->model_id);
    EXPECT_EQ(rec->checksum, sha256_hex(read_file_bytes(real_path)));
    EXPECT_EQ(cat.image(g)->model_id, "sdxl");
    EXPECT_EQ(cat.image(g)->seed, 7);

    EXPECT_EQ(code_of([&] { cat.register_image(ft, ImageSource::Generated, gen_path); }), ErrorCode::MissingModelId);
    EXPECT_EQ(code_of([&] { cat.register_image(ArtifactId{999}, ImageSource::Real, real_path); }),
              ErrorCode::MissingArtifact);
    const auto junk = tmp.path / "junk.png";
    std::ofstream(junk) << "not an image";
    EXPECT_EQ(code_of([&] { cat.register_image(ft, ImageSource::Real, junk); }), ErrorCode::UnreadableImage);
    EXPECT_EQ(code_of([&] { cat.register_image(ft, ImageSource::Real, tmp.path / "missing.png"); }),
              ErrorCode::UnreadableImage);
    EXPECT_EQ(cat.images().size(), 2u);
}

TEST(Catalog, ChecksumsAreContentAddressed) {
    TempDir tmp;
    auto cat = Catalog::open(tmp.path);
    const auto a = cat.register_artifact("KR", Category::Food, "bibimbap");
    const auto bytes = noise_png(5);
    const auto i1 = cat.register_image_bytes(a, ImageSource::Real, bytes);
    const auto i2 = cat.register_image_bytes(a, ImageSource::Real, bytes);
    const auto i3 = cat.register_image_bytes(a, ImageSource::Real, noise_png(6));
    EXPECT_EQ(cat.image(i1)->checksum, cat.image(i2)->checksum);
    EXPECT_NE(cat.image(i1)->checksum, cat.image(i3)->checksum);
    // Stable across reads.
    EXPECT_EQ(sha256_hex(cat.load_bytes(i1)), cat.image(i1)->checksum);
    EXPECT_EQ(sha256_hex(cat.load_bytes(i1)), sha256_hex(cat.load_bytes(i1)));
}

TEST(Catalog, PersistsAcrossReopen) {
    TempDir tmp;
    ImageId img{0};
    {
        auto cat = Catalog::open(tmp.path);
        const auto a = cat.register_artifact("ES", Category::Clothing, "flamenco dress");
        img = cat.register_image_bytes(a, ImageSource::Generated, noise_png(3), "flux", 11);
    }
    auto cat = Catalog::open(tmp.path);
    ASSERT_EQ(cat.artifacts().size(), 1u);
    const auto rec = cat.image(img);
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->model_id, "flux");
    EXPECT_EQ(cat.load(img).width, 8);
}

TEST(Catalog, ValidateEmptyCatalog) {
    auto cat = Catalog::in_memory();
    const auto report = cat.validate();
    EXPECT_EQ(report.violations.size(), 30u);
    for (const auto& v : report.violations) EXPECT_EQ(v.kind, Violation::Kind::CellArtifactCount);
}

TEST(Catalog, ValidateSingleShortfall) {
    auto cat = Catalog::in_memory();
    ValidationTargets t;
    t.artifacts_per_cell = 2;
    t.countries = {"KR"};
    cultdiff::testing::populate(cat, "KR", 2, 5);
    EXPECT_TRUE(cat.validate(t).ok());

    const auto extra = cat.register_artifact("KR", Category::Food, "kimchi");
    t.artifacts_per_cell = 3;
    for (int i = 0; i < 4; ++i) cat.register_image_bytes(extra, ImageSource::Real, noise_png(900 + i));
    std::uint64_t seed = 950;
    for (const auto& m : default_models()) cat.register_image_bytes(extra, ImageSource::Generated, noise_png(++seed), m);
    const auto report = cat.validate(t);
    std::size_t shortfalls = 0;
    for (const auto& v : report.violations)
        if (v.kind == Violation::Kind::RealImageShortfall) {
            ++shortfalls;
            EXPECT_EQ(v.actual, 4);
            EXPECT_EQ(*v.artifact, extra);
        }
    EXPECT_EQ(shortfalls, 1u);
}

TEST(Catalog, ViolationsMonotoneAsImagesAdded) {
    auto cat = Catalog::in_memory();
    ValidationTargets t;
    t.artifacts_per_cell = 1;
    t.countries = {"MX"};
    std::vector<ArtifactId> ids;
    for (Category c : kAllCategories) ids.push_back(cat.register_artifact("MX", c, "thing"));
    std::size_t prev = cat.validate(t).violations.size();
    std::uint64_t seed = 100;
    for (auto id : ids) {
        for (int i = 0; i < 5; ++i) {
            cat.register_image_bytes(id, ImageSource::Real, noise_png(++seed));
            const auto now = cat.validate(t).violations.size();
            EXPECT_LE(now, prev);
            prev = now;
        }
        for (const auto& m : default_models()) {
            cat.register_image_bytes(id, ImageSource::Generated, noise_png(++seed), m);
            const auto now = cat.validate(t).violations.size();
            EXPECT_LE(now, prev);
            prev = now;
        }
    }
    EXPECT_EQ(prev, 0u);
}

TEST(Catalog, BatchRollsBackOnFailure) {
    auto cat = Catalog::in_memory();
    cat.register_artifact("CN", Category::Clothing, "Hanfu");
    EXPECT_THROW(cat.batch([&] {
        cat.register_artifact("CN", Category::Food, "dumplings");
        cat.register_artifact("CN", Category::Clothing, "Hanfu");
    }),
                 Error);
    EXPECT_EQ(cat.artifacts().size(), 1u);
    EXPECT_FALSE(cat.find_artifact("CN", Category::Food, "dumplings"));
}

TEST(Catalog, ManifestRoundTrip) {
    TempDir tmp;
    auto src = Catalog::open(tmp.path / "a");
    const auto a = src.register_artifact("ET", Category::Food, "injera");
    src.register_image_bytes(a, ImageSource::Real, noise_png(1));
    src.register_image_bytes(a, ImageSource::Generated, noise_png(2), "sd3m", 4);
    const auto manifest = src.export_manifest();
    ASSERT_TRUE(manifest.contains("artifacts"));
    ASSERT_TRUE(manifest.contains("images"));

    auto dst = Catalog::open(tmp.path / "b");
    dst.import_manifest(manifest, tmp.path / "a");
    ASSERT_EQ(dst.artifacts().size(), 1u);
    const auto imgs = dst.images();
    ASSERT_EQ(imgs.size(), 2u);
    std::set<std::string> a_sums, b_sums;
    for (const auto& r : src.images()) a_sums.insert(r.checksum);
    for (const auto& r : imgs) b_sums.insert(r.checksum);
    EXPECT_EQ(a_sums, b_sums);
}
